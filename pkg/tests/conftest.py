import math

import numpy as np
import pytest
from hypothesis import strategies as st

Z = np.array([0.0, 0.0, 1.0])
X = np.array([1.0, 0.0, 0.0])
Y = np.array([0.0, 1.0, 0.0])


def pair(theta):
    """s_i = z-hat and s_f at angle theta in the x-z plane; axis is y-hat."""
    return Z.copy(), np.array([math.sin(theta), 0.0, math.cos(theta)])


def unit_vectors():
    return (
        st.tuples(*[st.floats(-1, 1, allow_nan=False)] * 3)
        .map(np.array)
        .filter(lambda v: np.linalg.norm(v) > 1e-3)
        .map(lambda v: v / np.linalg.norm(v))
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
