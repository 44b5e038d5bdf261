import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bloch_pulse.costs import fluence, rate_cost
from bloch_pulse.geometry import DomainError
from bloch_pulse.oracle import (
    FLUENCE_TOL,
    MIXED_TOL,
    RATE_TOL,
    ModalProfile,
    PerturbationBasis,
    base_profile,
    direct_discrete_minimizer,
    profile_cost,
    quadratic_growth_exponent,
    verify_fluence_minimum,
    verify_mixed_minimum,
    verify_rate_minimum,
)
from bloch_pulse.pulses import effective_angle, pulse_b1, pulse_b2, pulse_b3


@pytest.mark.parametrize("kind", ["fourier", "endpoint"])
def test_basis_modes_have_zero_mean(kind):
    basis = PerturbationBasis(kind)
    np.testing.assert_allclose(basis.means(), 0.0, atol=1e-14)
    t = np.linspace(0, 1, 4001)
    vals = basis.values(t)
    gram = vals @ vals.T / 4000
    gram -= 0.5 * (np.outer(vals[:, 0], vals[:, 0]) + np.outer(vals[:, -1], vals[:, -1])) / 4000
    np.testing.assert_allclose(gram, np.eye(basis.k), atol=1e-8)


def test_endpoint_modes_vanish_at_ends():
    vals = PerturbationBasis("endpoint").values(np.array([0.0, 1.0]))
    np.testing.assert_allclose(vals, 0.0, atol=1e-14)


def test_basis_derivatives_and_integrals_consistent():
    basis = PerturbationBasis("endpoint", k=5)
    t = np.linspace(0, 1, 2001)
    np.testing.assert_allclose(np.gradient(basis.values(t, -1), t, axis=1, edge_order=2), basis.values(t), atol=1e-3)
    np.testing.assert_allclose(np.gradient(basis.values(t), t, axis=1, edge_order=2)[:, 1:-1], basis.values(t, 1)[:, 1:-1], atol=1e-3)


def test_bad_basis_kind():
    with pytest.raises(ValueError):
        PerturbationBasis("wavelet")


def test_fluence_oracle_passes():
    v = verify_fluence_minimum(math.pi / 2)
    assert v.worst_violation <= FLUENCE_TOL
    assert v.off_axis_worst_violation <= FLUENCE_TOL
    assert v.passed and v.n_trials == 1000
    assert v.min_perturbed_cost >= v.base_cost


@pytest.mark.parametrize("theta, n", [(math.pi / 2, 0), (2.5, 1)])
def test_rate_oracle_passes(theta, n):
    v = verify_rate_minimum(theta, n)
    assert v.passed and v.worst_violation <= RATE_TOL
    assert v.base_cost == pytest.approx(12 * effective_angle(theta, n) ** 2, rel=1e-8)


@pytest.mark.parametrize("a, omega", [(1.0, 5.0), (0.3, 0.5), (2.0, 40.0)])
def test_mixed_oracle_passes(a, omega):
    v = verify_mixed_minimum(1.0, 0, a, omega)
    assert v.passed and v.worst_violation <= MIXED_TOL


def test_rate_oracle_rejects_fourier_modes():
    with pytest.raises(DomainError):
        verify_rate_minimum(1.0, basis=PerturbationBasis("fourier"))
    with pytest.raises(DomainError):
        verify_mixed_minimum(1.0, basis=PerturbationBasis("fourier"))


def test_zero_amplitude_leaves_cost_unchanged():
    v = verify_fluence_minimum(1.0, basis=PerturbationBasis(amplitude_scale=0.0), n_trials=10, off_axis_trials=0)
    assert v.min_perturbed_cost == pytest.approx(v.base_cost, rel=1e-14)
    assert v.worst_violation == pytest.approx(0.0, abs=1e-14)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 3.0), st.floats(-2.0, 2.0))
def test_single_mode_raises_fluence_by_c_squared(theta, c):
    p = ModalProfile(pulse_b1(theta), PerturbationBasis("fourier", k=1), (c,))
    assert fluence(p) - theta**2 == pytest.approx(c**2, rel=1e-9, abs=1e-12)


def test_oracle_is_reproducible_from_seed():
    a = verify_rate_minimum(1.0, n_trials=50, seed=7, off_axis_trials=2)
    b = verify_rate_minimum(1.0, n_trials=50, seed=7, off_axis_trials=2)
    c = verify_rate_minimum(1.0, n_trials=50, seed=8, off_axis_trials=2)
    assert a.as_dict() == b.as_dict()
    assert a.certificate != c.certificate


def test_moving_rate_base_toward_parabola_lowers_cost():
    # a non-optimal endpoint-vanishing pulse, then interpolate toward b2
    theta = 1.0
    basis = PerturbationBasis("endpoint", k=3)
    off = ModalProfile(pulse_b2(theta), basis, (0.5, -0.2, 0.3))
    costs = [
        rate_cost(ModalProfile(pulse_b2(theta), basis, tuple(s * np.array([0.5, -0.2, 0.3]))))
        for s in (1.0, 0.5, 0.0)
    ]
    assert costs[0] == pytest.approx(rate_cost(off))
    assert costs[0] > costs[1] > costs[2]


@pytest.mark.parametrize("criterion", ["fluence", "rate", "mixed"])
def test_quadratic_growth(criterion):
    assert quadratic_growth_exponent(criterion, 1.0) == pytest.approx(2.0, abs=0.1)


def test_branch_minima():
    theta = 1.0
    assert profile_cost("fluence", base_profile("fluence", theta, 0)) == pytest.approx(theta**2, rel=1e-10)
    assert profile_cost("fluence", base_profile("fluence", theta, 1)) == pytest.approx((theta + 2 * math.pi) ** 2, rel=1e-10)
    assert profile_cost("fluence", base_profile("fluence", theta, -1)) == pytest.approx((theta - 2 * math.pi) ** 2, rel=1e-10)
    with pytest.raises(ValueError):
        base_profile("energy", theta)


# ---------------------------------------------------------------- discrete QP


@pytest.mark.parametrize("theta, n", [(0.7, 0), (2.5, 1)])
def test_qp_fluence_is_flat(theta, n):
    _, b = direct_discrete_minimizer("fluence", theta, n)
    assert np.max(np.abs(b - effective_angle(theta, n))) <= 1e-10


def _qp_error(criterion, m, theta=1.0, omega=5.0):
    t, b = direct_discrete_minimizer(criterion, theta, grid_m=m, omega=omega)
    exact = pulse_b2(theta) if criterion == "rate" else pulse_b3(theta, 0, omega)
    return np.max(np.abs(b - exact.value(t)))


@pytest.mark.parametrize("criterion", ["rate", "mixed"])
def test_qp_converges_at_second_order(criterion):
    errs = [_qp_error(criterion, m) for m in (9, 17, 33)]
    assert 3.5 < errs[0] / errs[1] < 4.5
    assert 3.5 < errs[1] / errs[2] < 4.5


def test_qp_grid_limits():
    with pytest.raises(DomainError):
        direct_discrete_minimizer("rate", 1.0, grid_m=65)
    with pytest.raises(DomainError):
        direct_discrete_minimizer("rate", 1.0, grid_m=2)
    with pytest.raises(ValueError):
        direct_discrete_minimizer("energy", 1.0)


def test_qp_endpoint_zeros_respected():
    _, b = direct_discrete_minimizer("mixed", 1.0, grid_m=21)
    assert b[0] == pytest.approx(0.0, abs=1e-12) and b[-1] == pytest.approx(0.0, abs=1e-12)
    _, free = direct_discrete_minimizer("mixed", 1.0, grid_m=21, endpoint_zeros=False)
    assert free[0] > 0.1
