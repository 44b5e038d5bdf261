"""Vector and rotation primitives on the Bloch sphere.

Vectors are plain ``numpy`` arrays of shape ``(3,)``. Functions that need a
pure (unit) Bloch vector check the norm and raise :class:`DomainError`.
"""

import numpy as np

# |s_i x s_f| at or below this selects the fallback rotation axis
DEGENERACY_TOL = 1e-9
UNIT_TOL = 1e-12

X_HAT = np.array([1.0, 0.0, 0.0])
Y_HAT = np.array([0.0, 1.0, 0.0])
Z_HAT = np.array([0.0, 0.0, 1.0])


class DomainError(ValueError):
    """Raised when an input lies outside the domain of an operation."""


class DegenerateGeometryError(DomainError):
    """Raised when s_i and s_f are (anti)parallel and no unique plane exists."""


def as_vector(v):
    arr = np.asarray(v, dtype=float).reshape(-1)
    if arr.shape != (3,):
        raise DomainError(f"expected a 3-vector, got shape {np.shape(v)}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"non-finite vector components: {arr}")
    return arr


def require_unit(v, name="vector", tol=UNIT_TOL):
    """Return ``v`` as an array, raising if it is not a unit vector."""
    arr = as_vector(v)
    norm = np.linalg.norm(arr)
    if abs(norm - 1.0) > tol:
        raise DomainError(f"{name} must have unit norm, got |{name}| = {norm!r}")
    return arr


def normalize(v):
    arr = as_vector(v)
    norm = np.linalg.norm(arr)
    if norm == 0.0:
        raise DomainError("cannot normalize the zero vector")
    return arr / norm


def cross(u, v):
    """Right-handed cross product; broadcasts over leading axes."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return np.stack(
        [
            u[..., 1] * v[..., 2] - u[..., 2] * v[..., 1],
            u[..., 2] * v[..., 0] - u[..., 0] * v[..., 2],
            u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0],
        ],
        axis=-1,
    )


def angle_between(a, b):
    """Angle in ``[0, pi]`` between two unit vectors.

    Uses ``atan2(|a x b|, a . b)`` so that it stays accurate near 0 and pi,
    where ``arccos`` of the dot product loses half the significant digits.
    """
    a = require_unit(a, "a", tol=1e-9)
    b = require_unit(b, "b", tol=1e-9)
    return float(np.arctan2(np.linalg.norm(cross(a, b)), np.dot(a, b)))


def fallback_axis(s):
    """Deterministic unit axis perpendicular to ``s``.

    Crosses ``s`` with whichever of x-hat, y-hat is closer to orthogonal to it.
    """
    s = as_vector(s)
    ref = X_HAT if abs(s[0]) <= abs(s[1]) else Y_HAT
    return normalize(cross(s, ref))


def perpendicular_axis(s_i, s_f, tol=DEGENERACY_TOL):
    """Unit rotation axis along ``s_i x s_f``.

    Returns
    -------
    axis : ndarray
        Normalized ``s_i x s_f``, or :func:`fallback_axis` of ``s_i`` when the
        cross product is shorter than ``tol``.
    degenerate : bool
        True when the fallback was used.
    """
    s_i = require_unit(s_i, "s_i", tol=1e-9)
    s_f = require_unit(s_f, "s_f", tol=1e-9)
    c = cross(s_i, s_f)
    norm = np.linalg.norm(c)
    if norm > tol:
        return c / norm, False
    return fallback_axis(s_i), True


def rotate(s, axis, angle):
    """Rotate ``s`` right-handedly about the unit ``axis`` by ``angle`` radians.

    ``angle`` may be an array, in which case the result has shape
    ``angle.shape + (3,)``.
    """
    s = as_vector(s)
    k = require_unit(axis, "axis", tol=1e-9)
    angle = np.asarray(angle, dtype=float)
    c = np.cos(angle)[..., None]
    sn = np.sin(angle)[..., None]
    kxs = cross(k, s)
    kds = np.dot(k, s)
    return s * c + kxs * sn + k * kds * (1.0 - c)


def rotation_matrix(axis, angle):
    """Rodrigues rotation matrix for a right-handed turn about ``axis``."""
    k = require_unit(axis, "axis", tol=1e-9)
    K = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)
