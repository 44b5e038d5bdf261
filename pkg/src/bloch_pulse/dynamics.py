"""Bloch-equation propagation and the Euler-Lagrange (s, lambda) system."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .geometry import DegenerateGeometryError, DomainError, as_vector, cross, require_unit
from .pulses import DEFAULT_GRID_N, ControlSchedule, Trajectory, uniform_grid


def _skew(b):
    """Stack of matrices ``B`` with ``B @ s == b x s``; ``b`` has shape (..., 3)."""
    z = np.zeros(b.shape[:-1])
    return np.stack(
        [
            np.stack([z, -b[..., 2], b[..., 1]], axis=-1),
            np.stack([b[..., 2], z, -b[..., 0]], axis=-1),
            np.stack([-b[..., 1], b[..., 0], z], axis=-1),
        ],
        axis=-2,
    )


def half_step_controls(schedule):
    """Control values at the interval midpoints of ``schedule``.

    Uses the schedule's closed-form field when it has one, otherwise a
    not-a-knot cubic spline through the samples.
    """
    t_mid = 0.5 * (schedule.t[1:] + schedule.t[:-1])
    if schedule.field is not None:
        return np.asarray(schedule.field(t_mid), dtype=float)
    return CubicSpline(schedule.t, schedule.b, axis=0)(t_mid)


def rk4_step_matrices(schedule):
    """Per-step RK4 propagators for the linear flow ``s' = b x s``.

    The classical RK4 stages are linear in ``s``, so each step collapses to a
    3x3 matrix; building all of them at once keeps the time loop trivial.
    """
    h = schedule.h
    A0 = _skew(schedule.b[:-1])
    Am = _skew(half_step_controls(schedule))
    A1 = _skew(schedule.b[1:])
    eye = np.broadcast_to(np.eye(3), A0.shape)
    K1 = A0
    K2 = Am @ (eye + 0.5 * h * K1)
    K3 = Am @ (eye + 0.5 * h * K2)
    K4 = A1 @ (eye + h * K3)
    return eye + (h / 6.0) * (K1 + 2.0 * K2 + 2.0 * K3 + K4)


@dataclass
class PropagationResult:
    trajectory: Trajectory
    final_state: np.ndarray
    final_error: float
    norm_drift: float


def propagate(s0, schedule, target=None, renormalize=False):
    """Integrate ``s' = b x s`` over ``schedule`` with fixed-step classical RK4.

    Parameters
    ----------
    s0 : array_like
        Initial Bloch vector (any finite length).
    schedule : ControlSchedule
    target : array_like, optional
        If given, ``final_error`` is ``|s(1) - target|``; otherwise NaN.
    renormalize : bool
        Rescale to the initial norm after every step. Off by default so that
        ``norm_drift`` measures the integrator.
    """
    s = as_vector(s0).copy()
    norm0 = np.linalg.norm(s)
    steps = rk4_step_matrices(schedule)
    out = np.empty((schedule.n + 1, 3))
    out[0] = s
    for k in range(schedule.n):
        s = steps[k] @ s
        if renormalize and norm0 > 0:
            s *= norm0 / np.linalg.norm(s)
        out[k + 1] = s
    drift = float(np.max(np.abs(np.linalg.norm(out, axis=1) - norm0)))
    err = float("nan") if target is None else float(np.linalg.norm(s - as_vector(target)))
    return PropagationResult(Trajectory(schedule.t.copy(), out), s.copy(), err, drift)


# --------------------------------------------------------------------------
# Euler-Lagrange system


@dataclass
class ELState:
    s: np.ndarray
    lam: np.ndarray

    @property
    def nu(self):
        return float(np.dot(self.s, self.lam))


@dataclass
class ELTrajectory:
    t: np.ndarray
    s: np.ndarray
    lam: np.ndarray
    a: float

    @property
    def b(self):
        """Control recovered from the constraint ``b = a s x lambda``."""
        return self.a * cross(self.s, self.lam)

    def invariants(self):
        """``(s.s, lam.lam, lam.s)`` at every sample."""
        return (
            np.einsum("ij,ij->i", self.s, self.s),
            np.einsum("ij,ij->i", self.lam, self.lam),
            np.einsum("ij,ij->i", self.s, self.lam),
        )


def _el_matrix(cos_theta):
    return np.array([[-cos_theta, 1.0], [-1.0, cos_theta]])


def propagate_el(state0, a, n=DEFAULT_GRID_N):
    """Integrate the reduced Euler-Lagrange system on ``[0, 1]``.

    With unit ``s`` and ``lambda`` the flow is linear,
    ``d/d(a t) (s, lam) = [[-cos th, 1], [-1, cos th]] (s, lam)``, where
    ``cos th = nu`` is fixed from the initial data. Fixed-step RK4.
    """
    s0 = require_unit(state0.s, "s", 1e-9)
    lam0 = require_unit(state0.lam, "lambda", 1e-9)
    cos_theta = float(np.dot(s0, lam0)) / (np.linalg.norm(s0) * np.linalg.norm(lam0))
    t = uniform_grid(n)
    h = a / n
    M = _el_matrix(cos_theta)
    # RK4 amplification matrix of a constant linear system
    hM = h * M
    step = np.eye(2) + hM + hM @ hM / 2.0 + hM @ hM @ hM / 6.0 + hM @ hM @ hM @ hM / 24.0
    X = np.stack([s0, lam0])
    s = np.empty((n + 1, 3))
    lam = np.empty((n + 1, 3))
    s[0], lam[0] = X
    for k in range(n):
        X = step @ X
        s[k + 1], lam[k + 1] = X
    return ELTrajectory(t=t, s=s, lam=lam, a=float(a))


def el_coefficients(theta, a, t):
    """The 2x2 sine-matrix of the closed-form EL solution (before ``1/sin th``)."""
    x = a * np.asarray(t, dtype=float) * math.sin(theta)
    return np.array(
        [
            [np.sin(theta - x), np.sin(x)],
            [-np.sin(x), np.sin(theta + x)],
        ]
    )


def closed_form_el(s0, lam0, a, t):
    """Exact ``(s(t), lam(t))`` of the EL system for unit ``s0``, ``lam0``."""
    s0 = require_unit(s0, "s0", 1e-9)
    lam0 = require_unit(lam0, "lam0", 1e-9)
    sin_theta = float(np.linalg.norm(cross(s0, lam0)))
    if sin_theta <= 1e-12:
        raise DegenerateGeometryError("s0 and lam0 are (anti)parallel; sin(theta) = 0")
    theta = math.atan2(sin_theta, float(np.dot(s0, lam0)))
    C = el_coefficients(theta, a, t) / sin_theta
    s = C[0, 0][..., None] * s0 + C[0, 1][..., None] * lam0
    lam = C[1, 0][..., None] * s0 + C[1, 1][..., None] * lam0
    return s, lam


# --------------------------------------------------------------------------
# inverse problem and control-equation residuals


def _ddt(y, h, order=1):
    """Second-order finite differences along axis 0 (one-sided at the ends)."""
    for _ in range(order):
        y = np.gradient(y, h, axis=0, edge_order=2)
    return y


def invert_bloch(trajectory, f=None):
    """Reconstruct a control that drives ``trajectory``.

    ``b = s x s' / |s|^2 - f(t) s`` with ``s'`` from central differences.
    Any ``f`` gives the same motion because ``s x s = 0``.
    """
    t = trajectory.t
    n = len(t) - 1
    if n < 100:
        raise DomainError(f"need at least 100 intervals for finite differences, got {n}")
    s = trajectory.s
    s2 = np.einsum("ij,ij->i", s, s)
    if np.any(s2 < 1e-24):
        raise DomainError("Bloch vector vanishes; inversion undefined")
    s_dot = _ddt(s, 1.0 / n)
    b = cross(s, s_dot) / s2[:, None]
    if f is not None:
        fv = np.broadcast_to(np.asarray(f(t) if callable(f) else f, dtype=float), t.shape)
        b = b - fv[:, None] * s
    return ControlSchedule(t=t.copy(), b=b)


@dataclass
class ResidualReport:
    residual: float  # max |b'' + Omega^2 s x lam| over interior points
    third_order_residual: float  # max |b''' - b x b''|
    second_derivative_norm: float  # mean |b''|
    second_derivative_spread: float  # (max - min) |b''| / mean |b''|


def control_derivatives(schedule, order, method="auto"):
    """``d^order b / dt^order`` on the schedule grid.

    ``method="auto"`` uses the closed-form field when it provides
    derivatives and falls back to finite differences otherwise.
    """
    fld = schedule.field
    if method == "auto" and fld is not None and hasattr(fld, "derivative"):
        return np.asarray(fld.derivative(schedule.t, order), dtype=float)
    if method not in ("auto", "fd"):
        raise ValueError(f"unknown method {method!r}")
    return _ddt(schedule.b, schedule.h, order)


def control_ode_residual(schedule, el_trajectory, omega_sq_root, method="auto"):
    """Check a schedule against ``b'' = -Omega^2 s x lam`` and its third-order form.

    ``el_trajectory`` holds ``s`` and ``lam`` sampled on the schedule grid;
    ``omega_sq_root`` is ``Omega`` (not squared).
    """
    b = schedule.b
    b2 = control_derivatives(schedule, 2, method)
    b3 = control_derivatives(schedule, 3, method)
    interior = slice(1, -1)
    rhs = -(omega_sq_root**2) * cross(el_trajectory.s, el_trajectory.lam)
    res = np.linalg.norm(b2 - rhs, axis=1)[interior]
    third = np.linalg.norm(b3 - cross(b, b2), axis=1)[interior]
    mag = np.linalg.norm(b2, axis=1)[interior]
    mean = float(np.mean(mag))
    spread = float(np.ptp(mag) / mean) if mean > 0 else 0.0
    return ResidualReport(float(np.max(res)), float(np.max(third)), mean, spread)


def el_data_along(schedule, s0, lam0, a=1.0):
    """Transport ``s`` and ``lam`` along ``schedule`` (``lam' = b x lam`` like ``s``)."""
    s = propagate(s0, schedule).trajectory.s
    lam = propagate(lam0, schedule).trajectory.s
    return ELTrajectory(t=schedule.t.copy(), s=s, lam=lam, a=float(a))
