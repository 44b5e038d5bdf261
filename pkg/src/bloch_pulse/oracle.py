"""Brute-force checks that the analytic pulses minimize their criteria.

Two independent routes:

* random admissible perturbations of the analytic profile, evaluated by
  quadrature (``verify_*_minimum``), plus a short 3-D spot check that
  re-propagates the Bloch equation;
* a small equality-constrained quadratic program over pulse samples
  (:func:`direct_discrete_minimizer`) that re-derives the optimum from scratch.

Perturbations keep ``int_0^1 b dt`` fixed, so every competitor still arrives.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space

from .costs import integrate
from .dynamics import propagate
from .geometry import DomainError
from .pulses import (
    DEFAULT_GRID_N,
    ConstructionError,
    ControlSchedule,
    Profile,
    effective_angle,
    pulse_b1,
    pulse_b2,
    pulse_b3,
    uniform_grid,
)

DEFAULT_SEED = 42
PENALTY_WEIGHT = 1e6
FLUENCE_TOL = 1e-9
RATE_TOL = 1e-8
MIXED_TOL = 1e-8


@dataclass(frozen=True)
class PerturbationBasis:
    """Zero-mean perturbation modes on ``[0, 1]``, orthonormal in L2.

    ``kind="fourier"``: ``sqrt(2) cos(2 pi j t)``, ``sqrt(2) sin(2 pi j t)``.
    ``kind="endpoint"``: combinations of ``sqrt(2) sin(k pi t)``,
    ``k = 1..K+1``, orthogonal to the constant function, so they also vanish
    at ``t = 0`` and ``t = 1``.

    ``amplitude_scale=None`` means ``0.3 |theta + 2 pi n|`` at use time.
    """

    kind: str = "fourier"
    k: int = 12
    amplitude_scale: float = None

    def __post_init__(self):
        if self.kind not in ("fourier", "endpoint"):
            raise ValueError(f"unknown basis kind {self.kind!r}")
        if self.k < 1:
            raise ValueError("need at least one mode")

    def amplitude(self, total):
        if self.amplitude_scale is None:
            return 0.3 * abs(total)
        return float(self.amplitude_scale)

    # --- fourier -------------------------------------------------------
    def _fourier_terms(self):
        return [(j // 2 + 1, "cos" if j % 2 == 0 else "sin") for j in range(self.k)]

    # --- endpoint ------------------------------------------------------
    @property
    def coefficients(self):
        """``(K, K+1)`` mixing matrix onto ``sqrt(2) sin(k pi t)``."""
        ks = np.arange(1, self.k + 2)
        means = math.sqrt(2.0) * (1.0 - np.cos(ks * math.pi)) / (ks * math.pi)
        return null_space(means[None, :]).T

    def _sines(self, t, order=0):
        ks = np.arange(1, self.k + 2)[:, None]
        w = ks * math.pi
        arg = w * np.asarray(t, dtype=float)[None, :]
        if order == -1:
            return math.sqrt(2.0) * (1.0 - np.cos(arg)) / w
        return math.sqrt(2.0) * w**order * np.sin(arg + order * math.pi / 2.0)

    def values(self, t, order=0):
        """Mode values (``order=0``), derivatives (``order>0``) or running
        integrals (``order=-1``); shape ``(K, len(t))``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self.kind == "endpoint":
            return self.coefficients @ self._sines(t, order)
        rows = []
        for j, kind in self._fourier_terms():
            w = 2.0 * math.pi * j
            if order == -1:
                if kind == "cos":
                    rows.append(math.sqrt(2.0) * np.sin(w * t) / w)
                else:
                    rows.append(math.sqrt(2.0) * (1.0 - np.cos(w * t)) / w)
                continue
            phase = 0.0 if kind == "sin" else math.pi / 2.0
            rows.append(math.sqrt(2.0) * w**order * np.sin(w * t + phase + order * math.pi / 2.0))
        return np.array(rows)

    def means(self):
        """Exact integrals of the modes over ``[0, 1]``."""
        return self.values(np.array([1.0]), order=-1)[:, 0]


@dataclass(frozen=True)
class ModalProfile(Profile):
    """``base(t) + sum_j c_j mode_j(t)``."""

    base: Profile
    basis: PerturbationBasis
    coeffs: tuple

    @property
    def total(self):
        return self.base.total

    def _mix(self, t, order):
        t = np.asarray(t, dtype=float)
        out = np.asarray(self.coeffs) @ self.basis.values(np.ravel(t), order)
        return out.reshape(t.shape)

    def value(self, t):
        return self.base.value(t) + self._mix(t, 0)

    def derivative(self, t, order=1):
        return self.base.derivative(t, order) + self._mix(t, order)

    def angle(self, t):
        return self.base.angle(t) + self._mix(t, -1)


@dataclass
class OracleVerdict:
    criterion: str
    base_cost: float
    min_perturbed_cost: float
    n_trials: int
    worst_violation: float
    tolerance: float
    seed: int
    certificate: list = field(default_factory=list)
    off_axis_trials: int = 0
    off_axis_worst_violation: float = float("-inf")

    @property
    def passed(self):
        return self.worst_violation <= self.tolerance and self.off_axis_worst_violation <= self.tolerance

    def as_dict(self):
        return {
            "criterion": self.criterion,
            "base_cost": self.base_cost,
            "min_perturbed_cost": self.min_perturbed_cost,
            "n_trials": self.n_trials,
            "worst_violation": self.worst_violation,
            "tolerance": self.tolerance,
            "seed": self.seed,
            "passed": self.passed,
            "off_axis_trials": self.off_axis_trials,
            "off_axis_worst_violation": self.off_axis_worst_violation,
            "certificate": [{"coefficients": list(c), "cost": v} for c, v in self.certificate],
        }


def criterion_cost(criterion, sq, dsq, h, a=1.0, omega=5.0):
    """Cost from squared field ``sq`` and squared rate ``dsq`` sampled along
    the last axis."""
    if criterion == "fluence":
        y = sq
    elif criterion == "rate":
        y = dsq
    elif criterion == "mixed":
        y = (sq + dsq / omega**2) / (2.0 * a)
    else:
        raise ValueError(f"unknown criterion {criterion!r}")
    return integrate(np.moveaxis(y, -1, 0), h)


def _sq(v):
    return np.sum(v * v, axis=-1)


def _canonical_pair(theta):
    s_i = np.array([0.0, 0.0, 1.0])
    s_f = np.array([math.sin(theta), 0.0, math.cos(theta)])
    return s_i, s_f, np.array([0.0, 1.0, 0.0])


def _off_axis_spot_check(criterion, base, basis, amp, rng, theta, trials, n, a, omega):
    """3-D perturbations scored by cost plus a terminal arrival penalty."""
    s_i, s_f, axis = _canonical_pair(theta)
    t = uniform_grid(n)
    h = 1.0 / n
    modes = basis.values(t)
    dmodes = basis.values(t, 1)
    base_vals = np.asarray(base.value(t))[:, None] * axis
    base_ders = np.asarray(base.derivative(t, 1))[:, None] * axis
    base_cost = float(criterion_cost(criterion, _sq(base_vals), _sq(base_ders), h, a, omega))
    worst = float("-inf")
    for _ in range(trials):
        c = rng.uniform(-amp, amp, size=(3, basis.k))
        vals = base_vals + (c @ modes).T
        ders = base_ders + (c @ dmodes).T
        cost = float(criterion_cost(criterion, _sq(vals), _sq(ders), h, a, omega))
        sched = ControlSchedule(t=t, b=vals)
        miss = propagate(s_i, sched, target=s_f).final_error
        worst = max(worst, base_cost - (cost + PENALTY_WEIGHT * miss**2))
    return worst


def _run(criterion, base, basis, n_trials, seed, tol, theta, n, a=1.0, omega=5.0, off_axis_trials=20):
    rng = np.random.default_rng(seed)
    amp = basis.amplitude(base.total)
    t = uniform_grid(n)
    h = 1.0 / n
    coeffs = rng.uniform(-amp, amp, size=(n_trials, basis.k))
    vals = np.asarray(base.value(t))[None, :] + coeffs @ basis.values(t)
    ders = np.asarray(base.derivative(t, 1))[None, :] + coeffs @ basis.values(t, 1)
    b0 = np.asarray(base.value(t))
    d0 = np.asarray(base.derivative(t, 1))
    base_cost = float(criterion_cost(criterion, b0**2, d0**2, h, a, omega))
    costs = criterion_cost(criterion, vals**2, ders**2, h, a, omega)
    worst = float(np.max(base_cost - costs))
    verdict = OracleVerdict(
        criterion=criterion,
        base_cost=base_cost,
        min_perturbed_cost=float(np.min(costs)),
        n_trials=n_trials,
        worst_violation=worst,
        tolerance=tol,
        seed=seed,
        certificate=[(tuple(float(x) for x in c), float(v)) for c, v in zip(coeffs, costs)],
    )
    if off_axis_trials:
        verdict.off_axis_trials = off_axis_trials
        verdict.off_axis_worst_violation = _off_axis_spot_check(
            criterion, base, basis, amp, rng, theta, off_axis_trials, n, a, omega
        )
    return verdict


def verify_fluence_minimum(theta, branch_n=0, basis=None, n_trials=1000, seed=DEFAULT_SEED, n=DEFAULT_GRID_N, off_axis_trials=20):
    """Random zero-mean perturbations of the constant pulse never lower the fluence."""
    basis = PerturbationBasis("fourier") if basis is None else basis
    return _run("fluence", pulse_b1(theta, branch_n), basis, n_trials, seed, FLUENCE_TOL, theta, n, off_axis_trials=off_axis_trials)


def verify_rate_minimum(theta, branch_n=0, basis=None, n_trials=1000, seed=DEFAULT_SEED, n=DEFAULT_GRID_N, off_axis_trials=20):
    """Endpoint-preserving perturbations of ``b2`` never lower the rate cost."""
    basis = PerturbationBasis("endpoint") if basis is None else basis
    if basis.kind != "endpoint":
        raise DomainError("rate oracle needs endpoint-vanishing modes")
    return _run("rate", pulse_b2(theta, branch_n), basis, n_trials, seed, RATE_TOL, theta, n, off_axis_trials=off_axis_trials)


def verify_mixed_minimum(theta, branch_n=0, a=1.0, omega=5.0, basis=None, n_trials=1000, seed=DEFAULT_SEED, n=DEFAULT_GRID_N, off_axis_trials=20):
    """Endpoint-preserving perturbations of ``b3`` never lower the mixed cost."""
    basis = PerturbationBasis("endpoint") if basis is None else basis
    if basis.kind != "endpoint":
        raise DomainError("mixed oracle needs endpoint-vanishing modes")
    return _run(
        "mixed", pulse_b3(theta, branch_n, omega), basis, n_trials, seed, MIXED_TOL, theta, n, a, omega, off_axis_trials
    )


def base_profile(criterion, theta, branch_n=0, omega=5.0):
    if criterion == "fluence":
        return pulse_b1(theta, branch_n)
    if criterion == "rate":
        return pulse_b2(theta, branch_n)
    if criterion == "mixed":
        return pulse_b3(theta, branch_n, omega)
    raise ValueError(f"unknown criterion {criterion!r}")


def profile_cost(criterion, profile, a=1.0, omega=5.0, n=DEFAULT_GRID_N):
    t = uniform_grid(n)
    b = np.asarray(profile.value(t))
    d = np.asarray(profile.derivative(t, 1))
    return float(criterion_cost(criterion, b**2, d**2, 1.0 / n, a, omega))


def quadratic_growth_exponent(criterion, theta, branch_n=0, a=1.0, omega=5.0, seed=DEFAULT_SEED, amplitudes=None):
    """Slope of ``log(cost - base)`` against ``log(amplitude)`` along a random direction.

    A strict local minimum gives 2.
    """
    basis = PerturbationBasis("fourier" if criterion == "fluence" else "endpoint")
    base = base_profile(criterion, theta, branch_n, omega)
    direction = np.random.default_rng(seed).standard_normal(basis.k)
    direction /= np.linalg.norm(direction)
    amplitudes = np.logspace(-3, -1, 7) if amplitudes is None else np.asarray(amplitudes)
    base_cost = profile_cost(criterion, base, a, omega)
    gains = [
        profile_cost(criterion, ModalProfile(base, basis, tuple(eps * direction)), a, omega) - base_cost
        for eps in amplitudes
    ]
    slope, _ = np.polyfit(np.log(amplitudes), np.log(gains), 1)
    return float(slope)


# --------------------------------------------------------------------------
# discrete re-derivation


def direct_discrete_minimizer(criterion, theta, branch_n=0, endpoint_zeros=None, grid_m=33, a=1.0, omega=5.0):
    """Minimize the discretized criterion over ``grid_m`` pulse samples.

    The cost is a quadratic form (trapezoid weights for ``int b^2``, forward
    differences for ``int b'^2``); the arrival constraint is the trapezoid
    ``int b = theta + 2 pi n``. Endpoint zeros default to on for the rate and
    mixed criteria. Solved through the KKT system.

    Returns
    -------
    t, b : ndarray
    """
    if grid_m > 64:
        raise DomainError(f"grid_m must be at most 64, got {grid_m}")
    if grid_m < 3:
        raise DomainError(f"grid_m must be at least 3, got {grid_m}")
    if endpoint_zeros is None:
        endpoint_zeros = criterion != "fluence"
    m = grid_m
    h = 1.0 / (m - 1)
    t = np.linspace(0.0, 1.0, m)
    w = np.full(m, h)
    w[[0, -1]] = h / 2.0
    D = (np.eye(m, k=1) - np.eye(m))[:-1]
    if criterion == "fluence":
        Q = np.diag(w)
    elif criterion == "rate":
        Q = D.T @ D / h
    elif criterion == "mixed":
        Q = (np.diag(w) + D.T @ D / (h * omega**2)) / (2.0 * a)
    else:
        raise ValueError(f"unknown criterion {criterion!r}")
    rows = [w]
    rhs = [effective_angle(theta, branch_n)]
    if endpoint_zeros:
        rows += [np.eye(m)[0], np.eye(m)[-1]]
        rhs += [0.0, 0.0]
    A = np.array(rows)
    if np.linalg.matrix_rank(A) < len(rows):
        raise ConstructionError("constraint rows are linearly dependent")
    k = len(rows)
    kkt = np.block([[2.0 * Q, A.T], [A, np.zeros((k, k))]])
    rhs_vec = np.concatenate([np.zeros(m), rhs])
    if np.linalg.cond(kkt) > 1e14:
        raise ConstructionError("KKT system is singular")
    sol = np.linalg.solve(kkt, rhs_vec)
    return t, sol[:m]
