"""Cost functionals and path geometry of control schedules.

``fluence`` and ``rate_cost`` are the bare integrals of ``|b|^2`` and
``|b'|^2``; ``mixed_cost`` carries its ``1/(2a)`` prefactor.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import IntegrationWarning, quad, simpson
from scipy.optimize import brentq

from .dynamics import control_derivatives, propagate
from .geometry import DomainError
from .pulses import DEFAULT_GRID_N, Family, Profile, uniform_grid

PERPENDICULAR_FAMILIES = (Family.B1, Family.B2, Family.B3)


def integrate(y, h):
    """Composite Simpson rule along axis 0 on a uniform grid of spacing ``h``."""
    return simpson(y, dx=h, axis=0)


def _samples(x, n):
    """``(t, b)`` for a schedule, or a profile sampled on ``n`` intervals."""
    if isinstance(x, Profile):
        n = n + n % 2
        t = uniform_grid(n)
        return t, np.asarray(x.value(t))[:, None]
    return x.t, x.b


def _rate_samples(x, n):
    if isinstance(x, Profile):
        n = n + n % 2
        t = uniform_grid(n)
        return t, np.asarray(x.derivative(t, 1))[:, None]
    return x.t, control_derivatives(x, 1)


def fluence(x, n=DEFAULT_GRID_N):
    """``int_0^1 |b|^2 dt`` for a schedule or a scalar profile."""
    t, b = _samples(x, n)
    return float(integrate(np.einsum("ij,ij->i", b, b), t[1] - t[0]))


def rate_cost(x, n=DEFAULT_GRID_N):
    """``int_0^1 |db/dt|^2 dt`` over the open interval.

    Jumps of the field at ``t = 0`` or ``t = 1`` are not counted; see
    :func:`endpoint_jump`.
    """
    t, bd = _rate_samples(x, n)
    return float(integrate(np.einsum("ij,ij->i", bd, bd), t[1] - t[0]))


def mixed_cost(x, a, omega, n=DEFAULT_GRID_N):
    """``(1/2a) int (|b|^2 + |b'|^2 / omega^2) dt``."""
    if not (a > 0 and omega > 0):
        raise DomainError(f"a and omega must be positive, got a={a!r}, omega={omega!r}")
    return (fluence(x, n) + rate_cost(x, n) / omega**2) / (2.0 * a)


def endpoint_jump(x, tol=1e-12):
    """True if the field switches on or off discontinuously at ``t = 0, 1``."""
    _, b = _samples(x, 2)
    return bool(np.linalg.norm(b[0]) > tol or np.linalg.norm(b[-1]) > tol)


def geometric_cost(profile, a, omega, epsrel=1e-10):
    """Mixed cost written over the accumulated angle ``phi`` instead of time.

    ``(1/2a) int_0^Phi(1) b(phi) (1 + (db/dphi / omega)^2) dphi`` with
    ``t(phi)`` found by root bracketing. Requires ``b`` of one sign on
    ``(0, 1)``; negative profiles are mirrored, which leaves the cost unchanged.
    """
    if not (a > 0 and omega > 0):
        raise DomainError(f"a and omega must be positive, got a={a!r}, omega={omega!r}")
    probe = np.asarray(profile.value(uniform_grid(4000)[1:-1]))
    scale = max(float(np.max(np.abs(probe))), 1e-300)
    if np.any(probe > 1e-12 * scale) and np.any(probe < -1e-12 * scale):
        raise DomainError("accumulated angle is not monotone; geometric form undefined")
    if not np.any(np.abs(probe) > 1e-12 * scale):
        return 0.0
    sign = 1.0 if np.sum(probe) > 0 else -1.0
    total = sign * float(profile.angle(np.array(1.0)))

    def t_of_phi(phi):
        if phi <= 0.0:
            return 0.0
        if phi >= total:
            return 1.0
        return brentq(lambda t: sign * float(profile.angle(np.array(t))) - phi, 0.0, 1.0, xtol=1e-15, rtol=1e-15)

    def integrand(phi):
        t = np.array(t_of_phi(phi))
        b = sign * float(profile.value(t))
        if b <= 0.0:
            return 0.0
        db_dphi = sign * float(profile.derivative(t, 1)) / b
        return b * (1.0 + (db_dphi / omega) ** 2)

    mid = 0.5 * total
    with warnings.catch_warnings():
        # the 1/sqrt(phi) end singularities of endpoint-vanishing pulses make
        # QUADPACK pessimistic about its own error estimate
        warnings.simplefilter("ignore", IntegrationWarning)
        left = quad(integrand, 0.0, mid, epsabs=0.0, epsrel=epsrel, limit=400)[0]
        right = quad(integrand, mid, total, epsabs=0.0, epsrel=epsrel, limit=400)[0]
    return (left + right) / (2.0 * a)


def path_length(trajectory):
    """Polyline length traced by the tip of the Bloch vector."""
    return float(np.sum(np.linalg.norm(np.diff(trajectory.s, axis=0), axis=1)))


def magnitude_integral(schedule):
    """``int_0^1 |b| dt``, the bound on the path length."""
    return float(integrate(np.linalg.norm(schedule.b, axis=1), schedule.h))


@dataclass
class CostReport:
    fluence: float
    rate_cost: float
    mixed_cost: float
    path_length: float
    accumulated_angle: float
    mean_magnitude: float
    endpoint_jump: bool
    a: float
    omega: float

    def as_dict(self):
        return dict(self.__dict__)


def cost_report(schedule, s0=None, a=1.0, omega=5.0, trajectory=None):
    """All cost figures for ``schedule``.

    The trajectory for the path length is propagated from ``s0`` unless given.
    ``accumulated_angle`` is the signed ``int b . s_perp dt`` for
    perpendicular-axis families and the swept arc otherwise.
    """
    if trajectory is None:
        if s0 is None:
            raise ValueError("need s0 or trajectory for the path length")
        trajectory = propagate(s0, schedule).trajectory
    length = path_length(trajectory)
    spec = schedule.spec
    if spec is not None and spec.family in PERPENDICULAR_FAMILIES:
        angle = float(integrate(schedule.b @ np.asarray(spec.axis), schedule.h))
    else:
        angle = length
    return CostReport(
        fluence=fluence(schedule),
        rate_cost=rate_cost(schedule),
        mixed_cost=mixed_cost(schedule, a, omega),
        path_length=length,
        accumulated_angle=angle,
        mean_magnitude=magnitude_integral(schedule),
        endpoint_jump=endpoint_jump(schedule),
        a=float(a),
        omega=float(omega),
    )


SINE_TO_PARABOLIC_RATE = math.pi**4 / 96.0
