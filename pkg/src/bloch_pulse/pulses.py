"""Analytic optimal control fields and their trajectories.

Every optimal field found for the fixed-time transfer ``s_i -> s_f`` points
along the fixed axis ``s_perp = normalize(s_i x s_f)`` and differs only in its
scalar profile ``b(t)`` on ``[0, 1]``:

* ``B1``  constant, minimum fluence
* ``B2``  parabolic, minimum rate of change with vanishing end values
* ``B3``  cosh-shaped, mixed fluence/rate criterion
* ``CN``  constant-norm field obtained by adding a component along ``s``

The profile must integrate to ``theta + 2 pi n`` so that the Bloch vector
arrives at ``s_f`` after ``n`` extra turns.
"""

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    DEGENERACY_TOL,
    DegenerateGeometryError,
    DomainError,
    angle_between,
    as_vector,
    cross,
    perpendicular_axis,
    require_unit,
    rotate,
)

DEFAULT_GRID_N = 2000


class ConstructionError(ValueError):
    """Raised when a pulse cannot be built for the requested parameters."""


class Family(str, enum.Enum):
    B1 = "b1"
    B2 = "b2"
    B3 = "b3"
    CN = "cn"
    CUSTOM = "custom"


@dataclass(frozen=True)
class PulseSpec:
    """Declarative description of one member of a pulse family.

    Parameters that do not apply to ``family`` are kept but ignored.
    """

    family: Family
    theta: float
    axis: tuple
    branch_n: int = 0
    a: float = 1.0
    omega: float = 5.0
    mu: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "axis", tuple(float(x) for x in require_unit(self.axis, "axis", 1e-9)))
        if not (0.0 <= self.theta <= math.pi + 1e-12):
            raise DomainError(f"theta must lie in [0, pi], got {self.theta!r}")
        if self.a <= 0:
            raise DomainError(f"fluence weight a must be positive, got {self.a!r}")
        if self.family is Family.B3 and not self.omega > 0:
            raise DomainError(f"omega must be positive for B3, got {self.omega!r}")

    @property
    def total_angle(self):
        return effective_angle(self.theta, self.branch_n)

    def to_dict(self):
        return {
            "family": self.family.value,
            "theta": self.theta,
            "axis": list(self.axis),
            "branch_n": self.branch_n,
            "a": self.a,
            "omega": self.omega,
            "mu": self.mu,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            family=d["family"],
            theta=float(d["theta"]),
            axis=tuple(d["axis"]),
            branch_n=int(d["branch_n"]),
            a=float(d["a"]),
            omega=float(d["omega"]),
            mu=float(d["mu"]),
        )


def effective_angle(theta, branch_n):
    """Total rotation angle ``theta + 2 pi n`` of winding branch ``n``."""
    if not (0.0 <= theta <= math.pi + 1e-12):
        raise DomainError(f"theta must lie in [0, pi], got {theta!r}")
    return theta + 2.0 * math.pi * branch_n


# --------------------------------------------------------------------------
# scalar profiles


class Profile:
    """Scalar control profile ``b(t)`` on ``[0, 1]`` with closed-form calculus.

    Subclasses provide ``value``, ``derivative`` (orders 1-3) and ``angle``,
    the accumulated angle ``Phi(t) = int_0^t b``.
    """

    def __call__(self, t):
        return self.value(t)

    def value(self, t):
        raise NotImplementedError

    def derivative(self, t, order=1):
        raise NotImplementedError

    def angle(self, t):
        raise NotImplementedError


def _full(t, c):
    return np.full(np.shape(t), c, dtype=float)


@dataclass(frozen=True)
class ConstantProfile(Profile):
    total: float

    def value(self, t):
        return _full(t, self.total)

    def derivative(self, t, order=1):
        return _full(t, 0.0)

    def angle(self, t):
        return self.total * np.asarray(t, dtype=float)


@dataclass(frozen=True)
class ParabolicProfile(Profile):
    total: float

    def value(self, t):
        t = np.asarray(t, dtype=float)
        return 6.0 * self.total * t * (1.0 - t)

    def derivative(self, t, order=1):
        t = np.asarray(t, dtype=float)
        if order == 1:
            return 6.0 * self.total * (1.0 - 2.0 * t)
        if order == 2:
            return _full(t, -12.0 * self.total)
        return _full(t, 0.0)

    def angle(self, t):
        t = np.asarray(t, dtype=float)
        return self.total * t * t * (3.0 - 2.0 * t)


def _one_minus_tanhc(x):
    """``1 - tanh(x)/x`` without cancellation for small ``x``."""
    if x < 0.1:
        x2 = x * x
        return x2 * (1 / 3 - x2 * (2 / 15 - x2 * (17 / 315 - x2 * (62 / 2835 - x2 * 1382 / 155925))))
    return 1.0 - math.tanh(x) / x


@dataclass(frozen=True)
class CoshProfile(Profile):
    """``b3``: minimizer of fluence plus ``1/omega^2`` times rate cost."""

    total: float
    omega: float

    def __post_init__(self):
        if not (self.omega > 0 and math.isfinite(self.omega)):
            raise DomainError(f"omega must be positive and finite, got {self.omega!r}")

    @property
    def scale(self):
        return self.total / _one_minus_tanhc(self.omega / 2.0)

    def _ratio(self, t):
        # cosh(w u) / cosh(w/2) with u = t - 1/2, overflow-free
        w = self.omega
        u = np.abs(np.asarray(t, dtype=float) - 0.5)
        return (np.exp(w * (u - 0.5)) + np.exp(-w * (u + 0.5))) / (1.0 + math.exp(-w))

    def _gap(self, t):
        # 1 - cosh(w u) / cosh(w/2)
        t = np.asarray(t, dtype=float)
        w = self.omega
        if w <= 50.0:
            return 2.0 * np.sinh(w * t / 2.0) * np.sinh(w * (1.0 - t) / 2.0) / math.cosh(w / 2.0)
        return 1.0 - self._ratio(t)

    def value(self, t):
        return self.scale * self._gap(t)

    def derivative(self, t, order=1):
        t = np.asarray(t, dtype=float)
        w = self.omega
        u = t - 0.5
        if order % 2 == 1:
            # sinh(w u) / cosh(w/2)
            au = np.abs(u)
            odd = np.sign(u) * (np.exp(w * (au - 0.5)) - np.exp(-w * (au + 0.5))) / (1.0 + math.exp(-w))
            return -self.scale * w**order * odd
        return -self.scale * w**order * self._ratio(t)

    def angle(self, t):
        t = np.asarray(t, dtype=float)
        w = self.omega
        u = t - 0.5
        if w < 1.0:
            # t cosh(w/2) - (sinh(w u) + sinh(w/2)) / w, order-zero terms cancel
            acc = np.zeros_like(t)
            for k in range(1, 12):
                acc = acc + w ** (2 * k) * (
                    t * 0.5 ** (2 * k) / math.factorial(2 * k)
                    - (u ** (2 * k + 1) + 0.5 ** (2 * k + 1)) / math.factorial(2 * k + 1)
                )
            bracket = acc / math.cosh(w / 2.0)
        else:
            au = np.abs(u)
            sinh_ratio = np.sign(u) * (np.exp(w * (au - 0.5)) - np.exp(-w * (au + 0.5))) / (1.0 + math.exp(-w))
            bracket = t - (sinh_ratio + math.tanh(w / 2.0)) / w
        return self.scale * bracket


@dataclass(frozen=True)
class SineProfile(Profile):
    """Half-sine competitor ``(pi Theta / 2) sin(pi t)`` with the same area."""

    total: float

    def value(self, t):
        return 0.5 * math.pi * self.total * np.sin(math.pi * np.asarray(t, dtype=float))

    def derivative(self, t, order=1):
        t = np.asarray(t, dtype=float)
        amp = 0.5 * math.pi * self.total * math.pi**order
        phase = math.pi * t + order * math.pi / 2.0
        return amp * np.sin(phase)

    def angle(self, t):
        return 0.5 * self.total * (1.0 - np.cos(math.pi * np.asarray(t, dtype=float)))


@dataclass(frozen=True)
class TrapezoidProfile(Profile):
    """Constant pulse with linear on/off ramps of width ``ramp``.

    Continuous stand-in for ``B1`` when the rate cost must stay finite.
    """

    total: float
    ramp: float = 0.05

    def __post_init__(self):
        if not (0.0 < self.ramp <= 0.5):
            raise DomainError(f"ramp must lie in (0, 1/2], got {self.ramp!r}")

    @property
    def height(self):
        return self.total / (1.0 - self.ramp)

    def value(self, t):
        t = np.asarray(t, dtype=float)
        w = self.ramp
        return self.height * np.clip(np.minimum(t, 1.0 - t) / w, 0.0, 1.0)

    def derivative(self, t, order=1):
        t = np.asarray(t, dtype=float)
        if order > 1:
            return np.zeros_like(t)
        w = self.ramp
        slope = self.height / w
        return np.where(t < w, slope, np.where(t > 1.0 - w, -slope, 0.0))

    def angle(self, t):
        t = np.asarray(t, dtype=float)
        w, hgt = self.ramp, self.height
        head = 0.5 * hgt * np.minimum(t, w) ** 2 / w
        mid = hgt * np.clip(t - w, 0.0, 1.0 - 2.0 * w)
        tail_t = np.clip(t - (1.0 - w), 0.0, w)
        tail = hgt * tail_t - 0.5 * hgt * tail_t**2 / w
        return head + mid + tail


def pulse_b1(theta, branch_n=0):
    return ConstantProfile(effective_angle(theta, branch_n))


def pulse_b2(theta, branch_n=0):
    return ParabolicProfile(effective_angle(theta, branch_n))


def pulse_b3(theta, branch_n=0, omega=5.0):
    if not omega > 0:
        raise DomainError(f"omega must be positive, got {omega!r}")
    return CoshProfile(effective_angle(theta, branch_n), float(omega))


def pulse_sine(theta, branch_n=0):
    return SineProfile(effective_angle(theta, branch_n))


# --------------------------------------------------------------------------
# vector fields, schedules, trajectories


@dataclass(frozen=True)
class AxisField:
    """Vector field ``profile(t) * axis``."""

    profile: Profile
    axis: np.ndarray

    def __call__(self, t):
        return np.asarray(self.profile.value(t))[..., None] * self.axis

    def derivative(self, t, order=1):
        return np.asarray(self.profile.derivative(t, order))[..., None] * self.axis


def uniform_grid(n):
    if n < 2:
        raise DomainError(f"grid needs at least 2 intervals, got {n}")
    return np.linspace(0.0, 1.0, n + 1)


@dataclass
class ControlSchedule:
    """Control field sampled on a uniform grid of ``N + 1`` points on ``[0, 1]``.

    ``field`` optionally keeps the closed-form evaluator the samples came
    from, so integrators and cost routines can avoid interpolation.
    """

    t: np.ndarray
    b: np.ndarray
    field: object = None
    spec: PulseSpec = None

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        n = len(self.t) - 1
        if n < 2:
            raise DomainError(f"schedule needs N >= 2 intervals, got {n}")
        if self.b.shape != (n + 1, 3):
            raise DomainError(f"b must have shape {(n + 1, 3)}, got {self.b.shape}")
        if not np.all(np.isfinite(self.b)):
            raise DomainError("control samples must be finite")
        if not np.all(np.diff(self.t) > 0):
            raise DomainError("schedule times must be strictly increasing")
        if abs(self.t[0]) > 1e-12 or abs(self.t[-1] - 1.0) > 1e-12:
            raise DomainError("schedule must span [0, 1]")
        if not np.allclose(np.diff(self.t), 1.0 / n, rtol=1e-6, atol=1e-12):
            raise DomainError("schedule grid must be uniform")

    @property
    def n(self):
        return len(self.t) - 1

    @property
    def h(self):
        return 1.0 / self.n


def sample_schedule(field_fn, n=DEFAULT_GRID_N, spec=None):
    """Sample a closed-form field on a uniform grid; odd ``n`` is bumped to even."""
    n = int(n)
    if n % 2:
        n += 1
    t = uniform_grid(n)
    return ControlSchedule(t=t, b=field_fn(t), field=field_fn, spec=spec)


@dataclass
class Trajectory:
    t: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.s = np.asarray(self.s, dtype=float)
        if self.s.shape != (len(self.t), 3):
            raise DomainError(f"s must have shape {(len(self.t), 3)}, got {self.s.shape}")

    @property
    def final(self):
        return self.s[-1]


def trajectory_closed_form(s_i, s_f, angle_fn, t=None):
    """Bloch vector in the plane of ``s_i``, ``s_f`` for a perpendicular field.

    ``s(t) = [sin(theta - Phi(t)) s_i + sin(Phi(t)) s_f] / sin(theta)`` with
    ``Phi`` the accumulated angle. Raises :class:`DegenerateGeometryError`
    when ``s_i`` and ``s_f`` are (anti)parallel; use :func:`rotate` then.
    """
    s_i = require_unit(s_i, "s_i", 1e-9)
    s_f = require_unit(s_f, "s_f", 1e-9)
    t = uniform_grid(DEFAULT_GRID_N) if t is None else np.asarray(t, dtype=float)
    sin_theta = np.linalg.norm(cross(s_i, s_f))
    if sin_theta <= DEGENERACY_TOL:
        raise DegenerateGeometryError("s_i and s_f are (anti)parallel; closed form undefined")
    theta = angle_between(s_i, s_f)
    if abs(float(angle_fn(np.array(0.0)))) > 1e-12:
        raise DomainError("accumulated angle must vanish at t = 0")
    mismatch = float(angle_fn(np.array(1.0))) - theta
    if abs(math.remainder(mismatch, 2.0 * math.pi)) > 1e-8:
        raise DomainError(f"accumulated angle at t = 1 misses theta by {mismatch!r} (mod 2 pi)")
    phi = np.asarray(angle_fn(t), dtype=float)
    s = (np.sin(theta - phi)[:, None] * s_i + np.sin(phi)[:, None] * s_f) / sin_theta
    return Trajectory(t=t, s=s)


# --------------------------------------------------------------------------
# constant-norm family


@dataclass(frozen=True)
class ConstantNormField:
    """Constant-magnitude field ``b + f s`` sharing the geometry of ``B1``.

    With ``s(t) = cos(phi) s0(t) + sin(phi) s_perp``, ``phi = theta mu t (1-t)``
    and ``s0`` the minimum-fluence trajectory, the base field
    ``theta cos^2(phi) s_perp - phi' s_tau - theta sin(phi) cos(phi) s0``
    is topped up along ``s`` by ``f = +sqrt(B^2 - theta^2 cos^2(phi) - phi'^2)``
    with ``B^2 = theta^2 (1 + mu^2)``.
    """

    s_i: np.ndarray
    axis: np.ndarray
    theta: float
    mu: float

    @property
    def magnitude(self):
        return self.theta * math.sqrt(1.0 + self.mu**2)

    def phi(self, t):
        t = np.asarray(t, dtype=float)
        return self.theta * self.mu * t * (1.0 - t)

    def phi_dot(self, t):
        return self.theta * self.mu * (1.0 - 2.0 * np.asarray(t, dtype=float))

    def radicand(self, t):
        return self.magnitude**2 - (self.theta * np.cos(self.phi(t))) ** 2 - self.phi_dot(t) ** 2

    def f(self, t):
        r = np.asarray(self.radicand(t), dtype=float)
        floor = -1e-12 * max(self.magnitude**2, 1.0)
        bad = r < floor
        if np.any(bad):
            t_bad = np.broadcast_to(np.asarray(t, dtype=float), r.shape)[bad]
            raise ConstructionError(f"negative radicand for f at t = {float(t_bad.flat[0])!r}")
        return np.sqrt(np.maximum(r, 0.0))

    def frame(self, t):
        """Triad ``(s0, s_tau)`` of the moving minimum-fluence frame."""
        s0 = rotate(self.s_i, self.axis, self.theta * np.asarray(t, dtype=float))
        return s0, cross(self.axis, s0)

    def state(self, t):
        phi = self.phi(t)
        s0, _ = self.frame(t)
        return np.cos(phi)[..., None] * s0 + np.sin(phi)[..., None] * self.axis

    def base(self, t):
        phi = self.phi(t)
        c, sn = np.cos(phi)[..., None], np.sin(phi)[..., None]
        s0, s_tau = self.frame(t)
        return (
            self.theta * c**2 * self.axis
            - self.phi_dot(t)[..., None] * s_tau
            - self.theta * sn * c * s0
        )

    def __call__(self, t):
        return self.base(t) + self.f(t)[..., None] * self.state(t)


def pulse_constant_norm(s_i, s_f, mu, n=DEFAULT_GRID_N):
    """Build the constant-norm field and its trajectory on an ``n``-interval grid.

    Returns
    -------
    schedule : ControlSchedule
    trajectory : Trajectory
    """
    s_i = require_unit(s_i, "s_i", 1e-9)
    s_f = require_unit(s_f, "s_f", 1e-9)
    axis, _ = perpendicular_axis(s_i, s_f)
    theta = angle_between(s_i, s_f)
    fld = ConstantNormField(s_i=s_i, axis=axis, theta=theta, mu=float(mu))
    n = int(n) + int(n) % 2
    # guard against negativity between samples
    fld.f(uniform_grid(10 * n))
    spec = PulseSpec(Family.CN, theta, tuple(axis), 0, mu=float(mu))
    schedule = sample_schedule(fld, n, spec=spec)
    return schedule, Trajectory(t=schedule.t, s=fld.state(schedule.t))


# --------------------------------------------------------------------------
# synthesis front end


@dataclass
class Pulse:
    """A synthesized control for a concrete transfer ``s_i -> s_f``."""

    spec: PulseSpec
    s_i: np.ndarray
    s_f: np.ndarray
    field: object
    profile: Profile = None
    warnings: list = field(default_factory=list)

    @property
    def axis(self):
        return np.asarray(self.spec.axis)

    @property
    def degenerate(self):
        return np.linalg.norm(cross(self.s_i, self.s_f)) <= DEGENERACY_TOL

    def schedule(self, n=DEFAULT_GRID_N):
        return sample_schedule(self.field, n, spec=self.spec)

    def trajectory(self, n=DEFAULT_GRID_N):
        n = int(n) + int(n) % 2
        t = uniform_grid(n)
        if self.spec.family is Family.CN:
            return Trajectory(t=t, s=self.field.state(t))
        if self.degenerate:
            return Trajectory(t=t, s=rotate(self.s_i, self.axis, self.profile.angle(t)))
        return trajectory_closed_form(self.s_i, self.s_f, self.profile.angle, t)


def synthesize(s_i, s_f, family, branch_n=0, a=1.0, omega=5.0, mu=0.0):
    """Build the optimal pulse of ``family`` carrying ``s_i`` to ``s_f``."""
    s_i = require_unit(s_i, "s_i", 1e-9)
    s_f = require_unit(s_f, "s_f", 1e-9)
    family = Family(family)
    axis, degenerate = perpendicular_axis(s_i, s_f)
    theta = angle_between(s_i, s_f)
    warnings = []
    if degenerate:
        warnings.append(
            "s_i and s_f are (anti)parallel; using fallback axis "
            f"({axis[0]:.17g}, {axis[1]:.17g}, {axis[2]:.17g})"
        )
    spec = PulseSpec(family, theta, tuple(axis), int(branch_n), a=a, omega=omega, mu=mu)
    if family is Family.CN:
        if branch_n != 0:
            raise ConstructionError("the constant-norm family is defined for branch n = 0 only")
        fld = ConstantNormField(s_i=s_i, axis=axis, theta=theta, mu=float(mu))
        fld.f(uniform_grid(10 * DEFAULT_GRID_N))
        return Pulse(spec, s_i, s_f, fld, None, warnings)
    if family is Family.B1:
        profile = pulse_b1(theta, branch_n)
    elif family is Family.B2:
        profile = pulse_b2(theta, branch_n)
    elif family is Family.B3:
        profile = pulse_b3(theta, branch_n, omega)
    else:
        raise ConstructionError(f"cannot synthesize family {family.value!r}")
    return Pulse(spec, s_i, s_f, AxisField(profile, axis), profile, warnings)


def profile_for(spec):
    """Scalar profile described by a perpendicular-axis ``spec`` (or None)."""
    if spec.family is Family.B1:
        return pulse_b1(spec.theta, spec.branch_n)
    if spec.family is Family.B2:
        return pulse_b2(spec.theta, spec.branch_n)
    if spec.family is Family.B3:
        return pulse_b3(spec.theta, spec.branch_n, spec.omega)
    return None


def field_for(spec, s_i=None):
    """Closed-form field evaluator for ``spec``; CN needs ``s_i``."""
    axis = np.asarray(spec.axis)
    if spec.family is Family.CN:
        if s_i is None:
            return None
        return ConstantNormField(s_i=as_vector(s_i), axis=axis, theta=spec.theta, mu=spec.mu)
    profile = profile_for(spec)
    return None if profile is None else AxisField(profile, axis)
