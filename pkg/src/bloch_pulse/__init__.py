"""Optimal control fields that rotate a Bloch vector between two states in unit time."""

__version__ = "0.1.0"

from .geometry import angle_between, cross, perpendicular_axis, rotate
from .pulses import (
    ControlSchedule,
    Family,
    PulseSpec,
    Trajectory,
    effective_angle,
    pulse_b1,
    pulse_b2,
    pulse_b3,
    pulse_constant_norm,
    synthesize,
    trajectory_closed_form,
)
from .dynamics import closed_form_el, control_ode_residual, invert_bloch, propagate, propagate_el
from .costs import cost_report, fluence, geometric_cost, mixed_cost, path_length, rate_cost
