"""Command-line front end: ``synth``, ``simulate``, ``verify``, ``compare``.

Exit codes: 0 success, 1 accuracy or verification failure, 2 usage error.
"""

import argparse
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .costs import (
    SINE_TO_PARABOLIC_RATE,
    cost_report,
    endpoint_jump,
    fluence,
    mixed_cost,
    rate_cost,
)
from .dynamics import propagate
from .formats import PULSE_HEADER, TRAJECTORY_HEADER, SchemaError, dumps, encode, loads
from .geometry import DomainError, angle_between
from .oracle import DEFAULT_SEED, verify_fluence_minimum, verify_mixed_minimum, verify_rate_minimum
from .pulses import (
    AxisField,
    ConstructionError,
    ControlSchedule,
    Family,
    PulseSpec,
    field_for,
    pulse_sine,
    sample_schedule,
    synthesize,
)

SEED_ENV = "BLOCH_PULSE_SEED"
ARRIVAL_TOL = 1e-5
FIELD_MATCH_TOL = 1e-9


class UsageError(Exception):
    pass


def parse_vector(text, name="vector", warnings=None):
    """Parse ``"x,y,z"``; normalize (with a warning) if off-unit by more than 1e-6."""
    parts = text.split(",")
    if len(parts) != 3:
        raise UsageError(f"{name} needs three comma-separated components, got {text!r}")
    try:
        v = np.array([float(p) for p in parts])
    except ValueError:
        raise UsageError(f"{name} has a non-numeric component: {text!r}") from None
    if not np.all(np.isfinite(v)):
        raise UsageError(f"{name} has a non-finite component: {text!r}")
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise UsageError(f"{name} must be nonzero")
    if abs(norm - 1.0) > 1e-6:
        msg = f"{name} had norm {norm:.17g}; normalized"
        if warnings is not None:
            warnings.append(msg)
        print(f"warning: {msg}", file=sys.stderr)
    return v / norm


def default_seed():
    env = os.environ.get(SEED_ENV)
    if env is None:
        return DEFAULT_SEED
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None


@dataclass
class RunConfig:
    s_i: np.ndarray
    s_f: np.ndarray
    family: str = "b1"
    branch_n: int = 0
    a: float = 1.0
    omega: float = 5.0
    mu: float = 1.0
    grid_n: int = 2000
    seed: int = DEFAULT_SEED
    output_format: str = "json"
    output_path: str = None
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        if self.grid_n < 100:
            raise UsageError(f"grid_n must be at least 100, got {self.grid_n}")
        if self.a <= 0 or self.omega <= 0:
            raise UsageError("a and omega must be positive")


def _config(args):
    warnings = []
    s_i = parse_vector(args.si, "s_i", warnings)
    s_f = parse_vector(args.sf, "s_f", warnings)
    seed = args.seed if getattr(args, "seed", None) is not None else default_seed()
    return RunConfig(
        s_i=s_i,
        s_f=s_f,
        family=getattr(args, "family", "b1"),
        branch_n=args.n,
        a=args.a,
        omega=args.omega,
        mu=getattr(args, "mu", 1.0),
        grid_n=args.grid_n,
        seed=seed,
        output_format=getattr(args, "format", "json"),
        output_path=args.output,
        warnings=warnings,
    )


def _emit(text, path):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _report(line, path):
    # keep stdout clean when the data itself goes there
    print(line, file=sys.stderr if path in (None, "-") else sys.stdout)


# --------------------------------------------------------------------------
# synth


def synth_document(cfg):
    """Synthesize the pulse described by ``cfg``; returns ``(meta, schedule)``."""
    pulse = synthesize(cfg.s_i, cfg.s_f, cfg.family, cfg.branch_n, cfg.a, cfg.omega, cfg.mu)
    schedule = pulse.schedule(cfg.grid_n)
    report = cost_report(schedule, a=cfg.a, omega=cfg.omega, trajectory=pulse.trajectory(schedule.n))
    meta = {
        "kind": "pulse",
        "spec": pulse.spec.to_dict(),
        "version": __version__,
        "seed": cfg.seed,
        "warnings": cfg.warnings + pulse.warnings,
        "s_i": cfg.s_i,
        "s_f": cfg.s_f,
        "grid_n": schedule.n,
        "costs": report.as_dict(),
        "integral_along_axis": report.accumulated_angle if pulse.profile is not None else None,
        "target_angle": pulse.spec.total_angle,
    }
    return meta, schedule


def cmd_synth(args):
    cfg = _config(args)
    meta, schedule = synth_document(cfg)
    _emit(dumps(cfg.output_format, meta, PULSE_HEADER, schedule.t, schedule.b), cfg.output_path)
    for w in meta["warnings"]:
        print(f"warning: {w}", file=sys.stderr)
    return 0


# --------------------------------------------------------------------------
# simulate


def load_schedule(text):
    """Rebuild a schedule from a pulse file.

    When the file names an analytic family and its samples match that family's
    closed form, the closed-form evaluator is reattached.
    """
    meta, t, b = loads(text, PULSE_HEADER)
    try:
        schedule = ControlSchedule(t=t, b=b)
    except DomainError as exc:
        raise SchemaError(str(exc)) from None
    spec_d = meta.get("spec")
    if isinstance(spec_d, dict):
        try:
            spec = PulseSpec.from_dict(spec_d)
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad spec block: {exc}") from None
        fld = field_for(spec, meta.get("s_i"))
        if fld is not None and np.max(np.abs(fld(t) - b)) <= FIELD_MATCH_TOL * max(1.0, np.max(np.abs(b))):
            schedule.field = fld
            schedule.spec = spec
    return meta, schedule


def cmd_simulate(args):
    try:
        with open(args.pulse, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read pulse file: {exc}") from None
    meta, schedule = load_schedule(text)
    warnings = []
    if args.si is not None:
        s_i = parse_vector(args.si, "s_i", warnings)
    elif "s_i" in meta:
        s_i = np.asarray(meta["s_i"], dtype=float)
    else:
        raise UsageError("pulse file has no s_i; pass --si")
    if args.sf is not None:
        s_f = parse_vector(args.sf, "s_f", warnings)
    elif "s_f" in meta:
        s_f = np.asarray(meta["s_f"], dtype=float)
    else:
        raise UsageError("pulse file has no s_f; pass --sf")
    result = propagate(s_i, schedule, target=s_f)
    out_meta = {
        "kind": "trajectory",
        "spec": meta.get("spec"),
        "version": __version__,
        "seed": meta.get("seed"),
        "warnings": list(meta.get("warnings", [])) + warnings,
        "s_i": s_i,
        "s_f": s_f,
        "final_state": result.final_state,
        "final_error": result.final_error,
        "norm_drift": result.norm_drift,
        "closed_form_field": schedule.field is not None,
    }
    traj = result.trajectory
    _emit(dumps(args.format, out_meta, TRAJECTORY_HEADER, traj.t, traj.s), args.output)
    _report(f"final_error={result.final_error:.17g} norm_drift={result.norm_drift:.17g}", args.output)
    return 0 if result.final_error <= ARRIVAL_TOL else 1


# --------------------------------------------------------------------------
# verify


def run_verify(cfg, criterion, n_trials, off_axis_trials=20):
    theta = angle_between(cfg.s_i, cfg.s_f)
    if not (1e-9 < theta < math.pi - 1e-9):
        raise UsageError("verify needs s_i and s_f neither parallel nor antipodal")
    common = dict(n_trials=n_trials, seed=cfg.seed, n=cfg.grid_n, off_axis_trials=off_axis_trials)
    if criterion == "fluence":
        return verify_fluence_minimum(theta, cfg.branch_n, **common)
    if criterion == "rate":
        return verify_rate_minimum(theta, cfg.branch_n, **common)
    return verify_mixed_minimum(theta, cfg.branch_n, cfg.a, cfg.omega, **common)


def cmd_verify(args):
    cfg = _config(args)
    if args.trials < 1:
        raise UsageError("--trials must be positive")
    verdict = run_verify(cfg, args.criterion, args.trials, args.off_axis_trials)
    doc = {
        "meta": {
            "kind": "verdict",
            "spec": {"criterion": args.criterion, "theta": angle_between(cfg.s_i, cfg.s_f),
                     "branch_n": cfg.branch_n, "a": cfg.a, "omega": cfg.omega},
            "version": __version__,
            "seed": cfg.seed,
            "warnings": cfg.warnings,
        },
        "verdict": verdict.as_dict(),
    }
    _emit(encode(doc) + "\n", cfg.output_path)
    _report(
        f"criterion={args.criterion} worst_violation={verdict.worst_violation:.17g} "
        f"tolerance={verdict.tolerance:g} passed={verdict.passed}",
        cfg.output_path,
    )
    return 0 if verdict.passed else 1


# --------------------------------------------------------------------------
# compare

COMPARE_COLUMNS = (
    "theta", "n", "family", "omega", "mu", "fluence", "rate_cost", "mixed_cost",
    "endpoint_jump", "rate_ratio_to_b2", "fluence_excess_over_b1", "arrival_error",
)


def compare_rows(thetas, ns, omegas, mus, a=1.0, mixed_omega=5.0, grid_n=2000):
    """Cost table for every family over a (theta, n, omega, mu) grid.

    ``mixed_cost`` is always evaluated at ``(a, mixed_omega)`` so rows are
    comparable; B3 rows differ in the ``omega`` they were built with.
    """
    rows = []
    s_i = np.array([0.0, 0.0, 1.0])
    for theta in thetas:
        s_f = np.array([math.sin(theta), 0.0, math.cos(theta)])
        for n in ns:
            b1 = synthesize(s_i, s_f, "b1", n)
            b2 = synthesize(s_i, s_f, "b2", n)
            axis = b1.axis
            fl_b1 = fluence(b1.profile)
            rate_b2 = rate_cost(b2.profile)
            cases = [("b1", math.nan, math.nan, b1.field), ("b2", math.nan, math.nan, b2.field)]
            for w in omegas:
                cases.append(("b3", w, math.nan, synthesize(s_i, s_f, "b3", n, omega=w).field))
            cases.append(("sine", math.nan, math.nan, AxisField(pulse_sine(theta, n), axis)))
            if n == 0:
                for mu in mus:
                    cases.append(("cn", math.nan, mu, synthesize(s_i, s_f, "cn", 0, mu=mu).field))
            for family, w, mu, fld in cases:
                sched = sample_schedule(fld, grid_n)
                fl = fluence(sched)
                rc = rate_cost(sched)
                rows.append({
                    "theta": theta,
                    "n": n,
                    "family": family,
                    "omega": w,
                    "mu": mu,
                    "fluence": fl,
                    "rate_cost": rc,
                    "mixed_cost": mixed_cost(sched, a, mixed_omega),
                    "endpoint_jump": endpoint_jump(sched),
                    "rate_ratio_to_b2": rc / rate_b2 if rate_b2 else math.nan,
                    "fluence_excess_over_b1": fl - fl_b1,
                    "arrival_error": propagate(s_i, sched, target=s_f).final_error,
                })
    return rows


def _cell(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "" if math.isnan(v) else format(v, ".17g")
    return str(v)


def format_table(rows, fmt):
    if fmt == "json":
        return encode({"columns": list(COMPARE_COLUMNS), "rows": [[r[c] for c in COMPARE_COLUMNS] for r in rows]}) + "\n"
    lines = []
    if fmt == "markdown":
        lines.append("| " + " | ".join(COMPARE_COLUMNS) + " |")
        lines.append("|" + "---|" * len(COMPARE_COLUMNS))
        for r in rows:
            lines.append("| " + " | ".join(_cell(r[c]) for c in COMPARE_COLUMNS) + " |")
    else:
        lines.append(",".join(COMPARE_COLUMNS))
        for r in rows:
            lines.append(",".join(_cell(r[c]) for c in COMPARE_COLUMNS))
    return "\n".join(lines) + "\n"


def _float_list(text, degrees=False):
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals or not all(math.isfinite(v) for v in vals):
        raise UsageError(f"expected finite numbers, got {text!r}")
    return [math.radians(v) for v in vals] if degrees else vals


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None


def cmd_compare(args):
    thetas = _float_list(args.thetas, args.degrees)
    if not all(0.0 < th < math.pi for th in thetas):
        raise UsageError("compare thetas must lie strictly between 0 and pi")
    omegas = _float_list(args.omegas)
    mus = _float_list(args.mus)
    if not all(w > 0 for w in omegas) or args.a <= 0 or args.mixed_omega <= 0:
        raise UsageError("a and omegas must be positive")
    if args.grid_n < 100:
        raise UsageError("grid_n must be at least 100")
    rows = compare_rows(thetas, _int_list(args.ns), omegas, mus, args.a, args.mixed_omega, args.grid_n)
    _emit(format_table(rows, args.format), args.output)
    worst = max(r["arrival_error"] for r in rows)
    _report(f"rows={len(rows)} worst_arrival_error={worst:.17g}", args.output)
    return 0 if worst <= ARRIVAL_TOL else 1


# --------------------------------------------------------------------------
# argument parsing


def _add_common(p, vectors=True):
    if vectors:
        p.add_argument("--si", default="0,0,1", help="initial Bloch vector x,y,z")
        p.add_argument("--sf", default="1,0,0", help="final Bloch vector x,y,z")
    p.add_argument("--n", type=int, default=0, help="winding branch")
    p.add_argument("--a", type=float, default=1.0, help="fluence weight a")
    p.add_argument("--omega", type=float, default=5.0, help="rate weight omega")
    p.add_argument("--grid-n", type=int, default=2000, dest="grid_n", help="number of grid intervals")
    p.add_argument("--seed", type=int, default=None, help=f"RNG seed (default ${SEED_ENV} or {DEFAULT_SEED})")
    p.add_argument("--output", "-o", default=None, help="output path (default stdout)")


def build_parser():
    parser = argparse.ArgumentParser(prog="bloch-pulse", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write an optimal pulse")
    _add_common(p)
    p.add_argument("--family", choices=[f.value for f in Family if f is not Family.CUSTOM], default="b1")
    p.add_argument("--mu", type=float, default=1.0, help="constant-norm shape parameter")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("simulate", help="propagate a pulse file")
    p.add_argument("pulse", help="pulse file (JSON or CSV)")
    p.add_argument("--si", default=None, help="initial Bloch vector (overrides file)")
    p.add_argument("--sf", default=None, help="target Bloch vector (overrides file)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--output", "-o", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="run the brute-force optimality oracle")
    _add_common(p)
    p.add_argument("--criterion", choices=("fluence", "rate", "mixed"), default="fluence")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--off-axis-trials", type=int, default=20, dest="off_axis_trials")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("compare", help="tabulate costs across families")
    p.add_argument("--thetas", default=f"{math.pi / 4!r},{math.pi / 2!r},2.5")
    p.add_argument("--ns", default="0,1")
    p.add_argument("--omegas", default="0.5,5,50")
    p.add_argument("--mus", default="0.5,1")
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--mixed-omega", type=float, default=5.0, dest="mixed_omega")
    p.add_argument("--grid-n", type=int, default=2000, dest="grid_n")
    p.add_argument("--degrees", action="store_true", help="read --thetas in degrees")
    p.add_argument("--format", choices=("csv", "markdown", "json"), default="csv")
    p.add_argument("--output", "-o", default=None)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, SchemaError, DomainError, ConstructionError) as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
