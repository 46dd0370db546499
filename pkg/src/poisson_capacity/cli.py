"""Command line: solve, sweep, verify, bounds and the oscillation demo.

Exit codes: 0 success, 1 a KKT or bound check failed, 2 usage or input error.
"""

import argparse
import io
import json
import math
import sys

import numpy as np

from . import __version__
from .bounds import Inapplicable, asymptotic_capacity, bounds_report
from .channel import REPORT_EPSILON, poisson_transform, truncation_index
from .detection import detection_report
from .dist import DiscreteDistribution, OutputModel
from .information import mutual_information, sign_changes
from .solver import SolverConfig, kkt_verify, sweep

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE = 0, 1, 2

CSV_COLUMNS = (
    "A",
    "capacity_nats",
    "n_points",
    "p0",
    "pA",
    "x_interior_min",
    "x_interior_max",
    "pe",
    "hx",
    "hxy",
    "eta_upper",
    "universal_mass_bound",
    "support_lower",
    "support_upper_implicit",
    "checks_passed",
)


class InputError(Exception):
    pass


# -- serialization ---------------------------------------------------------


def fmt_float(v):
    return "%.17g" % v


def dumps(obj, indent=0):
    """JSON text with every float written to 17 significant digits.

    Non-finite floats become null. Key order is preserved.
    """
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        return "[" + ", ".join(dumps(v, indent + 1) for v in obj) + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(float(obj)) if math.isfinite(obj) else "null"
    if obj is None:
        return "null"
    if isinstance(obj, Inapplicable):
        return dumps({"inapplicable": obj.reason}, indent)
    return json.dumps(str(obj))


def manifest(command, cfg, amplitude):
    return {
        "command": command,
        "config": cfg.to_dict(),
        "tool_version": __version__,
        "units": "nats",
        "truncation": truncation_index(amplitude, REPORT_EPSILON).to_dict(),
    }


def result_to_dict(res, man):
    d = res.distribution
    return {
        "amplitude": d.amplitude,
        "units": "nats",
        "points": d.locations.tolist(),
        "masses": d.masses.tolist(),
        "capacity_mi": res.capacity_mi,
        "capacity_py0": res.capacity_py0,
        "kkt_gap": res.kkt_gap,
        "iterations": res.iterations,
        "converged": res.converged,
        "manifest": man,
    }


def load_distribution(path):
    """Read a distribution JSON file; returns (distribution, parsed dict)."""
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        return DiscreteDistribution(data["amplitude"], data["points"], data["masses"]), data
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise InputError(f"cannot read distribution from {path}: {exc}") from exc


def _write(text, path):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _csv_cell(v):
    if v is None or isinstance(v, Inapplicable):
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return fmt_float(float(v))


def _csv(columns, rows, man):
    out = io.StringIO()
    out.write("# manifest: " + json.dumps(man, sort_keys=False, separators=(",", ":")) + "\n")
    out.write(",".join(columns) + "\n")
    for row in rows:
        out.write(",".join(_csv_cell(row[c]) for c in columns) + "\n")
    return out.getvalue()


# -- commands ----------------------------------------------------------------


def _config(args):
    overrides = {
        "step_size": getattr(args, "step_size", None),
        "kkt_tol": getattr(args, "tol", None),
        "max_iter": getattr(args, "max_iter", None),
        "n_points": getattr(args, "points", None),
    }
    try:
        return SolverConfig(**{k: v for k, v in overrides.items() if v is not None})
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def cmd_solve(args, argv):
    cfg = _config(args)
    if not args.amplitude > 0:
        raise InputError("--amplitude must be positive")
    res = sweep([args.amplitude], cfg)[0]
    _write(dumps(result_to_dict(res, manifest(" ".join(argv), cfg, args.amplitude))) + "\n", args.out)
    if not res.converged:
        print(f"solve: not converged, KKT gap {res.kkt_gap:.3g}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


def sweep_rows(amplitudes, cfg):
    """Solve over ``amplitudes`` and return (rows, all checks passed)."""
    rows, ok = [], True
    for res in sweep(amplitudes, cfg):
        d = res.distribution
        m = OutputModel(d)
        det = detection_report(m)
        rep = bounds_report(d.amplitude, res.capacity_mi, d, "solver")
        interior = d.interior()
        passed = rep.checks_passed and res.converged
        ok &= passed
        rows.append(
            {
                "A": d.amplitude,
                "capacity_nats": res.capacity_mi,
                "n_points": d.size,
                "p0": d.mass_at(0.0),
                "pA": d.mass_at(d.amplitude),
                "x_interior_min": interior.min() if interior.size else None,
                "x_interior_max": interior.max() if interior.size else None,
                "pe": det.pe,
                "hx": det.hx,
                "hxy": det.hxy,
                **rep.row(),
                "checks_passed": passed,
            }
        )
    return rows, ok


def amplitude_grid(lo, hi, delta):
    if not (0 < lo <= hi and delta > 0):
        raise InputError("need 0 < --min <= --max and --delta > 0")
    n = int(math.floor((hi - lo) / delta + 1e-9))
    # round away the drift of repeated float addition
    return [round(lo + k * delta, 12) for k in range(n + 1)]


def cmd_sweep(args, argv):
    cfg = _config(args)
    amps = amplitude_grid(args.min, args.max, args.delta)
    rows, ok = sweep_rows(amps, cfg)
    _write(_csv(CSV_COLUMNS, rows, manifest(" ".join(argv), cfg, amps[-1])), args.out)
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_verify(args, argv):
    d, data = load_distribution(args.file)
    m = OutputModel(d)
    mi = mutual_information(m)
    rep = kkt_verify(m, mi, args.grid, args.tol)
    py0 = -float(m.log_py[0])
    stored = data.get("capacity_mi")
    ok = rep.passes(args.tol) and abs(mi - py0) <= 2 * args.tol
    if stored is not None:
        ok = ok and abs(stored - mi) <= args.tol
    out = {
        "amplitude": d.amplitude,
        "units": "nats",
        "capacity_mi": mi,
        "capacity_py0": py0,
        "max_violation": rep.max_violation,
        "max_support_residual": float(np.max(rep.support_residuals)),
        "grid_size": rep.grid_size,
        "tol": args.tol,
        "passed": ok,
    }
    sys.stdout.write(dumps(out) + "\n")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_bounds(args, argv):
    A = args.amplitude
    if not A > 0:
        raise InputError("--amplitude must be positive")
    dist = None
    if args.from_file is not None:
        dist, data = load_distribution(args.from_file)
        if abs(dist.amplitude - A) > 1e-12 * A:
            raise InputError(f"{args.from_file} is for A={dist.amplitude}, not {A}")
        C = data.get("capacity_mi")
        if C is None:
            C = mutual_information(OutputModel(dist))
        source = "solver"
    elif args.asymptotic:
        C, source = asymptotic_capacity(A), "asymptotic"
    else:
        C, source = args.capacity, "given"
    if C < 0:
        raise InputError(f"capacity {C} is negative; bounds need C >= 0")
    rep = bounds_report(A, C, dist, source)
    _write(dumps(rep.to_dict()) + "\n", args.out)
    return EXIT_OK if rep.checks_passed else EXIT_CHECK_FAILED


def xi_sequence(n=41):
    y = np.arange(n)
    return np.sin(np.pi * y / 3.0) + np.sin(np.pi * y / 13.0)


def oscillation_demo(grid_points=2000, top=40.0):
    """Transform xi through the Poisson kernel and compare sign changes.

    xi lives on y = 0..40 and is zero beyond, so Xi(x) = sum_y xi(y) P(y | x)
    is exact.
    """
    xi = xi_sequence(int(top) + 1)
    x = np.linspace(0.0, top, grid_points)
    big_xi = poisson_transform(xi, x)
    s_in, s_out = sign_changes(xi), sign_changes(big_xi)
    return {"xi": xi, "x": x, "Xi": big_xi, "xi_sign_changes": s_in,
            "Xi_zero_crossings": s_out, "holds": s_out <= s_in}


def cmd_demo(args, argv):
    demo = oscillation_demo()
    rows = [{"x": a, "Xi": b} for a, b in zip(demo["x"], demo["Xi"])]
    man = {"command": " ".join(argv), "tool_version": __version__, "units": "nats"}
    _write(_csv(("x", "Xi"), rows, man), args.out)
    summary = {k: demo[k] for k in ("xi_sign_changes", "Xi_zero_crossings", "holds")}
    summary["xi"] = demo["xi"].tolist()
    print(dumps(summary), file=sys.stderr)
    return EXIT_OK if demo["holds"] else EXIT_CHECK_FAILED


def build_parser():
    p = argparse.ArgumentParser(
        prog="poisson-capacity",
        description="Capacity of the peak-constrained discrete-time Poisson channel (nats).",
    )
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="optimal input law for one amplitude")
    s.add_argument("--amplitude", type=float, required=True)
    s.add_argument("--step-size", type=float)
    s.add_argument("--tol", type=float, help="KKT tolerance in nats")
    s.add_argument("--max-iter", type=int)
    s.add_argument("--points", type=int, help="maximum number of mass points")
    s.add_argument("--out", help="distribution JSON (default stdout)")
    s.set_defaults(func=cmd_solve)

    w = sub.add_parser("sweep", help="solve over a grid of amplitudes with warm starts")
    w.add_argument("--min", type=float, required=True)
    w.add_argument("--max", type=float, required=True)
    w.add_argument("--delta", type=float, required=True)
    w.add_argument("--out", help="CSV file (default stdout)")
    w.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify", help="KKT check of a distribution file")
    v.add_argument("file")
    v.add_argument("--grid", type=int, default=SolverConfig.grid_points)
    v.add_argument("--tol", type=float, default=SolverConfig.kkt_tol)
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bounds", help="analytic bounds, optionally checked against a solution")
    b.add_argument("--amplitude", type=float, required=True)
    src = b.add_mutually_exclusive_group(required=True)
    src.add_argument("--capacity", type=float)
    src.add_argument("--from", dest="from_file")
    src.add_argument("--asymptotic", action="store_true")
    b.add_argument("--out", help="JSON report (default stdout)")
    b.set_defaults(func=cmd_bounds)

    o = sub.add_parser("demo-oscillation", help="sign changes through the Poisson kernel")
    o.add_argument("--out", help="CSV of x, Xi(x) (default stdout)")
    o.set_defaults(func=cmd_demo)
    return p


def run(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args, argv)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
