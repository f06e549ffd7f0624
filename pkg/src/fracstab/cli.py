"""Command-line front end.

Exit codes: 0 ok / certified / converged, 1 failed condition or diverged,
2 usage or input error, 3 numerical error.
"""
from __future__ import annotations

import argparse
import io
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .expr import ExprError
from .matrix import MatrixError
from .model import (
    PRINTED, SpecError, builtin_example, close_loop, dump_spec, load_spec, load_spec_file,
)
from .plotting import write_trajectory_svg
from .sim import SimulationError, integrate
from .sim_config import SimConfig
from .specfun import MLParams, SpecialFunctionError, mittag_leffler
from .stability import certify, compare_with_printed

EXIT_OK, EXIT_FAILED, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"expected a comma-separated list of numbers, got {text!r}") from exc
    return vals


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _is_catalog(spec) -> bool:
    ref = builtin_example("closed")
    return spec.A == ref.A and spec.feedback_K == ref.feedback_K


def cmd_check(args) -> int:
    spec = load_spec_file(args.spec_path)
    cls = close_loop(spec)
    cert = certify(cls, horizon=args.horizon, ball_radius=args.ball)
    if args.mode in ("paper-literal", "both") and _is_catalog(spec):
        cert = replace(cert, literal_M3=PRINTED["M3"])
        cert = replace(cert, notes=cert.notes + tuple(compare_with_printed(cert, PRINTED, cls.M_inv)))
    _write(args.out, cert.to_json(args.mode))
    if cert.verdict == "inconclusive":
        print(f"inconclusive: {'; '.join(cert.notes[-1:])}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK if cert.verdict == "certified_numerically" else EXIT_FAILED


def _sim_config(spec, t_end, dt) -> SimConfig:
    try:
        return SimConfig(
            t_end=spec.sim.t_end if t_end is None else t_end,
            dt=spec.sim.dt if dt is None else dt,
            divergence_cap=spec.sim.divergence_cap,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def cmd_simulate(args) -> int:
    spec = load_spec_file(args.spec_path)
    cfg = _sim_config(spec, args.t_end, args.dt)
    x0 = None
    if args.x0 is not None:
        x0 = _floats(args.x0)
        if len(x0) != spec.n:
            raise UsageError(f"--x0 needs {spec.n} values, got {len(x0)}")
    cls = close_loop(spec)
    try:
        traj = integrate(cls, cfg, x0)
    except SimulationError as exc:
        _emit_traj(exc.partial, args, spec)
        print(f"simulation aborted at {exc}; partial trajectory written", file=sys.stderr)
        return EXIT_NUMERIC
    _emit_traj(traj, args, spec)
    return EXIT_FAILED if traj.outcome == "diverged" else EXIT_OK


def _emit_traj(traj, args, spec) -> None:
    buf = io.StringIO()
    traj.to_csv(buf)
    _write(args.csv, buf.getvalue())
    if args.svg:
        write_trajectory_svg(traj, args.svg, title=spec.label)


def _parse_variant(text: str) -> tuple[str, str]:
    parts = text.replace("_", "-").split("/")
    if len(parts) != 2 or parts[0] not in ("open", "closed") or parts[1] not in ("as-printed", "power-rule-exact"):
        raise UsageError(f"unknown variant {text!r}; use {{open,closed}}/{{as-printed,power-rule-exact}}")
    return parts[0], parts[1].replace("-", "_")


def cmd_example(args) -> int:
    loop, form = _parse_variant(args.variant)
    spec = builtin_example(loop, form)
    _write(args.emit_spec, json.dumps(dump_spec(spec), indent=2) + "\n")
    return EXIT_OK


def cmd_mlf(args) -> int:
    try:
        rep = mittag_leffler(MLParams(args.alpha, args.beta), args.z)
    except SpecialFunctionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"{rep.value!r} {rep.truncation_bound!r}")
    return EXIT_OK


def _set_path(doc, path: str, value: float):
    keys = path.split(".")
    node = doc
    for i, key in enumerate(keys):
        last = i == len(keys) - 1
        if isinstance(node, list):
            try:
                idx = int(key)
                node[idx]
            except (ValueError, IndexError):
                raise UsageError(f"bad parameter path {path!r} at {key!r}") from None
            if last:
                if isinstance(node[idx], (list, dict, str)) or node[idx] is None:
                    raise UsageError(f"parameter path {path!r} does not address a scalar")
                node[idx] = value
            else:
                node = node[idx]
        elif isinstance(node, dict):
            if key not in node:
                raise UsageError(f"bad parameter path {path!r} at {key!r}")
            if last:
                if isinstance(node[key], (list, dict, str, bool)) or node[key] is None:
                    raise UsageError(f"parameter path {path!r} does not address a scalar")
                node[key] = value
            else:
                node = node[key]
        else:
            raise UsageError(f"bad parameter path {path!r} at {key!r}")


def _sweep_row(doc, path, value, horizon, ball) -> list[str]:
    d = json.loads(json.dumps(doc))
    _set_path(d, path, int(value) if path == "n" else value)
    spec = load_spec(d)
    cls = close_loop(spec)
    cert = certify(cls, horizon=horizon, ball_radius=ball)
    try:
        traj = integrate(cls, SimConfig(spec.sim.t_end, spec.sim.dt, spec.sim.divergence_cap))
        outcome, final_norm, final_t = traj.outcome, float(np.linalg.norm(traj.final_state)), traj.final_time
    except SimulationError as exc:
        outcome, final_norm, final_t = "error", float("nan"), exc.partial.final_time
    fmt = lambda v: "" if v is None else format(v, ".15g")
    return [fmt(value), cert.verdict, fmt(cert.omega), fmt(cert.M3), outcome, fmt(final_t), fmt(final_norm)]


def cmd_sweep(args) -> int:
    values = _floats(args.values)
    if not values:
        raise UsageError("--values must list at least one value")
    spec_doc = json.loads(Path(args.spec_path).read_text(encoding="utf-8"))
    doc = dump_spec(load_spec(spec_doc))
    _set_path(json.loads(json.dumps(doc)), args.param, values[0])
    rows = [_sweep_row(doc, args.param, v, 40.0, 0.5) for v in values]
    header = "value,verdict,omega,M3,outcome,final_t,final_norm"
    _write(args.csv, "\n".join([header] + [",".join(r) for r in rows]) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fracstab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("check", help="stabilizability certificate as JSON")
    c.add_argument("spec_path", help="system spec JSON file")
    c.add_argument("--horizon", type=float, default=40.0, help="time horizon for M and M1 (default 40)")
    c.add_argument("--ball", type=float, default=0.5, help="sampling ball radius for M2 (default 0.5)")
    c.add_argument("--mode", choices=("spectral", "paper-literal", "both"), default="both",
                   help="which gain-margin readings to report")
    c.add_argument("--out", default=None, help="report path (default stdout)")
    c.set_defaults(func=cmd_check)

    s = sub.add_parser("simulate", help="integrate and write a trajectory CSV")
    s.add_argument("spec_path", help="system spec JSON file")
    s.add_argument("--t-end", type=float, default=None, help="override sim.t_end")
    s.add_argument("--dt", type=float, default=None, help="override sim.dt")
    s.add_argument("--x0", default=None, help="comma-separated initial state")
    s.add_argument("--csv", default=None, help="trajectory CSV path (default stdout)")
    s.add_argument("--svg", default=None, help="also write an SVG plot")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("example", help="emit a built-in worked-example spec")
    e.add_argument("--variant", default="closed/as-printed",
                   help="{open,closed}/{as-printed,power-rule-exact}")
    e.add_argument("--emit-spec", default=None, help="output path (default stdout)")
    e.set_defaults(func=cmd_example)

    m = sub.add_parser("mlf", help="evaluate the Mittag-Leffler function")
    m.add_argument("--alpha", type=float, required=True)
    m.add_argument("--beta", type=float, default=1.0)
    m.add_argument("--z", type=float, required=True)
    m.set_defaults(func=cmd_mlf)

    w = sub.add_parser("sweep", help="certificate and outcome per parameter value")
    w.add_argument("spec_path", help="system spec JSON file")
    w.add_argument("--param", required=True, help="dotted path to a numeric field, e.g. alpha2, sim.dt, A.2.2, x0.0")
    w.add_argument("--values", required=True, help="comma-separated values")
    w.add_argument("--csv", default=None, help="output path (default stdout)")
    w.set_defaults(func=cmd_sweep)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SpecError, OSError, json.JSONDecodeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (MatrixError, ExprError, SpecialFunctionError, ArithmeticError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
