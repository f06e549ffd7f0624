"""System description, JSON ingestion, closed-loop transform and the built-in
worked-example catalog.

The system is

    x' = A x + kernel(t) g(t, x, D^a1 x, D^a2 x) + K x'

and with ``I - K`` invertible it is integrated in the explicit form

    x' = (I - K)^-1 [A x + kernel(t) g(...)].
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .expr import (
    Expr, ExprError, UnboundVariableError, compile_vector, evaluate, free_vars, parse, serialize,
)
from .fracderiv import CaputoOrder, caputo_power_rule
from .matrix import SingularMatrixError, invert
from .sim_config import SimConfig


class SpecError(ValueError):
    """Invalid system document; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class SingularFeedbackError(SpecError):
    pass


Matrix = tuple[tuple[float, ...], ...]

_VAR_RE = re.compile(r"^(x|d1_|d2_)(\d+)$")


@dataclass(frozen=True)
class SystemSpec:
    n: int
    A: Matrix
    feedback_K: Matrix | None
    alpha1: float
    alpha2: float
    delay_kernel: Expr
    g: tuple[Expr, ...]
    x0: tuple[float, ...]
    label: str = ""
    sim: SimConfig = field(default_factory=lambda: SimConfig(t_end=40.0, dt=1e-3))

    def __post_init__(self):
        _validate(self)

    @property
    def A_array(self) -> np.ndarray:
        return np.array(self.A, dtype=float)

    @property
    def K_array(self) -> np.ndarray | None:
        return None if self.feedback_K is None else np.array(self.feedback_K, dtype=float)

    @property
    def uses_history(self) -> tuple[bool, bool]:
        """Whether g reads D^alpha1 x (d1_*) and D^alpha2 x (d2_*)."""
        names = set().union(*(free_vars(e) for e in self.g))
        return any(v.startswith("d1_") for v in names), any(v.startswith("d2_") for v in names)


def _allowed_g_var(name: str, n: int) -> bool:
    if name == "t":
        return True
    m = _VAR_RE.match(name)
    return bool(m) and 1 <= int(m.group(2)) <= n and not m.group(2).startswith("0")


def _check_matrix(path: str, m: Matrix, n: int) -> None:
    if len(m) != n or any(len(row) != n for row in m):
        raise SpecError(path, f"expected a {n}x{n} matrix")
    if not all(math.isfinite(v) for row in m for v in row):
        raise SpecError(path, "matrix entries must be finite")


def _validate(s: SystemSpec) -> None:
    if not (isinstance(s.n, int) and s.n >= 1):
        raise SpecError("n", f"dimension must be a positive integer, got {s.n!r}")
    _check_matrix("A", s.A, s.n)
    if s.feedback_K is not None:
        _check_matrix("feedback_K", s.feedback_K, s.n)
    for name in ("alpha1", "alpha2"):
        a = getattr(s, name)
        if not 0.0 < a < 1.0:
            raise SpecError(name, f"Caputo order must lie in (0, 1), got {a!r}")
    bad = free_vars(s.delay_kernel) - {"t"}
    if bad:
        raise SpecError("delay_kernel", f"kernel may only use t, found {sorted(bad)}")
    if len(s.g) != s.n:
        raise SpecError("g", f"expected {s.n} components, got {len(s.g)}")
    for i, e in enumerate(s.g):
        bad = {v for v in free_vars(e) if not _allowed_g_var(v, s.n)}
        if bad:
            raise SpecError(f"g[{i}]", f"unknown variables {sorted(bad)}")
    if len(s.x0) != s.n:
        raise SpecError("x0", f"expected {s.n} entries, got {len(s.x0)}")
    if not all(math.isfinite(v) for v in s.x0):
        raise SpecError("x0", "initial state must be finite")


# --- document I/O -----------------------------------------------------------

_TOP_KEYS = {"n", "A", "feedback_K", "alpha1", "alpha2", "delay_kernel", "g", "x0", "label", "sim"}
_REQUIRED = {"n", "A", "alpha1", "alpha2", "delay_kernel", "g", "x0"}
_SIM_KEYS = {"t_end", "dt", "divergence_cap"}


def _real(path: str, v: Any) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SpecError(path, f"expected a number, got {type(v).__name__}")
    return float(v)


def _matrix(path: str, v: Any) -> Matrix:
    if not isinstance(v, list) or not all(isinstance(row, list) for row in v):
        raise SpecError(path, "expected a list of rows")
    return tuple(tuple(_real(f"{path}[{i}][{j}]", x) for j, x in enumerate(row)) for i, row in enumerate(v))


def _expr(path: str, v: Any) -> Expr:
    if not isinstance(v, str):
        raise SpecError(path, "expected an expression string")
    try:
        return parse(v)
    except ExprError as exc:
        raise SpecError(path, str(exc)) from exc


def load_spec(doc: Mapping[str, Any]) -> SystemSpec:
    """Build a validated :class:`SystemSpec` from a parsed JSON document."""
    if not isinstance(doc, Mapping):
        raise SpecError("", "document must be a JSON object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise SpecError(sorted(unknown)[0], "unknown key")
    missing = _REQUIRED - set(doc)
    if missing:
        raise SpecError(sorted(missing)[0], "missing required key")
    n = doc["n"]
    if isinstance(n, bool) or not isinstance(n, int):
        raise SpecError("n", "expected an integer")
    K = doc.get("feedback_K")
    g = doc["g"]
    if not isinstance(g, list):
        raise SpecError("g", "expected a list of expression strings")
    x0 = doc["x0"]
    if not isinstance(x0, list):
        raise SpecError("x0", "expected a list of numbers")
    label = doc.get("label", "")
    if not isinstance(label, str):
        raise SpecError("label", "expected a string")
    sim = _load_sim(doc.get("sim", {}))
    try:
        return SystemSpec(
            n=n,
            A=_matrix("A", doc["A"]),
            feedback_K=None if K is None else _matrix("feedback_K", K),
            alpha1=_real("alpha1", doc["alpha1"]),
            alpha2=_real("alpha2", doc["alpha2"]),
            delay_kernel=_expr("delay_kernel", doc["delay_kernel"]),
            g=tuple(_expr(f"g[{i}]", e) for i, e in enumerate(g)),
            x0=tuple(_real(f"x0[{i}]", v) for i, v in enumerate(x0)),
            label=label,
            sim=sim,
        )
    except ExprError as exc:  # pragma: no cover - parse errors are wrapped above
        raise SpecError("", str(exc)) from exc


def _load_sim(block: Any) -> SimConfig:
    if not isinstance(block, Mapping):
        raise SpecError("sim", "expected an object")
    unknown = set(block) - _SIM_KEYS
    if unknown:
        raise SpecError(f"sim.{sorted(unknown)[0]}", "unknown key")
    kw = {k: _real(f"sim.{k}", v) for k, v in block.items()}
    try:
        return SimConfig(t_end=kw.get("t_end", 40.0), dt=kw.get("dt", 1e-3),
                         divergence_cap=kw.get("divergence_cap", 1e6))
    except ValueError as exc:
        raise SpecError("sim", str(exc)) from exc


def dump_spec(s: SystemSpec) -> dict[str, Any]:
    """The JSON document for ``s``; ``load_spec(dump_spec(s)) == s``."""
    return {
        "n": s.n,
        "A": [list(row) for row in s.A],
        "feedback_K": None if s.feedback_K is None else [list(row) for row in s.feedback_K],
        "alpha1": s.alpha1,
        "alpha2": s.alpha2,
        "delay_kernel": serialize(s.delay_kernel),
        "g": [serialize(e) for e in s.g],
        "x0": list(s.x0),
        "label": s.label,
        "sim": {"t_end": s.sim.t_end, "dt": s.sim.dt, "divergence_cap": s.sim.divergence_cap},
    }


def load_spec_file(path: str | Path) -> SystemSpec:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError("", f"malformed JSON: {exc}") from exc
    return load_spec(doc)


def write_spec_file(s: SystemSpec, path: str | Path) -> None:
    Path(path).write_text(json.dumps(dump_spec(s), indent=2) + "\n", encoding="utf-8")


# --- closed loop --------------------------------------------------------------

def _g_varmap(n: int) -> Callable[[str], str]:
    def varmap(name: str) -> str:
        if name == "t":
            return "t"
        m = _VAR_RE.match(name)
        if m is None or not 1 <= int(m.group(2)) <= n:
            raise UnboundVariableError(f"unbound variable {name!r}")
        i = int(m.group(2)) - 1
        return {"x": "x", "d1_": "d1", "d2_": "d2"}[m.group(1)] + f"[{i}]"
    return varmap


def compile_g(spec: SystemSpec) -> Callable[..., tuple]:
    """``g(t, x, d1, d2) -> tuple`` compiled from the spec's expressions."""
    return compile_vector(spec.g, "t, x, d1, d2", _g_varmap(spec.n))


def compile_kernel(kernel: Expr) -> Callable[[float], float]:
    def varmap(name: str) -> str:
        if name != "t":
            raise UnboundVariableError(f"unbound variable {name!r}")
        return "t"
    f = compile_vector([kernel], "t", varmap)
    return lambda t: f(t)[0]


def g_env(t: float, x, c1, c2) -> dict[str, float]:
    env = {"t": float(t)}
    for i in range(len(x)):
        env[f"x{i + 1}"] = float(x[i])
        env[f"d1_{i + 1}"] = float(c1[i])
        env[f"d2_{i + 1}"] = float(c2[i])
    return env


class ComponentError(ExprError, ArithmeticError):
    """Expression failure tagged with the g component (or the kernel) that raised it."""

    def __init__(self, where: str, cause: Exception):
        super().__init__(f"{where}: {cause}")
        self.where = where


@dataclass(frozen=True, eq=False)
class ClosedLoopSystem:
    base: SystemSpec
    M_inv: np.ndarray
    M_inv_A: np.ndarray
    _g: Callable[..., tuple] = field(repr=False)
    _kernel: Callable[[float], float] = field(repr=False)

    @property
    def n(self) -> int:
        return self.base.n

    def kernel(self, t: float) -> float:
        try:
            return self._kernel(t)
        except ExprError as exc:
            raise ComponentError("delay_kernel", exc) from exc

    def g(self, t: float, x, c1, c2) -> np.ndarray:
        try:
            return np.array(self._g(t, x, c1, c2))
        except ExprError:
            env = g_env(t, x, c1, c2)
            for i, e in enumerate(self.base.g):
                try:
                    evaluate(e, env)
                except ExprError as exc:
                    raise ComponentError(f"g[{i}]", exc) from exc
            raise

    def rhs(self, t: float, x, c1=None, c2=None) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        c1 = np.zeros(self.n) if c1 is None else c1
        c2 = np.zeros(self.n) if c2 is None else c2
        return self.M_inv_A @ x + self.kernel(t) * (self.M_inv @ self.g(t, x, c1, c2))


def close_loop(spec: SystemSpec) -> ClosedLoopSystem:
    """Solve (I - K) x' = A x + kernel g for x' (identity when K is absent)."""
    n = spec.n
    A = spec.A_array
    if spec.feedback_K is None:
        M_inv = np.eye(n)
    else:
        IK = np.eye(n) - spec.K_array
        try:
            M_inv = invert(IK)
        except SingularMatrixError as exc:
            raise SingularFeedbackError("feedback_K", f"I - K is singular ({exc})") from exc
        resid = np.abs(M_inv @ IK - np.eye(n)).max()
        if resid > 1e-10:
            raise SingularFeedbackError("feedback_K", f"I - K is too ill-conditioned (residual {resid:.1e})")
    return ClosedLoopSystem(spec, M_inv, M_inv @ A, compile_g(spec), compile_kernel(spec.delay_kernel))


def rhs(cls: ClosedLoopSystem, t: float, x, c1, c2) -> np.ndarray:
    return cls.rhs(t, x, c1, c2)


# --- worked-example catalog -----------------------------------------------------

EXAMPLE_A = ((-15.0, 15.0, 0.0), (110.0, -1.0, 0.0), (0.0, 0.0, -1.0))
EXAMPLE_K = ((1.0, 15.0, 0.0), (110.0, 0.0, 0.0), (0.0, 0.0, -3.0))
EXAMPLE_ALPHA1 = 2.0 / 3.0
EXAMPLE_ALPHA2 = 3.0 / 5.0
EXAMPLE_X0 = (0.5, 0.5, 0.5)

# values as printed alongside the worked example, kept for discrepancy reports
PRINTED = {
    "closed_loop_real_parts": (-0.981, -1.0005, -0.25),
    "inverse_I_minus_K": ((-0.0006, -0.0009, 0.0), (1.0005, -1.0005, 0.0), (0.0, 0.0, -0.25)),
    "omega": 0.25,
    "M3": 0.5,
    "M3_times_max_inverse": -0.125,
    "power_rule_coefficients": (1.68, 1.127),
}

LOOPS = ("open", "closed")
FORMS = ("as_printed", "power_rule_exact")


def builtin_example(loop: str = "closed", form: str = "as_printed", third_exponent: str = "2/5") -> SystemSpec:
    """Catalog entry for the worked 3-state example.

    ``loop`` selects open (no feedback) or closed (printed K); ``form`` picks
    unit coefficients on the nonlinear terms or the power-rule coefficients
    Gamma(3)/Gamma(7/3) and Gamma(2)/Gamma(7/5). The printed kernel (t - 1)
    and the 1/(t - 1) prefactor of g cancel, so the catalog carries the
    product in g and a unit kernel.
    """
    if loop not in LOOPS:
        raise ValueError(f"loop must be one of {LOOPS}, got {loop!r}")
    if form not in FORMS:
        raise ValueError(f"form must be one of {FORMS}, got {form!r}")
    p = serialize(parse(third_exponent))
    if form == "as_printed":
        g2 = "x2 * spow(x1, 4 / 3)"
        g3 = f"x1 * spow(x2, {p})"
    else:
        c1, _ = caputo_power_rule(CaputoOrder(EXAMPLE_ALPHA1), 2.0)
        c2, _ = caputo_power_rule(CaputoOrder(EXAMPLE_ALPHA2), 1.0)
        g2 = f"{c1!r} * x2 * spow(x1, 4 / 3)"
        g3 = f"{c2!r} * x1 * spow(x2, {p})"
    return SystemSpec(
        n=3,
        A=EXAMPLE_A,
        feedback_K=EXAMPLE_K if loop == "closed" else None,
        alpha1=EXAMPLE_ALPHA1,
        alpha2=EXAMPLE_ALPHA2,
        delay_kernel=parse("1"),
        g=(parse("0"), parse(g2), parse(g3)),
        x0=EXAMPLE_X0,
        label=f"worked example, {loop} loop, {form.replace('_', ' ')}",
        sim=SimConfig(t_end=40.0, dt=1e-3, divergence_cap=1e6),
    )


def with_x0(spec: SystemSpec, x0: Sequence[float]) -> SystemSpec:
    return replace(spec, x0=tuple(float(v) for v in x0))
