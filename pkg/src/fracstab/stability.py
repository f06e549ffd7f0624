"""Local stabilizability certificate for the closed-loop system.

The certificate checks, for the closed-loop matrix B = (I-K)^-1 A,

* every eigenvalue of B has negative real part, omega = -max Re(eig B);
* omega > M3 * ||(I-K)^-1||_2 with M3 = M * M1 * M2, where
  ||exp(B t)|| <= M exp(-omega' t) (M), |kernel(t)| <= M1 and
  ||g|| <= M2 (||x|| + ||D^a1 x|| + ||D^a2 x||) locally.

M, M1 and M2 are grid or sample estimates over a finite horizon and a finite
ball, so a positive verdict is "certified_numerically", not a proof.
"""
from __future__ import annotations

import json
import math
from itertools import combinations
from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.stats import qmc

from .expr import Expr, free_vars
from .matrix import EigenConvergenceError, MatrixError, Spectrum, eigenvalues, expm, spectral_norm
from .model import ClosedLoopSystem, SystemSpec, compile_g, compile_kernel
from .specfun import MLParams, gamma_fn, mittag_leffler

OMEGA_SHRINK = 0.99
SCHEMA_VERSION = 1

VERDICTS = ("certified_numerically", "failed", "inconclusive")


class EstimationError(ArithmeticError):
    pass


@dataclass(frozen=True)
class StabilityCertificate:
    eigenvalues: Spectrum | None
    omega: float | None
    M: float | None
    M1: float | None
    M2: float | None
    M3: float | None
    inv_norm_spectral: float
    inv_norm_paper_literal: float
    verdict: str
    horizon: float
    ball_radius: float
    literal_M3: float | None = None
    notes: tuple[str, ...] = ()

    @property
    def max_real_part(self) -> float | None:
        return None if self.eigenvalues is None else self.eigenvalues.max_real_part

    @property
    def spectral_gain(self) -> float | None:
        """M3 * ||(I-K)^-1||_2, the quantity omega must exceed."""
        return None if self.M3 is None else self.M3 * self.inv_norm_spectral

    @property
    def literal_gain(self) -> float | None:
        """M3 * max diag (I-K)^-1, the diagonal-entry reading of the gain condition."""
        m3 = self.literal_M3 if self.literal_M3 is not None else self.M3
        return None if m3 is None else m3 * self.inv_norm_paper_literal

    @property
    def literal_holds(self) -> bool | None:
        if self.omega is None or self.literal_gain is None:
            return None
        return self.max_real_part < 0 and self.omega > self.literal_gain

    def to_dict(self, mode: str = "both") -> dict[str, Any]:
        if mode not in ("spectral", "paper-literal", "both"):
            raise ValueError(f"unknown mode {mode!r}")
        ev = None if self.eigenvalues is None else [[z.real, z.imag] for z in self.eigenvalues.eigenvalues]
        out: dict[str, Any] = {
            "schema_version": SCHEMA_VERSION,
            "verdict": self.verdict,
            "eigenvalues": ev,
            "max_real_part": self.max_real_part,
            "omega": self.omega,
            "M": self.M,
            "M1": self.M1,
            "M2": self.M2,
            "M3": self.M3,
            "horizon": self.horizon,
            "ball_radius": self.ball_radius,
            "mode": mode,
        }
        if mode in ("spectral", "both"):
            out["spectral"] = {
                "inv_norm": self.inv_norm_spectral,
                "gain": self.spectral_gain,
                "holds": self.verdict == "certified_numerically",
            }
        if mode in ("paper-literal", "both"):
            out["paper_literal"] = {
                "inv_norm": self.inv_norm_paper_literal,
                "M3": self.literal_M3 if self.literal_M3 is not None else self.M3,
                "gain": self.literal_gain,
                "holds": self.literal_holds,
            }
        out["notes"] = list(self.notes)
        return out

    def to_json(self, mode: str = "both") -> str:
        return json.dumps(self.to_dict(mode), indent=2, sort_keys=False) + "\n"


# --- constant estimators ----------------------------------------------------------

def _semigroup_profile(m: np.ndarray, rate: float, t: float) -> float:
    return spectral_norm(expm(m, t)) * math.exp(rate * t)


def estimate_M(m, omega: float, horizon: float, points: int = 400) -> float:
    """M >= 1 with ||exp(m t)||_2 <= M exp(-0.99 omega t) on (0, horizon].

    Supremum over a log-spaced plus uniform grid, refined around the best
    grid point. Raises :class:`EstimationError` when the product is still
    rising at the horizon (the bound would not be settled there).
    """
    m = np.asarray(m, dtype=float)
    if not (omega > 0 and horizon > 0):
        raise ValueError("omega and horizon must be positive")
    rate = OMEGA_SHRINK * omega
    half = max(points // 2, 100)
    grid = np.union1d(np.geomspace(horizon * 1e-6, horizon, half), np.linspace(0.0, horizon, half + 1)[1:])
    vals = np.array([_semigroup_profile(m, rate, t) for t in grid])
    i = int(np.argmax(vals))
    best = float(vals[i])
    if i == len(grid) - 1 and vals[-1] > vals[-2] and best > 1.0:
        raise EstimationError(
            f"||exp(m t)|| exp({rate:.4g} t) is still increasing at the horizon t = {horizon:g}"
        )
    lo = grid[i - 1] if i > 0 else 0.0
    hi = grid[i + 1] if i + 1 < len(grid) else grid[i]
    if hi > lo:
        res = minimize_scalar(lambda t: -_semigroup_profile(m, rate, t), bounds=(lo, hi),
                              method="bounded", options={"xatol": 1e-10 * max(hi, 1e-300)})
        best = max(best, -float(res.fun))
    return max(1.0, best)


def fit_growth_bound(m, horizon: float) -> tuple[float, float]:
    """(M, w) with ||exp(m t)|| <= M e^{w t} on [0, horizon], w = -0.99 * spectral gap."""
    spec = eigenvalues(m)
    if spec.max_real_part >= 0:
        raise EstimationError("growth fit needs a Hurwitz matrix")
    omega = -spec.max_real_part
    return estimate_M(m, omega, horizon), -OMEGA_SHRINK * omega


def estimate_M1(kernel: Expr, horizon: float, points: int = 10_001) -> float:
    """sup |kernel(t)| on a uniform grid over [0, horizon]."""
    bad = free_vars(kernel) - {"t"}
    if bad:
        raise ValueError(f"kernel may only use t, found {sorted(bad)}")
    k = compile_kernel(kernel)
    return max(abs(k(float(t))) for t in np.linspace(0.0, horizon, max(points, 10_000)))


def _kernel_sup_at_end(kernel: Expr, horizon: float, M1: float) -> bool:
    k = compile_kernel(kernel)
    return M1 > 0 and abs(k(horizon)) >= M1 * (1 - 1e-12) and abs(k(0.0)) < M1


def estimate_M2(spec: SystemSpec, ball_radius: float, samples: int = 4096, horizon: float = 40.0) -> float:
    """Sampled sup of ||g|| / (||x|| + ||c1|| + ||c2||) over a ball.

    Points come from unscrambled Halton sequences. The ratio can peak where
    some of the blocks x, c1, c2 vanish, so the samples are split over every
    nonempty set of active blocks, the others pinned at zero. A Caputo block
    that g never reads stays at zero throughout. Denominators below 1e-9 are
    skipped.
    """
    if not ball_radius > 0:
        raise ValueError("ball_radius must be positive")
    if samples < 1000:
        raise ValueError("need at least 1000 samples")
    n = spec.n
    use1, use2 = spec.uses_history
    uses_t = any("t" in free_vars(e) for e in spec.g)
    candidates = [0] + ([1] if use1 else []) + ([2] if use2 else [])
    subsets = [c for r in range(len(candidates), 0, -1) for c in combinations(candidates, r)]
    g = compile_g(spec)
    best = 0.0
    for j, active in enumerate(subsets):
        # the full set gets half the budget, the faces share the rest
        count = samples if len(subsets) == 1 else (samples // 2 if j == 0 else samples // (2 * (len(subsets) - 1)))
        dim = n * len(active) + 1 + uses_t
        pts = qmc.Halton(d=dim, scramble=False).random(count + 1)[1:]
        for row in pts:
            raw = 2.0 * row[: n * len(active)] - 1.0
            blocks = [np.zeros(n), np.zeros(n), np.zeros(n)]
            for i, b in enumerate(active):
                blocks[b] = raw[i * n:(i + 1) * n]
            total = sum(float(np.linalg.norm(b)) for b in blocks)
            if total == 0.0:
                continue
            rho = row[n * len(active)] ** (1.0 / (n * len(active)))
            scale = rho * ball_radius / total
            x, c1, c2 = (b * scale for b in blocks)
            denom = float(np.linalg.norm(x) + np.linalg.norm(c1) + np.linalg.norm(c2))
            if denom < 1e-9:
                continue
            t = float(row[-1] * horizon) if uses_t else 0.0
            try:
                val = float(np.linalg.norm(g(t, x, c1, c2)))
            except ArithmeticError as exc:
                raise type(exc)(f"{exc} at t={t}, x={x.tolist()}, c1={c1.tolist()}, c2={c2.tolist()}") from exc
            best = max(best, val / denom)
    return best


# --- certificate ---------------------------------------------------------------------

def certify(
    cls: ClosedLoopSystem,
    horizon: float = 40.0,
    ball_radius: float = 0.5,
    samples: int = 4096,
    literal_M3: float | None = None,
) -> StabilityCertificate:
    """Check the eigenvalue and gain-margin conditions and estimate the constants.

    ``literal_M3`` replaces the estimated M3 in the diagonal-entry reading
    only, so a published constant can be replayed next to the estimate.
    """
    if not (horizon > 0 and ball_radius > 0):
        raise ValueError("horizon and ball_radius must be positive")
    inv_spec = spectral_norm(cls.M_inv)
    inv_lit = float(np.max(np.diag(cls.M_inv)))
    notes = [
        "M, M1, M2 are numerical estimates on [0, horizon] and the sampled ball; "
        "the verdict is not a proof",
        "the literal reading takes max{(I-K)^-1} as the largest diagonal entry; "
        "it is not an operator norm and does not govern the verdict",
    ]
    common = dict(inv_norm_spectral=inv_spec, inv_norm_paper_literal=inv_lit, horizon=horizon,
                  ball_radius=ball_radius, literal_M3=literal_M3)
    try:
        spectrum = eigenvalues(cls.M_inv_A)
    except EigenConvergenceError as exc:
        return StabilityCertificate(None, None, None, None, None, None, verdict="inconclusive",
                                    notes=tuple(notes + [f"eigenvalues: {exc}"]), **common)
    omega = -spectrum.max_real_part
    M1 = estimate_M1(cls.base.delay_kernel, horizon)
    if _kernel_sup_at_end(cls.base.delay_kernel, horizon, M1):
        notes.append(f"|kernel| is largest at the horizon end; M1 = {M1:g} holds only on [0, {horizon:g}]")
    M2 = estimate_M2(cls.base, ball_radius, samples, horizon)
    if omega <= 0:
        notes.append(f"spectral abscissa {-omega:.6g} >= 0: closed-loop matrix is not Hurwitz")
        return StabilityCertificate(spectrum, omega, None, M1, M2, None, verdict="failed",
                                    notes=tuple(notes), **common)
    try:
        M = estimate_M(cls.M_inv_A, omega, horizon)
    except (EstimationError, MatrixError) as exc:
        return StabilityCertificate(spectrum, omega, None, M1, M2, None, verdict="inconclusive",
                                    notes=tuple(notes + [f"M: {exc}"]), **common)
    M3 = M * M1 * M2
    verdict = "certified_numerically" if omega > M3 * inv_spec else "failed"
    if verdict == "failed":
        notes.append(f"gain margin violated: omega = {omega:.6g} <= M3 * ||(I-K)^-1|| = {M3 * inv_spec:.6g}")
    return StabilityCertificate(spectrum, omega, M, M1, M2, M3, verdict=verdict, notes=tuple(notes), **common)


def compare_with_printed(cert: StabilityCertificate, printed: Mapping[str, Any], inverse: np.ndarray | None = None) -> list[str]:
    """Notes listing where printed reference values disagree with the recomputation."""
    notes = []
    if cert.eigenvalues is not None and "closed_loop_real_parts" in printed:
        got = sorted(cert.eigenvalues.real_parts)
        ref = sorted(printed["closed_loop_real_parts"])
        worst = max(abs(a - b) for a, b in zip(got, ref))
        notes.append(f"eigenvalue real parts recomputed {[round(v, 6) for v in got]} vs printed {ref} "
                     f"(max deviation {worst:.4g})")
    if inverse is not None and "inverse_I_minus_K" in printed:
        ref = np.array(printed["inverse_I_minus_K"], dtype=float)
        worst = float(np.abs(ref - inverse).max())
        notes.append(f"printed (I-K)^-1 differs from the exact inverse by up to {worst:.4g} in one entry")
    if "M3_times_max_inverse" in printed and cert.literal_gain is not None:
        notes.append(f"M3 * max{{(I-K)^-1}} printed as {printed['M3_times_max_inverse']} "
                     f"(uses a negative (3,3) entry); exact diagonal reading gives {cert.literal_gain:.6g}")
    return notes


# --- bounds ---------------------------------------------------------------------------

def _safe_exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def decay_envelope(cert: StabilityCertificate, x0_norm: float, k1_sup: float, k2_sup: float, t: float) -> float:
    """(M |x0| + M3 (e^{wt}-1)/w |(I-K)^-1| (k1 + k2)) e^{(M3 |(I-K)^-1| - w) t}."""
    if cert.verdict == "failed" or cert.M is None or cert.M3 is None or cert.omega is None:
        raise ValueError("decay envelope needs a certificate with estimated constants")
    if t < 0:
        raise ValueError("t must be >= 0")
    w = cert.omega
    gain = cert.M3 * cert.inv_norm_spectral
    k = k1_sup + k2_sup
    # (e^{wt} - 1)/w * e^{(gain - w)t} rewritten as (1 - e^{-wt})/w * e^{gain t}
    out = cert.M * x0_norm * _safe_exp((gain - w) * t)
    if gain * k > 0:
        out += _safe_exp(math.log(gain * k / w) + gain * t) * -math.expm1(-w * t)
    return out


@dataclass(frozen=True)
class GronwallInstance:
    Z: float
    u: float
    alpha: float

    def __post_init__(self):
        if self.Z < 0 or self.u < 0:
            raise ValueError("Z and u must be nonnegative")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")


def gronwall_bound(gi: GronwallInstance, t: float) -> float:
    """Z * E_alpha(Gamma(alpha) u t^alpha)."""
    if t < 0:
        raise ValueError("t must be >= 0")
    z = gamma_fn(gi.alpha) * gi.u * t**gi.alpha
    return gi.Z * mittag_leffler(MLParams(gi.alpha, 1.0), z).value


def perturbation_bound(M: float, w: float, normB: float, t: float) -> float:
    """M e^{(w + M ||B||) t}."""
    if M < 1 or normB < 0 or t < 0:
        raise ValueError("need M >= 1, normB >= 0, t >= 0")
    return M * _safe_exp((w + M * normB) * t)
