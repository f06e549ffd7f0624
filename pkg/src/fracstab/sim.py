"""Fixed-step integration of the closed-loop system.

Heun's predictor-corrector on x' = (I-K)^-1 [A x + kernel(t) g(t, x, c1, c2)].
When g reads Caputo derivatives of the state (d1_*, d2_* variables) they are
carried along on-line with the L1 scheme: the predictor uses the history up
to the current step, the corrector appends the predicted increment. Otherwise
the Caputo tracks are computed once from the finished trajectory.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Sequence

import numpy as np

from .expr import ExprError
from .fracderiv import CaputoOrder, SampledFn, caputo_l1_track, l1_scale, l1_weights
from .model import ClosedLoopSystem
from .sim_config import SimConfig
from .stability import StabilityCertificate, decay_envelope

CONVERGED_RTOL = 1e-3
HISTORY_MAX_STEPS = 10**5

__all__ = [
    "SimConfig", "Trajectory", "SimulationError", "EnvelopeCheck",
    "integrate", "check_envelope", "step_refinement_error",
]


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    norm_track: np.ndarray
    k1_track: np.ndarray
    k2_track: np.ndarray
    outcome: str  # converged | diverged | completed
    final_time: float
    final_state: np.ndarray

    @property
    def n(self) -> int:
        return self.states.shape[1]

    @property
    def x0_norm(self) -> float:
        return float(np.linalg.norm(self.states[0]))

    def to_csv(self, dest: str | Path | IO[str]) -> None:
        """One row per recorded step: ``t,x1..xn,norm,k1,k2``."""
        header = ",".join(["t"] + [f"x{i + 1}" for i in range(self.n)] + ["norm", "k1", "k2"])
        cols = np.column_stack([self.times, self.states, self.norm_track, self.k1_track, self.k2_track])
        lines = [header] + [",".join(format(v, ".15g") for v in row) for row in cols]
        text = "\n".join(lines) + "\n"
        if isinstance(dest, (str, Path)):
            Path(dest).write_text(text, encoding="utf-8")
        else:
            dest.write(text)


class SimulationError(ArithmeticError):
    """Integration aborted; ``partial`` holds the trajectory up to ``step``."""

    def __init__(self, step: int, cause: Exception, partial: Trajectory):
        super().__init__(f"step {step} (t = {partial.final_time:g}): {cause}")
        self.step = step
        self.partial = partial


def _build(cls, cfg, full_states, last, outcome, c1_hist, c2_hist, online, x0_norm):
    stride = cfg.record_stride
    idx = np.arange(0, last + 1, stride)
    if outcome == "diverged" and idx[-1] != last:
        idx = np.append(idx, last)
    states = full_states[idx]
    if online:
        k1_full = np.linalg.norm(c1_hist[: last + 1], axis=1)
        k2_full = np.linalg.norm(c2_hist[: last + 1], axis=1)
    else:
        k1_full, k2_full = _posthoc_tracks(cls, cfg.dt, full_states[: last + 1])
    with np.errstate(over="ignore", invalid="ignore"):
        norms = np.linalg.norm(states, axis=1)
    if outcome is None:
        final_norm = float(np.linalg.norm(full_states[last]))
        outcome = "converged" if final_norm <= CONVERGED_RTOL * x0_norm else "completed"
    return Trajectory(
        times=idx.astype(float) * cfg.dt,
        states=states,
        norm_track=norms,
        k1_track=k1_full[idx],
        k2_track=k2_full[idx],
        outcome=outcome,
        final_time=last * cfg.dt,
        final_state=full_states[last].copy(),
    )


def _posthoc_tracks(cls: ClosedLoopSystem, h: float, states: np.ndarray):
    # a blown-up tail (inf/nan) gets NaN tracks; the finite prefix is exact
    finite = np.all(np.isfinite(states), axis=1)
    m = len(finite) if finite.all() else int(np.argmin(finite))
    tracks = []
    for alpha in (cls.base.alpha1, cls.base.alpha2):
        out = np.full(len(finite), np.nan)
        out[:m] = 0.0
        if m >= 2:
            order = CaputoOrder(alpha)
            comps = [caputo_l1_track(SampledFn(h, states[:m, i]), order).values for i in range(cls.n)]
            out[:m] = np.linalg.norm(np.column_stack(comps), axis=1)
        tracks.append(out)
    return tracks[0], tracks[1]


def integrate(cls: ClosedLoopSystem, cfg: SimConfig, x0: Sequence[float] | None = None) -> Trajectory:
    """Integrate from ``x0`` (default: the spec's) over [0, cfg.t_end]."""
    n = cls.n
    x = np.array(cls.base.x0 if x0 is None else x0, dtype=float)
    if x.shape != (n,):
        raise ValueError(f"x0 must have length {n}")
    steps = cfg.steps
    dt = cfg.dt
    use1, use2 = cls.base.uses_history
    online = use1 or use2
    if online and steps > HISTORY_MAX_STEPS:
        raise ValueError(f"history-dependent g limits runs to {HISTORY_MAX_STEPS} steps, got {steps}")

    full = np.empty((steps + 1, n))
    full[0] = x
    x0_norm = float(np.linalg.norm(x))
    cap = cfg.divergence_cap
    MA, Mi = cls.M_inv_A, cls.M_inv
    g, kern = cls._g, cls._kernel
    zeros = np.zeros(n)

    if online:
        a1, a2 = cls.base.alpha1, cls.base.alpha2
        b1, b2 = l1_weights(a1, steps + 1), l1_weights(a2, steps + 1)
        s1, s2 = l1_scale(a1, dt), l1_scale(a2, dt)
        diffs = np.empty((steps, n))
        c1_hist = np.zeros((steps + 1, n))
        c2_hist = np.zeros((steps + 1, n))
    else:
        c1_hist = c2_hist = None

    def f(t, y, c1, c2):
        return MA @ y + kern(t) * (Mi @ np.array(g(t, y, c1, c2)))

    c1 = c2 = zeros
    k = 0
    try:
        for k in range(steps):
            t = k * dt
            f0 = f(t, x, c1, c2)
            xp = x + dt * f0
            if online:
                if k:
                    past = diffs[k - 1::-1]
                    h1 = b1[1:k + 1] @ past
                    h2 = b2[1:k + 1] @ past
                else:
                    h1 = h2 = zeros
                cp1 = s1 * (h1 + (xp - x)) if use1 else zeros
                cp2 = s2 * (h2 + (xp - x)) if use2 else zeros
            else:
                cp1 = cp2 = zeros
            f1 = f(t + dt, xp, cp1, cp2)
            xn = x + 0.5 * dt * (f0 + f1)
            full[k + 1] = xn
            if online:
                diffs[k] = xn - x
                c1 = s1 * (h1 + diffs[k])
                c2 = s2 * (h2 + diffs[k])
                c1_hist[k + 1], c2_hist[k + 1] = c1, c2
            x = xn
            with np.errstate(over="ignore", invalid="ignore"):
                nrm = math.sqrt(float(xn @ xn))
            if not nrm <= cap:
                return _build(cls, cfg, full, k + 1, "diverged", c1_hist, c2_hist, online, x0_norm)
    except (ExprError, ArithmeticError) as exc:
        partial = _build(cls, cfg, full, k, "completed", c1_hist, c2_hist, online, x0_norm)
        raise SimulationError(k, exc, partial) from exc
    return _build(cls, cfg, full, steps, None, c1_hist, c2_hist, online, x0_norm)


@dataclass(frozen=True)
class EnvelopeCheck:
    holds: bool
    violated_at: float | None


def check_envelope(traj: Trajectory, cert: StabilityCertificate, slack: float = 1.0) -> EnvelopeCheck:
    """Compare ||x(t)|| with ``slack`` times the certified decay envelope.

    The envelope takes the suprema of the trajectory's Caputo tracks.
    """
    if cert.verdict != "certified_numerically":
        raise ValueError(f"envelope needs a certified system, verdict is {cert.verdict!r}")
    if slack < 1:
        raise ValueError("slack must be >= 1")
    x0n = traj.x0_norm
    k1 = float(np.nanmax(traj.k1_track)) if traj.k1_track.size else 0.0
    k2 = float(np.nanmax(traj.k2_track)) if traj.k2_track.size else 0.0
    for t, nrm in zip(traj.times, traj.norm_track):
        if nrm > slack * decay_envelope(cert, x0n, k1, k2, float(t)):
            return EnvelopeCheck(False, float(t))
    return EnvelopeCheck(True, None)


def step_refinement_error(cls: ClosedLoopSystem, cfg: SimConfig, x0: Sequence[float] | None = None) -> float:
    """Max-norm state difference between runs at dt and dt/2 on the dt grid."""
    coarse = integrate(cls, SimConfig(cfg.t_end, cfg.dt, cfg.divergence_cap), x0)
    fine = integrate(cls, SimConfig(cfg.t_end, cfg.dt / 2, cfg.divergence_cap), x0)
    m = min(coarse.states.shape[0], (fine.states.shape[0] + 1) // 2)
    diff = coarse.states[:m] - fine.states[: 2 * m - 1: 2]
    return float(np.abs(diff).max())
