"""Caputo derivatives of order 0 < alpha < 1 with lower terminal 0.

Two routes: the closed-form power rule for t**beta, and the L1 scheme on a
uniform grid,

    D^alpha f(t_k) ~ h^-alpha / Gamma(2 - alpha) * sum_{j<k} b_j (f_{k-j} - f_{k-j-1}),
    b_j = (j+1)^(1-alpha) - j^(1-alpha),

which is exact for piecewise-linear f and has error O(h^(2-alpha)) for C^2 f.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.signal import fftconvolve

from .specfun import PoleError, gamma_fn

# above this many samples the full-track convolution goes through the FFT
FFT_THRESHOLD = 4096


@dataclass(frozen=True)
class CaputoOrder:
    alpha: float

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"Caputo order must lie strictly in (0, 1), got {self.alpha!r}")


@dataclass(frozen=True, eq=False)
class SampledFn:
    """f(0), f(h), ..., f(Nh) on a uniform grid."""

    h: float
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if not self.h > 0:
            raise ValueError(f"step must be positive, got {self.h!r}")
        if vals.ndim != 1 or vals.size < 2:
            raise ValueError("need a 1-d sample with at least two points")
        if not np.all(np.isfinite(vals)):
            raise ValueError("samples must be finite")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, f, h: float, n: int) -> "SampledFn":
        t = h * np.arange(n + 1)
        return cls(h, np.asarray(f(t), dtype=float))

    @property
    def n(self) -> int:
        return self.values.size - 1

    @property
    def times(self) -> np.ndarray:
        return self.h * np.arange(self.values.size)


def caputo_power_rule(order: CaputoOrder, beta: float) -> tuple[float, float | None]:
    """Caputo derivative of t**beta as ``(coefficient, exponent)``.

    Constants (and integer powers below 1, which is only beta = 0) are
    annihilated and return ``(0.0, None)``.

    >>> c, p = caputo_power_rule(CaputoOrder(2/3), 2)
    >>> round(c, 2), round(p, 4)
    (1.68, 1.3333)
    """
    if beta < 0:
        raise ValueError(f"beta must be >= 0, got {beta!r}")
    if beta == 0:
        return 0.0, None
    shifted = beta - order.alpha + 1.0
    if shifted <= 0 and shifted == math.floor(shifted):
        raise PoleError(f"Gamma pole at beta - alpha + 1 = {shifted:g}")
    return gamma_fn(beta + 1.0) / gamma_fn(shifted), beta - order.alpha


def l1_weights(alpha: float, count: int) -> np.ndarray:
    """b_j = (j+1)^(1-alpha) - j^(1-alpha) for j = 0..count-1, cancellation free."""
    j = np.arange(count, dtype=float)
    p = 1.0 - alpha
    b = np.empty(count)
    if count:
        b[0] = 1.0
        jj = j[1:]
        b[1:] = jj**p * np.expm1(p * np.log1p(1.0 / jj))
    return b


def l1_scale(alpha: float, h: float) -> float:
    return h ** (-alpha) / gamma_fn(2.0 - alpha)


def caputo_l1(f: SampledFn, order: CaputoOrder, k: int) -> float:
    """L1 approximation of the Caputo derivative at t_k = k h."""
    if not 1 <= k <= f.n:
        raise IndexError(f"k must lie in [1, {f.n}], got {k}")
    diffs = np.diff(f.values[: k + 1])
    b = l1_weights(order.alpha, k)
    return l1_scale(order.alpha, f.h) * float(b @ diffs[::-1])


def caputo_l1_track(f: SampledFn, order: CaputoOrder) -> SampledFn:
    """L1 derivative at every grid point; value 0 at t = 0.

    Direct summation is O(N^2); long tracks use an FFT convolution of the
    same sums.
    """
    diffs = np.diff(f.values)
    n = diffs.size
    b = l1_weights(order.alpha, n)
    if n > FFT_THRESHOLD:
        conv = fftconvolve(b, diffs)[:n]
    else:
        conv = np.convolve(b, diffs)[:n]
    out = np.empty(n + 1)
    out[0] = 0.0
    out[1:] = l1_scale(order.alpha, f.h) * conv
    return SampledFn(f.h, out)


def empirical_order(errors_at_h: Sequence[tuple[float, float]]) -> float:
    """Least-squares slope of log(err) against log(h).

    Returns ``inf`` when any error is exactly zero (the scheme is exact).

    >>> empirical_order([(0.1, 1e-2), (0.05, 2.5e-3)])
    2.0
    """
    pts = [(float(h), float(e)) for h, e in errors_at_h]
    if len(pts) < 2:
        raise ValueError("need at least two (h, err) points")
    hs = [h for h, _ in pts]
    if any(b >= a for a, b in zip(hs, hs[1:])):
        raise ValueError("h must be strictly decreasing")
    if any(e == 0.0 for _, e in pts):
        return math.inf
    if any(e < 0 or h <= 0 for h, e in pts):
        raise ValueError("h and err must be positive")
    x = np.log([h for h, _ in pts])
    y = np.log([e for _, e in pts])
    slope = np.polyfit(x, y, 1)[0]
    return float(round(slope, 12))
