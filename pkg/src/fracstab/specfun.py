"""Real-argument special functions: Gamma, log-Gamma and Mittag-Leffler.

The Mittag-Leffler function is summed from its power series

    E_{a,b}(z) = sum_r z^r / Gamma(r*a + b)

with a running tail bound. Positive arguments are summed in double precision
with Neumaier compensation. Negative arguments whose largest term dwarfs the
result are re-summed in extended precision (mpmath) so the cancellation does
not eat the answer.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import mpmath

ML_Z_MAX = 50.0
ML_MAX_TERMS = 10_000
ML_REL_TOL = 1e-15
ML_ABS_TOL = 1e-300


class SpecialFunctionError(ValueError):
    """Base class for special-function domain and convergence failures."""


class PoleError(SpecialFunctionError):
    pass


class MLDomainError(SpecialFunctionError):
    pass


class MLConvergenceError(SpecialFunctionError):
    pass


@dataclass(frozen=True)
class MLParams:
    alpha: float
    beta: float = 1.0

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise MLDomainError(f"alpha must be a finite positive real, got {self.alpha!r}")
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise MLDomainError(f"beta must be a finite positive real, got {self.beta!r}")


@dataclass(frozen=True)
class EvalReport:
    value: float
    terms_used: int
    truncation_bound: float


def gamma_fn(x: float) -> float:
    """Gamma function for real ``x``; raises :class:`PoleError` at 0, -1, -2, ..."""
    x = float(x)
    if x <= 0 and x == math.floor(x):
        raise PoleError(f"Gamma has a pole at x = {x:g}")
    try:
        return math.gamma(x)
    except OverflowError:
        return math.inf


def log_gamma(x: float) -> float:
    """Natural log of Gamma(x) for x > 0."""
    x = float(x)
    if not x > 0:
        raise SpecialFunctionError(f"log_gamma needs x > 0, got {x!r}")
    return math.lgamma(x)


def _neumaier_add(s: float, c: float, term: float) -> tuple[float, float]:
    t = s + term
    if abs(s) >= abs(term):
        c += (s - t) + term
    else:
        c += (term - t) + s
    return t, c


def _ratio_to_next(r: int, alpha: float, beta: float, absz: float) -> float:
    # |t_{r+1} / t_r|; nonincreasing in r because log Gamma is convex
    return absz * math.exp(math.lgamma(r * alpha + beta) - math.lgamma((r + 1) * alpha + beta))


def _series_double(alpha: float, beta: float, z: float) -> tuple[float, int, float, float]:
    """Float series. Returns (value, terms, tail bound, largest |term|)."""
    if z == 0.0:
        return 1.0 / gamma_fn(beta), 1, 0.0, abs(1.0 / gamma_fn(beta))
    logz = math.log(abs(z))
    negative = z < 0
    s = c = 0.0
    biggest = 0.0
    for r in range(ML_MAX_TERMS):
        mag = math.exp(r * logz - math.lgamma(r * alpha + beta))
        term = -mag if (negative and r % 2) else mag
        s, c = _neumaier_add(s, c, term)
        biggest = max(biggest, mag)
        q = _ratio_to_next(r, alpha, beta, abs(z))
        if q < 1.0:
            tail = mag * q / (1.0 - q)
            if tail <= ML_REL_TOL * abs(s + c) + ML_ABS_TOL:
                return s + c, r + 1, tail, biggest
    raise MLConvergenceError(
        f"Mittag-Leffler series did not settle within {ML_MAX_TERMS} terms "
        f"(alpha={alpha}, beta={beta}, z={z})"
    )


def _series_mp(alpha: float, beta: float, z: float, peak_log: float) -> tuple[float, int, float]:
    # one guard bit per binary order of magnitude of the largest term
    guard = max(0, math.ceil(peak_log / math.log(2)))
    with mpmath.workprec(96 + guard):
        a, b, zz = mpmath.mpf(alpha), mpmath.mpf(beta), mpmath.mpf(z)
        s = mpmath.mpf(0)
        zr = mpmath.mpf(1)
        for r in range(ML_MAX_TERMS):
            term = zr * mpmath.rgamma(r * a + b)
            s += term
            q = _ratio_to_next(r, alpha, beta, abs(z))
            if q < 1.0:
                tail = abs(term) * q / (1 - q)
                if tail <= ML_REL_TOL * abs(s) + ML_ABS_TOL:
                    return float(s), r + 1, float(tail)
            zr *= zz
    raise MLConvergenceError(
        f"Mittag-Leffler series did not settle within {ML_MAX_TERMS} terms "
        f"(alpha={alpha}, beta={beta}, z={z})"
    )


def _peak_log_term(alpha: float, beta: float, absz: float) -> float:
    """log of the largest |z^r / Gamma(r alpha + beta)|; terms fall after the peak."""
    logz = math.log(absz)
    r = 0
    while _ratio_to_next(r, alpha, beta, absz) >= 1.0:
        r += 1
        if r >= ML_MAX_TERMS:
            raise MLConvergenceError(
                f"Mittag-Leffler terms still growing after {ML_MAX_TERMS} terms "
                f"(alpha={alpha}, beta={beta}, z magnitude {absz})"
            )
    return r * logz - math.lgamma(r * alpha + beta)


def mittag_leffler(p: MLParams, z: float) -> EvalReport:
    """Two-parameter Mittag-Leffler function E_{alpha,beta}(z) for real z, |z| <= 50.

    Examples
    --------
    >>> round(mittag_leffler(MLParams(1.0, 1.0), 1.0).value, 12)
    2.718281828459
    """
    z = float(z)
    if not math.isfinite(z) or abs(z) > ML_Z_MAX:
        raise MLDomainError(f"|z| must be <= {ML_Z_MAX:g} for the series evaluator, got z={z!r}")
    peak = _peak_log_term(p.alpha, p.beta, abs(z)) if z != 0.0 else 0.0
    if z > 0 and peak > 709.0:
        raise MLDomainError(f"E_{{{p.alpha},{p.beta}}}({z}) exceeds the double-precision range")
    if z < 0 and peak > math.log(1e2):
        value, terms, tail = _series_mp(p.alpha, p.beta, z, peak)
        return EvalReport(value=value, terms_used=terms, truncation_bound=tail)
    value, terms, tail, biggest = _series_double(p.alpha, p.beta, z)
    # cancellation guard: a term 1e2 times the result already costs two digits
    if z < 0 and biggest > 1e2 * max(abs(value), 1e-300):
        value, terms, tail = _series_mp(p.alpha, p.beta, z, max(peak, math.log(biggest)))
    return EvalReport(value=value, terms_used=terms, truncation_bound=tail)


def ml_exp_ratio(alpha: float, a: float, grid: Iterable[float]) -> float:
    """max over ``grid`` of E_{alpha,1}(a t^alpha) / exp(a t).

    Diagnostic only: for a < 0 and alpha < 1 the ratio grows without bound
    as t increases, so no uniform constant is implied.
    """
    if not 0 < alpha <= 1:
        raise MLDomainError(f"alpha must lie in (0, 1], got {alpha!r}")
    ts = [float(t) for t in grid]
    if not ts:
        raise ValueError("grid must be nonempty")
    p = MLParams(alpha, 1.0)
    best = -math.inf
    for t in ts:
        if t < 0:
            raise ValueError(f"grid points must be >= 0, got {t!r}")
        e = mittag_leffler(p, a * t**alpha).value
        if e == 0.0:
            ratio = 0.0
        else:
            log_ratio = math.log(abs(e)) - a * t
            ratio = math.copysign(math.exp(log_ratio) if log_ratio < 709.0 else math.inf, e)
        best = max(best, ratio)
    return best
