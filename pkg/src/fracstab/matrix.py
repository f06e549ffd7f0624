"""Small dense real linear algebra used by the closed-loop transform and the
stability certificate.

Matrices are plain 2-d float ``numpy`` arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

PIVOT_RTOL = 1e-13
EXPM_OVERFLOW = 1e300


class MatrixError(ArithmeticError):
    pass


class SingularMatrixError(MatrixError):
    def __init__(self, pivot_index: int, pivot: float):
        super().__init__(f"matrix is singular to working precision (pivot {pivot_index}: {pivot:.3e})")
        self.pivot_index = pivot_index
        self.pivot = pivot


class EigenConvergenceError(MatrixError):
    pass


class NormConvergenceError(MatrixError):
    pass


class ExpmOverflowError(MatrixError):
    pass


def as_matrix(m) -> np.ndarray:
    """Validate and copy ``m`` into a square float64 array."""
    a = np.array(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    return a


def lu_factor(m) -> tuple[np.ndarray, np.ndarray, int]:
    """LU with partial pivoting.

    Returns ``(lu, perm, swaps)`` with unit-lower L and U packed in ``lu`` and
    ``m[perm] = L @ U``. Raises :class:`SingularMatrixError` when a pivot falls
    below ``1e-13 * ||m||_inf``.
    """
    a = as_matrix(m)
    n = a.shape[0]
    scale = np.abs(a).sum(axis=1).max() if n else 0.0
    perm = np.arange(n)
    swaps = 0
    for k in range(n):
        p = k + int(np.argmax(np.abs(a[k:, k])))
        if abs(a[p, k]) <= PIVOT_RTOL * scale or scale == 0.0:
            raise SingularMatrixError(k, float(a[p, k]))
        if p != k:
            a[[k, p]] = a[[p, k]]
            perm[[k, p]] = perm[[p, k]]
            swaps += 1
        a[k + 1:, k] /= a[k, k]
        a[k + 1:, k + 1:] -= np.outer(a[k + 1:, k], a[k, k + 1:])
    return a, perm, swaps


def lu_solve(lu: np.ndarray, perm: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = lu.shape[0]
    y = np.array(b, dtype=float)[perm]
    for i in range(n):
        y[i] -= lu[i, :i] @ y[:i]
    for i in range(n - 1, -1, -1):
        y[i] = (y[i] - lu[i, i + 1:] @ y[i + 1:]) / lu[i, i]
    return y


def invert(m) -> np.ndarray:
    """Inverse through LU with partial pivoting.

    >>> invert([[2.0, 0.0], [0.0, 4.0]])
    array([[0.5 , 0.  ],
           [0.  , 0.25]])
    """
    lu, perm, _ = lu_factor(m)
    n = lu.shape[0]
    return lu_solve(lu, perm, np.eye(n))


def determinant(m) -> float:
    try:
        lu, _, swaps = lu_factor(m)
    except SingularMatrixError:
        return 0.0
    return float((-1) ** swaps * np.prod(np.diag(lu)))


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: tuple[complex, ...]

    @property
    def max_real_part(self) -> float:
        return max(ev.real for ev in self.eigenvalues)

    @property
    def real_parts(self) -> tuple[float, ...]:
        return tuple(ev.real for ev in self.eigenvalues)


def eigenvalues(m, residual_rtol: float = 1e-8) -> Spectrum:
    """Eigenvalues of a real square matrix.

    LAPACK ``geev`` (Hessenberg reduction followed by shifted QR) does the
    work. Each eigenpair is then checked against its residual and conjugate
    pairs are made exact so the imaginary parts cancel in sums.
    """
    a = as_matrix(m)
    n = a.shape[0]
    try:
        vals, vecs = np.linalg.eig(a)
    except np.linalg.LinAlgError as exc:
        raise EigenConvergenceError(f"QR iteration did not converge: {exc}") from exc
    scale = max(np.linalg.norm(a, 2), np.finfo(float).tiny)
    for lam, v in zip(vals, vecs.T):
        v = v / np.linalg.norm(v)
        res = np.linalg.norm(a @ v - lam * v)
        if res > residual_rtol * scale:
            raise EigenConvergenceError(f"eigenpair residual {res:.2e} exceeds tolerance for eigenvalue {lam}")
    out = []
    for lam in vals:
        lam = complex(lam)
        if abs(lam.imag) <= 1e-14 * scale:
            lam = complex(lam.real, 0.0)
        out.append(lam)
    # pair conjugates exactly
    cplx = sorted((z for z in out if z.imag > 0), key=lambda z: (z.real, z.imag))
    real = sorted((z for z in out if z.imag == 0), key=lambda z: z.real)
    paired = []
    for z in cplx:
        paired.extend([z, z.conjugate()])
    if len(paired) + len(real) != n:
        raise EigenConvergenceError("complex eigenvalues did not come in conjugate pairs")
    return Spectrum(tuple(sorted(real + paired, key=lambda z: (-z.real, -z.imag))))


_PADE_Q = 6
_PADE_C = [
    math.factorial(2 * _PADE_Q - k) * math.factorial(_PADE_Q)
    / (math.factorial(2 * _PADE_Q) * math.factorial(k) * math.factorial(_PADE_Q - k))
    for k in range(_PADE_Q + 1)
]


def expm(m, t: float = 1.0) -> np.ndarray:
    """exp(m t) by scaling and squaring with a diagonal [6/6] Pade approximant.

    The argument is halved until its infinity norm is at most 1/2, where the
    [6/6] approximant is accurate to roughly unit roundoff.
    """
    a = as_matrix(m) * float(t)
    n = a.shape[0]
    if not np.all(np.isfinite(a)):
        raise ExpmOverflowError("m * t is not finite")
    norm = np.abs(a).sum(axis=1).max() if n else 0.0
    s = max(0, math.ceil(math.log2(norm / 0.5))) if norm > 0.5 else 0
    a = a / 2.0**s
    eye = np.eye(n)
    power = eye.copy()
    num = _PADE_C[0] * eye
    den = _PADE_C[0] * eye
    for k in range(1, _PADE_Q + 1):
        power = power @ a
        num = num + _PADE_C[k] * power
        den = den + (-1) ** k * _PADE_C[k] * power
    x = np.linalg.solve(den, num)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(s):
            x = x @ x
            if not np.all(np.isfinite(x)) or np.abs(x).max() > EXPM_OVERFLOW:
                raise ExpmOverflowError("matrix exponential overflowed during squaring")
    if np.abs(x).max(initial=0.0) > EXPM_OVERFLOW:
        raise ExpmOverflowError("matrix exponential overflowed")
    return x


def spectral_norm(m, rtol: float = 1e-10, max_iter: int = 10_000) -> float:
    """Largest singular value by power iteration on m^T m.

    The iteration stops once the geometric tail of the Rayleigh-quotient
    updates is below roundoff. When the top two singular values are so close
    that the contraction ratio stays above 0.9 (for example exp(m t) at tiny
    t), the symmetric eigensolver finishes the job instead.
    """
    a = as_matrix(m)
    g = a.T @ a
    if not np.any(g):
        return 0.0
    # start from the heaviest column of m^T m, plus a fixed tilt so the start
    # is not orthogonal to the dominant direction by symmetry
    v = g[:, int(np.argmax(np.linalg.norm(g, axis=0)))].copy()
    v += 1e-3 * np.linspace(1.0, 2.0, len(v))
    v /= np.linalg.norm(v)
    lam = float(v @ g @ v)
    prev = math.inf
    for it in range(max_iter):
        w = g @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        new = float(v @ g @ v)
        change = abs(new - lam)
        if change <= 1e-15 * new:
            return math.sqrt(new)
        ratio = change / prev
        if ratio < 1.0 and change <= rtol * new and change * ratio / (1.0 - ratio) <= 1e-14 * new:
            return math.sqrt(new)
        if it >= 30 and ratio > 0.9:
            break
        prev, lam = change, new
    top = float(np.linalg.eigvalsh(g)[-1])
    if not math.isfinite(top):
        raise NormConvergenceError("power iteration and eigensolver both failed")
    return math.sqrt(max(top, lam, 0.0))


def inf_norm(m) -> float:
    return float(np.abs(as_matrix(m)).sum(axis=1).max())
