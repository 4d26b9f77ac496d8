"""Characteristic-polynomial coefficients, eigenvalues and sigma-ratio checks.

Sign convention: for an n x n matrix J,

    chi(tau) = tau^n + sigma_1 tau^(n-1) + ... + sigma_n,

so sigma_1 = -trace(J) and sigma_n = (-1)^n det(J).  A Hurwitz-stable matrix
therefore has all sigma_k > 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations, permutations
from typing import Sequence

import numpy as np

__all__ = [
    "CharPoly",
    "Spectrum",
    "IdentityReport",
    "charpoly_coeffs",
    "sigma_batch",
    "faddeev_leverrier",
    "roots_from_sigma",
    "eigenvalues",
    "check_dimensionless",
    "symmetric_identity_check",
    "hurwitz_stable",
    "companion",
    "sigma_noise_scale",
]


@dataclass(frozen=True)
class CharPoly:
    sigma: tuple[float, ...]

    @property
    def n(self) -> int:
        return len(self.sigma)

    def __getitem__(self, k: int) -> float:
        """sigma_k with sigma_0 = 1."""
        if k == 0:
            return 1.0
        if not 1 <= k <= self.n:
            raise IndexError(k)
        return self.sigma[k - 1]

    def __call__(self, tau):
        out = 1.0 + 0j * tau
        for c in self.sigma:
            out = out * tau + c
        return out


def faddeev_leverrier(J: np.ndarray) -> np.ndarray:
    """Faddeev-LeVerrier recursion over a stack of matrices: (..., n, n) -> (..., n).

    Cheap, but the trace recursion cancels badly when the eigenvalues spread
    over many decades; ``sigma_batch`` defaults to principal minors instead.
    """
    J = _square_stack(J)
    n = J.shape[-1]
    eye = np.eye(n)
    out = np.empty(J.shape[:-1])
    M = np.zeros_like(J)
    c = np.ones(J.shape[:-2])
    for k in range(1, n + 1):
        M = J @ M + c[..., None, None] * eye
        c = -np.trace(J @ M, axis1=-2, axis2=-1) / k
        out[..., k - 1] = c
    return out


def _principal_minors(J: np.ndarray) -> np.ndarray:
    n = J.shape[-1]
    out = np.empty(J.shape[:-1])
    for k in range(1, n + 1):
        total = np.zeros(J.shape[:-2])
        for idx in combinations(range(n), k):
            if k == 1:
                total = total + J[..., idx[0], idx[0]]
            elif k == 2:
                i, j = idx
                total = total + (J[..., i, i] * J[..., j, j] - J[..., i, j] * J[..., j, i])
            else:
                sub = J[..., list(idx), :][..., :, list(idx)]
                total = total + np.linalg.det(sub)
        out[..., k - 1] = (-1) ** k * total
    return out


def _square_stack(J) -> np.ndarray:
    J = np.asarray(J, dtype=float)
    if J.ndim < 2 or J.shape[-1] != J.shape[-2]:
        raise ValueError(f"expected square matrices, got shape {J.shape}")
    return J


def sigma_batch(J: np.ndarray, method: str = "minors") -> np.ndarray:
    """sigma_1..sigma_n for a stack of matrices: (..., n, n) -> (..., n).

    ``method="minors"`` sums signed principal minors (sigma_k is (-1)^k times
    the k-th elementary symmetric function of the eigenvalues);
    ``method="faddeev"`` runs the Faddeev-LeVerrier recursion.
    """
    J = _square_stack(J)
    if method == "minors":
        return _principal_minors(J)
    if method == "faddeev":
        return faddeev_leverrier(J)
    raise ValueError(f"unknown method {method!r}")


def _permanent(A: np.ndarray) -> np.ndarray:
    k = A.shape[-1]
    total = np.zeros(A.shape[:-2])
    for perm in permutations(range(k)):
        term = np.ones(A.shape[:-2])
        for i, j in enumerate(perm):
            term = term * A[..., i, j]
        total = total + term
    return total


def sigma_noise_scale(J) -> np.ndarray:
    """Magnitude scale of each sigma_k: the sigma_k of |J| computed without signs.

    Sum over k-subsets of the permanent of the principal submatrix of |J|.
    It bounds every product entering sigma_k, so ``1e-9 * scale[k]`` is a
    dimensionally consistent "zero" for sigma_k.
    """
    A = np.abs(_square_stack(J))
    n = A.shape[-1]
    out = np.empty(A.shape[:-1])
    for k in range(1, n + 1):
        total = np.zeros(A.shape[:-2])
        for idx in combinations(range(n), k):
            total = total + _permanent(A[..., list(idx), :][..., :, list(idx)])
        out[..., k - 1] = total
    return out


def charpoly_coeffs(J, method: str = "minors") -> CharPoly:
    J = np.asarray(J, dtype=float)
    if J.ndim != 2 or J.shape[0] != J.shape[1]:
        raise ValueError(f"charpoly_coeffs needs a square matrix, got shape {J.shape}")
    return CharPoly(tuple(float(v) for v in sigma_batch(J, method)))


def companion(sigma: Sequence[float]) -> np.ndarray:
    """Companion matrix whose characteristic polynomial has the given sigma."""
    n = len(sigma)
    C = np.zeros((n, n))
    C[0, :] = -np.asarray(sigma, dtype=float)
    C[1:, :-1] = np.eye(n - 1)
    return C


# ---------------------------------------------------------------- roots

def _quadratic(b: float, c: float) -> list[complex]:
    # tau^2 + b tau + c, cancellation-free form
    disc = b * b - 4 * c
    if disc >= 0:
        q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
        if q == 0:
            return [0j, 0j]
        return [complex(q), complex(c / q)]
    re = -0.5 * b
    im = 0.5 * math.sqrt(-disc)
    return [complex(re, im), complex(re, -im)]


def _cubic(a: float, b: float, c: float) -> list[complex]:
    # tau^3 + a tau^2 + b tau + c; trigonometric form for three real roots
    p = b - a * a / 3
    q = 2 * a ** 3 / 27 - a * b / 3 + c
    shift = -a / 3
    if p == 0 and q == 0:
        return [complex(shift)] * 3
    disc = (q / 2) ** 2 + (p / 3) ** 3
    if disc < 0:
        r = 2 * math.sqrt(-p / 3)
        arg = max(-1.0, min(1.0, 3 * q / (p * r)))
        phi = math.acos(arg) / 3
        return [complex(r * math.cos(phi - 2 * math.pi * k / 3) + shift) for k in range(3)]
    sq = math.sqrt(disc)
    u = np.cbrt(-q / 2 + sq)
    v = np.cbrt(-q / 2 - sq)
    w = complex(-0.5, math.sqrt(3) / 2)
    return [complex(u + v + shift), u * w + v * w.conjugate() + shift,
            u * w.conjugate() + v * w + shift]


def _polish(sigma: Sequence[float], roots: list[complex], iters: int = 6) -> list[complex]:
    """Newton refinement on chi; keeps a step only if the residual shrinks."""
    poly = CharPoly(tuple(sigma))
    coeffs = [1.0, *sigma]
    deriv = [c * (len(coeffs) - 1 - i) for i, c in enumerate(coeffs[:-1])]
    out = []
    for z in roots:
        fz = poly(z)
        for _ in range(iters):
            dz = 0j
            for c in deriv:
                dz = dz * z + c
            if dz == 0:
                break
            z_new = z - fz / dz
            f_new = poly(z_new)
            if abs(f_new) >= abs(fz):
                break
            z, fz = z_new, f_new
        out.append(z)
    return out


def _aberth(sigma: Sequence[float], tol: float = 1e-14, max_iter: int = 500) -> list[complex]:
    n = len(sigma)
    radius = 2 * max(abs(c) ** (1.0 / (k + 1)) for k, c in enumerate(sigma))
    if radius == 0:
        return [0j] * n
    coeffs = np.array([1.0, *sigma], dtype=complex)
    dcoeffs = np.polyder(coeffs)
    off = ~np.eye(n, dtype=bool)
    z = 0.5 * radius * np.exp(1j * (2 * np.pi * np.arange(n) / n + 0.4))
    for _ in range(max_iter):
        p = np.polyval(coeffs, z)
        dp = np.polyval(dcoeffs, z)
        dp = np.where(dp == 0, 1e-300, dp)
        ratio = p / dp
        diff = np.where(off, z[:, None] - z[None, :], 1.0)
        s = np.where(off, 1.0 / diff, 0.0).sum(axis=1)
        w = ratio / (1 - ratio * s)
        z = z - w
        if np.all(np.abs(w) <= tol * np.maximum(1.0, np.abs(z))):
            break
    return [complex(v) for v in z]


def roots_from_sigma(sigma: Sequence[float]) -> list[complex]:
    """Roots of tau^n + sigma_1 tau^(n-1) + ... + sigma_n."""
    n = len(sigma)
    if n == 0:
        return []
    if n == 1:
        return [complex(-sigma[0])]
    if n == 2:
        roots = _quadratic(sigma[0], sigma[1])
    elif n == 3:
        roots = _cubic(*sigma)
    else:
        roots = _aberth(sigma)
    return _polish(sigma, roots)


def _sort_key(z: complex, scale: float = 1.0):
    # ties in |Re| are judged to 1e-10 relative so roundoff cannot reorder them
    re = round(abs(z.real) / scale, 10)
    return (-re, -abs(z.imag), -math.copysign(1.0, z.imag))


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues sorted by descending |Re|."""

    values: tuple[complex, ...]
    real_tol: float = 1e-9

    @property
    def all_real(self) -> bool:
        return all(abs(z.imag) <= self.real_tol * max(abs(z), 1e-300) for z in self.values)

    @property
    def essentially_real(self) -> bool:
        return all(abs(z.real) > abs(z.imag) or z.imag == 0 for z in self.values)

    def block_essentially_real(self, count: int) -> bool:
        """Essential realness restricted to the ``count`` fastest eigenvalues."""
        return all(abs(z.real) > abs(z.imag) or z.imag == 0 for z in self.values[:count])

    def by_modulus(self) -> list[complex]:
        return sorted(self.values, key=abs)


def eigenvalues(J) -> Spectrum:
    """Roots of the characteristic polynomial of J (closed form for n <= 3)."""
    J = np.asarray(J, dtype=float)
    cp = charpoly_coeffs(J)
    roots = roots_from_sigma(cp.sigma)
    # snap tiny imaginary parts produced by the Cardano branch
    snapped = []
    for z in roots:
        if z.imag != 0 and abs(z.imag) <= 1e-12 * max(abs(z), 1e-300):
            z = complex(z.real)
        snapped.append(z)
    scale = max([abs(z) for z in snapped] + [1e-300])
    return Spectrum(tuple(sorted(snapped, key=lambda z: _sort_key(z, scale))))


# ---------------------------------------------------------------- ratios

def check_dimensionless(numerator: Sequence[int], denominator: Sequence[int],
                        n: int | None = None) -> bool:
    """True iff the sigma-index sums of numerator and denominator agree.

    sigma_k carries dimension Time^(-k); ``n`` bounds the admissible indices.
    """
    for k in list(numerator) + list(denominator):
        if k < 0 or (n is not None and k > n):
            raise ValueError(f"sigma index {k} out of range")
    return sum(numerator) == sum(denominator)


@dataclass(frozen=True)
class IdentityReport:
    defined: bool
    ratio_sum: complex | None = None
    sigma_expr: float | None = None
    rel_error: float | None = None
    pair_sum: complex | None = None
    pair_expr: float | None = None
    pair_rel_error: float | None = None
    ok: bool = False


def symmetric_identity_check(spectrum: Spectrum, charpoly: CharPoly,
                             rtol: float = 1e-9) -> IdentityReport:
    """Compare sum_{i != j} lambda_i/lambda_j with sigma_1 sigma_{n-1}/sigma_n - n."""
    lam = list(spectrum.values)
    n = len(lam)
    if n == 0 or any(z == 0 for z in lam) or charpoly[n] == 0:
        return IdentityReport(defined=False)
    lhs = sum(lam[i] / lam[j] for i in range(n) for j in range(n) if i != j)
    rhs = charpoly[1] * charpoly[n - 1] / charpoly[n] - n
    err = abs(lhs - rhs) / max(abs(rhs), 1.0)
    ok = err <= rtol
    pair = pexpr = perr = None
    if n == 2:
        pair = lam[1] / lam[0] + lam[0] / lam[1]
        pexpr = charpoly[1] ** 2 / charpoly[2] - 2
        perr = abs(pair - pexpr) / max(abs(pexpr), 1.0)
        ok = ok and perr <= rtol
    return IdentityReport(True, lhs, rhs, err, pair, pexpr, perr, ok)


def hurwitz_stable(coeffs: Sequence[float]) -> bool:
    """Routh test for tau^m + c_1 tau^(m-1) + ... + c_m (leading 1 implied)."""
    c = [1.0, *[float(v) for v in coeffs]]
    m = len(c) - 1
    if m == 0:
        return True
    if any(v <= 0 for v in c):
        return False
    if m <= 2:
        return True
    row0 = c[0::2]
    row1 = c[1::2]
    width = len(row0)
    row1 = row1 + [0.0] * (width - len(row1))
    rows = [row0, row1]
    for _ in range(m - 1):
        a, b = rows[-2], rows[-1]
        if b[0] == 0:
            return False
        new = [(b[0] * a[i + 1] - a[0] * b[i + 1]) / b[0] for i in range(width - 1)] + [0.0]
        rows.append(new)
    first = [r[0] for r in rows[: m + 1]]
    return all(v > 0 for v in first)
