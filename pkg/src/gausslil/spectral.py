"""Small dense symmetric-matrix linear algebra and covariance fluctuation.

The eigensolver is a cyclic Jacobi sweep, chosen for unconditional
robustness on the tiny symmetric matrices this package works with
(d <= 16). Output order and basis signs are fixed so identical inputs
give bit-identical results.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .errors import ValidationError
from .iterlog import subsequence_index

SYMMETRY_RTOL = 1e-12
EIGEN_CLAMP_RTOL = 1e-10
GROUP_RTOL = 1e-8
JACOBI_TOL = 1e-14
_MAX_SWEEPS = 64
_SCAN_LIMIT = 200_000


@dataclass(frozen=True)
class CovarianceMatrix:
    """Symmetric non-negative definite matrix (the squared scale)."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ValidationError(f"expected a square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValidationError("matrix entries must be finite")
        check_symmetric(a)
        a = 0.5 * (a + a.T)
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class Spectrum:
    """Descending eigenvalues of the scale matrix (std-deviation units).

    ``eigenvalues`` are the lambda_i of Gamma, i.e. square roots of the
    eigenvalues of the input Gamma^2. ``groups`` collects them into
    (value, multiplicity) pairs under the relative grouping tolerance;
    ``d1`` is the multiplicity of the top group.
    """

    eigenvalues: np.ndarray
    basis: np.ndarray  # columns are the eigenvectors
    groups: tuple[tuple[float, int], ...]
    d1: int

    @property
    def dim(self) -> int:
        return self.eigenvalues.size

    @property
    def lambda1(self) -> float:
        return float(self.eigenvalues[0])

    def weights(self) -> np.ndarray:
        """lambda_i^2, descending."""
        return self.eigenvalues**2


@dataclass(frozen=True)
class FluctuationProfile:
    """Delta_k(alpha) for k = 1..K over a covariance sequence."""

    alpha: float
    values: np.ndarray


class MatrixSequence(Protocol):
    """What delta_k needs from a covariance sequence."""

    dim: int

    def emit(self, n: int) -> np.ndarray: ...

    @property
    def is_constant(self) -> bool: ...

    @property
    def is_monotone(self) -> bool: ...

    @property
    def max_index(self) -> int | None: ...


def check_symmetric(a: np.ndarray, rtol: float = SYMMETRY_RTOL) -> None:
    """Reject matrices whose asymmetry exceeds the relative tolerance."""
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    asym = float(np.max(np.abs(a - a.T))) if a.size else 0.0
    if asym > rtol * max(scale, 1e-300):
        raise ValidationError(
            f"matrix is not symmetric: max |A - A^T| = {asym:.3e} "
            f"exceeds {rtol:.1e} * max|A| = {rtol * scale:.3e}"
        )


def _jacobi(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi diagonalization of a symmetric matrix.

    Sweeps (p, q) pairs in fixed row-major order until the off-diagonal
    Frobenius mass falls below JACOBI_TOL * ||A||_F.
    """
    d = a.shape[0]
    m = a.copy()
    v = np.eye(d)
    norm = math.sqrt(float(np.sum(a * a)))
    if d == 1 or norm == 0.0:
        return np.diag(m).copy(), v
    threshold = JACOBI_TOL * norm
    off_mask = ~np.eye(d, dtype=bool)
    for _ in range(_MAX_SWEEPS):
        off = math.sqrt(float(np.sum(m[off_mask] ** 2)))
        if off <= threshold:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = m[p, q]
                if apq == 0.0:
                    continue
                theta = (m[q, q] - m[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (
                    abs(theta) + math.sqrt(theta * theta + 1.0)
                )
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rp = m[:, p].copy()
                rq = m[:, q].copy()
                m[:, p] = c * rp - s * rq
                m[:, q] = s * rp + c * rq
                rp = m[p, :].copy()
                rq = m[q, :].copy()
                m[p, :] = c * rp - s * rq
                m[q, :] = s * rp + c * rq
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        raise ValidationError("Jacobi iteration failed to converge")
    return np.diag(m).copy(), v


def _group(lams: np.ndarray, rtol: float) -> tuple[tuple[float, int], ...]:
    tol = rtol * max(float(lams[0]), 1e-300)
    groups: list[list[float]] = [[float(lams[0])]]
    for lam in lams[1:]:
        if groups[-1][0] - float(lam) <= tol:
            groups[-1].append(float(lam))
        else:
            groups.append([float(lam)])
    return tuple((g[0], len(g)) for g in groups)


def eigh(a: CovarianceMatrix | np.ndarray, group_rtol: float = GROUP_RTOL) -> Spectrum:
    """Spectrum of a covariance matrix: eigenvalues of its PSD square root.

    Deterministic: fixed sweep order, descending stable sort, and sign
    convention that the first nonzero component of each basis vector is
    positive. Eigenvalues of Gamma^2 below the clamp tolerance are snapped
    to zero; anything more negative is rejected.
    """
    if not isinstance(a, CovarianceMatrix):
        a = CovarianceMatrix(np.asarray(a, dtype=float))
    mu, v = _jacobi(a.entries)
    scale = float(np.max(np.abs(mu))) if mu.size else 0.0
    floor = -EIGEN_CLAMP_RTOL * max(scale, 1e-300)
    if np.any(mu < floor):
        raise ValidationError(
            f"matrix is not PSD: eigenvalue {float(mu.min()):.6e} below "
            f"clamp threshold {floor:.3e}"
        )
    mu = np.maximum(mu, 0.0)
    order = np.argsort(-mu, kind="stable")
    mu = mu[order]
    v = v[:, order]
    for j in range(v.shape[1]):
        col = v[:, j]
        nz = np.nonzero(col)[0]
        if nz.size and col[nz[0]] < 0:
            v[:, j] = -col
    lams = np.sqrt(mu)
    lams.setflags(write=False)
    v.setflags(write=False)
    groups = _group(lams, group_rtol)
    return Spectrum(eigenvalues=lams, basis=v, groups=groups, d1=groups[0][1])


def operator_norm(a: np.ndarray) -> float:
    """Largest singular value, sup_{|v| <= 1} |Av|."""
    a = np.asarray(a, dtype=float)
    if a.size == 0 or not np.any(a):
        return 0.0
    mu, _ = _jacobi(a.T @ a)
    return math.sqrt(max(float(mu.max()), 0.0))


def sqrt_psd(a: CovarianceMatrix | np.ndarray) -> CovarianceMatrix:
    """Symmetric PSD square root B with B^2 = A."""
    s = eigh(a)
    b = (s.basis * s.eigenvalues) @ s.basis.T
    return CovarianceMatrix(0.5 * (b + b.T))


def _window(alpha: float, k: int) -> tuple[int, int]:
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    return subsequence_index(alpha, k), subsequence_index(alpha, k + 1)


def delta_k(
    seq: MatrixSequence, alpha: float, k: int, force_scan: bool = False
) -> float:
    """Delta_k(alpha) = max ||Gamma_n^2 - Gamma_m^2|| over the k-th block.

    The maximum runs over all index pairs n_k <= m <= n <= n_{k+1}. For
    PSD-monotone sequences the endpoint pair is extremal, so the O(w^2)
    pair scan collapses to one norm; ``force_scan`` disables the shortcut
    (used to validate it).
    """
    lo, hi = _window(alpha, k)
    if seq.is_constant:
        return 0.0
    if seq.max_index is not None and hi > seq.max_index:
        raise ValidationError(
            f"delta_k window [{lo}, {hi}] exceeds tabulated range "
            f"(max index {seq.max_index})"
        )
    if seq.is_monotone and not force_scan:
        return operator_norm(seq.emit(hi) - seq.emit(lo))
    if hi - lo > _SCAN_LIMIT:
        raise ValidationError(
            f"delta_k pair scan over window [{lo}, {hi}] is too large "
            f"({hi - lo} indices; limit {_SCAN_LIMIT})"
        )
    seen: list[np.ndarray] = []
    for n in range(lo, hi + 1):
        m = seq.emit(n)
        if not any(np.array_equal(m, x) for x in seen):
            seen.append(m)
    best = 0.0
    for i in range(len(seen)):
        for j in range(i + 1, len(seen)):
            best = max(best, operator_norm(seen[i] - seen[j]))
    return best


def fluctuation_profile(
    seq: MatrixSequence, alpha: float, K: int
) -> FluctuationProfile:
    """Delta_k(alpha) for k = 1..K."""
    if alpha <= 0:
        raise ValidationError(f"alpha must be positive, got {alpha}")
    vals = np.array([delta_k(seq, alpha, k) for k in range(1, K + 1)])
    return FluctuationProfile(alpha=alpha, values=vals)
