"""Covariance-sequence generators.

Three kinds: a constant matrix, a tabulated list, and the truncated
second-moment construction over a finite discrete distribution, where
Gamma_n^2 sums p * x x^T over atoms with |x| <= c_n. Finitely many atoms
keep every truncated moment an exact finite sum, so the PSD-monotonicity
and fluctuation-summability checks downstream are exact up to rounding.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .iterlog import llt, lt
from . import spectral

_PROB_TOL = 1e-12
_MEAN_TOL = 1e-12


@dataclass(frozen=True)
class DiscreteDistribution:
    """Finitely supported distribution with mean zero."""

    points: np.ndarray  # (n_atoms, d)
    probs: np.ndarray  # (n_atoms,)

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        pr = np.asarray(self.probs, dtype=float)
        if pts.shape[0] != pr.size:
            raise ValidationError(
                f"{pts.shape[0]} atoms but {pr.size} probabilities"
            )
        if pts.shape[0] == 0:
            raise ValidationError("distribution needs at least one atom")
        if not np.all(np.isfinite(pts)) or not np.all(np.isfinite(pr)):
            raise ValidationError("atoms and probabilities must be finite")
        if np.any(pr <= 0):
            raise ValidationError("atom probabilities must be positive")
        if abs(float(pr.sum()) - 1.0) > _PROB_TOL:
            raise ValidationError(
                f"probabilities sum to {float(pr.sum())!r}, not 1"
            )
        mean = pr @ pts
        scale = max(float(np.max(np.abs(pts))), 1.0)
        if float(np.max(np.abs(mean))) > _MEAN_TOL * scale:
            raise ValidationError(f"distribution mean {mean.tolist()} is not zero")
        pts.setflags(write=False)
        pr.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "probs", pr)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def norms(self) -> np.ndarray:
        return np.sqrt((self.points**2).sum(axis=1))

    def second_moment(self) -> float:
        """E |X|^2."""
        return float(self.probs @ (self.points**2).sum(axis=1))

    def covariance(self) -> np.ndarray:
        return (self.points.T * self.probs) @ self.points

    def truncated_second_moment(self, lo: float, hi: float) -> float:
        """E |X|^2 I{lo < |X| <= hi}."""
        nm = self.norms()
        mask = (nm > lo) & (nm <= hi)
        return float(self.probs[mask] @ (self.points[mask] ** 2).sum(axis=1))


def truncated_covariance(dist: DiscreteDistribution, c: float) -> np.ndarray:
    """[E X^(i) X^(j) I{|X| <= c}]; atoms with |x| = c are included."""
    if c < 0:
        raise ValidationError(f"cutoff must be >= 0, got {c}")
    mask = dist.norms() <= c
    pts = dist.points[mask]
    return (pts.T * dist.probs[mask]) @ pts


@dataclass(frozen=True)
class CutoffFamily:
    """Non-decreasing cutoff sequence c_n.

    kind "sqrt_n": c_n = scale * sqrt(n), optionally modulated by a
    tabulated multiplier g(n). kind "constant": c_n = value.
    """

    kind: str
    scale: float = 1.0
    value: float = 1.0
    g_table: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("sqrt_n", "constant"):
            raise ValidationError(f"unknown cutoff kind {self.kind!r}")
        if self.kind == "sqrt_n" and self.scale <= 0:
            raise ValidationError("sqrt_n cutoff needs a positive scale")
        if self.kind == "constant" and self.value < 0:
            raise ValidationError("constant cutoff must be >= 0")
        if self.g_table is not None:
            g = tuple(float(x) for x in self.g_table)
            if any(x <= 0 for x in g):
                raise ValidationError("cutoff multipliers must be positive")
            object.__setattr__(self, "g_table", g)

    def evaluate(self, n: int) -> float:
        if n < 1:
            raise ValidationError(f"index must be >= 1, got {n}")
        if self.kind == "constant":
            return self.value
        g = 1.0
        if self.g_table is not None:
            g = self.g_table[min(n, len(self.g_table)) - 1]
        return self.scale * math.sqrt(n) * g

    def window_report(
        self, ns: list[int], eps: list[float] | None = None
    ) -> list[dict]:
        """Check exp(-(Ln)^eps_n) <= c_n/sqrt(n) <= exp((Ln)^eps_n) per n.

        eps defaults to 1/LLn, a choice (the window condition only asks
        for some eps_n -> 0).
        """
        rows = []
        for i, n in enumerate(ns):
            e = eps[i] if eps is not None else 1.0 / llt(n)
            ratio = self.evaluate(n) / math.sqrt(n)
            bound = math.exp(lt(n) ** e)
            rows.append(
                {
                    "n": n,
                    "eps": e,
                    "ratio": ratio,
                    "lower": 1.0 / bound,
                    "upper": bound,
                    "ok": 1.0 / bound <= ratio <= bound,
                }
            )
        return rows


@dataclass
class CovarianceSequence:
    """Generator of Gamma_n^2 matrices (constant, tabulated, or truncated)."""

    kind: str
    dim: int
    matrix: np.ndarray | None = None
    table: tuple[np.ndarray, ...] | None = None
    distribution: DiscreteDistribution | None = None
    cutoff: CutoffFamily | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def constant(cls, matrix: np.ndarray) -> "CovarianceSequence":
        m = spectral.CovarianceMatrix(np.asarray(matrix, dtype=float)).entries
        return cls(kind="constant", dim=m.shape[0], matrix=m)

    @classmethod
    def tabulated(cls, matrices) -> "CovarianceSequence":
        mats = tuple(
            spectral.CovarianceMatrix(np.asarray(m, dtype=float)).entries
            for m in matrices
        )
        if not mats:
            raise ValidationError("tabulated sequence needs at least one matrix")
        d = mats[0].shape[0]
        if any(m.shape[0] != d for m in mats):
            raise ValidationError("tabulated matrices must share one dimension")
        return cls(kind="tabulated", dim=d, table=mats)

    @classmethod
    def truncated(
        cls, dist: DiscreteDistribution, cutoff: CutoffFamily
    ) -> "CovarianceSequence":
        return cls(
            kind="truncated", dim=dist.dim, distribution=dist, cutoff=cutoff
        )

    @property
    def is_constant(self) -> bool:
        if self.kind == "constant":
            return True
        if self.kind == "truncated":
            return self.cutoff.kind == "constant"
        return False

    @property
    def is_monotone(self) -> bool:
        """PSD-monotone: Gamma_n^2 - Gamma_m^2 >= 0 for m <= n."""
        return self.kind == "constant" or self.kind == "truncated"

    @property
    def max_index(self) -> int | None:
        return len(self.table) if self.kind == "tabulated" else None

    def emit(self, n: int) -> np.ndarray:
        if n < 1:
            raise ValidationError(f"index must be >= 1, got {n}")
        if self.kind == "constant":
            return self.matrix
        if self.kind == "tabulated":
            if n > len(self.table):
                raise ValidationError(
                    f"index {n} out of range for tabulated sequence of "
                    f"length {len(self.table)}"
                )
            return self.table[n - 1]
        # truncated: the matrix only depends on which atoms pass the cutoff,
        # i.e. on the count of included atoms; cache per count
        c = self.cutoff.evaluate(n)
        norms = np.sort(self.distribution.norms())
        count = int(np.searchsorted(norms, c, side="right"))
        key = ("trunc", count)
        if key not in self._cache:
            self._cache[key] = truncated_covariance(self.distribution, c)
        return self._cache[key]

    def spectrum_at(self, n: int) -> spectral.Spectrum:
        m = self.emit(n)
        key = ("spec", m.tobytes())
        if key not in self._cache:
            self._cache[key] = spectral.eigh(m)
        return self._cache[key]

    def root_at(self, n: int) -> np.ndarray:
        """Gamma_n, the symmetric PSD square root of the emitted Gamma_n^2."""
        m = self.emit(n)
        key = ("root", m.tobytes())
        if key not in self._cache:
            s = self.spectrum_at(n)
            self._cache[key] = (s.basis * s.eigenvalues) @ s.basis.T
        return self._cache[key]

    def limit(self) -> np.ndarray:
        """Exact limit matrix: full covariance for the truncated kind."""
        if self.kind == "constant":
            return self.matrix
        if self.kind == "tabulated":
            return self.table[-1]
        return self.distribution.covariance()

    def limit_spectrum(self) -> spectral.Spectrum:
        key = ("limspec",)
        if key not in self._cache:
            self._cache[key] = spectral.eigh(self.limit())
        return self._cache[key]


def limit_and_convergence_report(seq: CovarianceSequence, N: int) -> dict:
    """Matrix and per-index eigenvalue gaps to the limit at log-spaced n."""
    if N < 1:
        raise ValidationError(f"N must be >= 1, got {N}")
    if seq.max_index is not None:
        N = min(N, seq.max_index)
    ns = sorted(
        {int(round(x)) for x in np.geomspace(1, N, num=min(60, N))}
    )
    lim = seq.limit()
    lim_eigs = seq.limit_spectrum().eigenvalues
    rows = []
    for n in ns:
        m = seq.emit(n)
        eigs = seq.spectrum_at(n).eigenvalues
        rows.append(
            {
                "n": n,
                "matrix_gap": spectral.operator_norm(m - lim),
                "eigenvalue_gaps": np.abs(eigs - lim_eigs).tolist(),
            }
        )
    return {"limit": lim.tolist(), "checkpoints": rows}
