"""Series criterion for upper/lower class membership of boundary sequences.

The series sum_n phi_n/(n l_{n,1}) prod_{i=2}^{d1} (gap ^ phi branch)
exp(-phi_n^2 / 2 l_{n,1}^2) converges or diverges; which one decides the
class. Verdicts come from asymptotic exponent analysis of declared
parametric families only: the terms differ from 1/(n log n) by iterated-log
factors, so no computable partial sum can decide convergence, and numeric
sums are attached strictly as diagnostics.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .iterlog import llt, lllt, lt, max_subsequence_k, subsequence_index
from .quadrature import adaptive_simpson
from .sequences import CovarianceSequence
from .spectral import Spectrum, delta_k

__all__ = [
    "PhiFamily",
    "SeriesDiagnostics",
    "FluctuationReport",
    "EquivalenceReport",
    "gamma_n",
    "series_term",
    "subsequence_index",
    "subseq_series_term",
    "classify",
    "fluctuation_diagnostic",
    "equivalence_report",
]

FINITE_SAMPLE_LABEL = (
    "finite-sample diagnostic only; asymptotic conditions cannot be "
    "certified by finite computation"
)


@dataclass(frozen=True)
class PhiFamily:
    """Non-decreasing boundary sequence phi_n.

    Parametric: phi_n^2 = l_{n,1}^2 (2 LLn + a LLLn + b). Tabulated: an
    explicit non-decreasing list, optionally carrying a declared
    asymptotic envelope (a, b) for classification. ``clamp`` switches on
    the normalization l^2 LLn <= phi^2 <= 3 l^2 LLn.
    """

    kind: str
    a: float = 0.0
    b: float = 0.0
    values: tuple[float, ...] | None = None
    clamp: bool = False
    envelope: tuple[float, float] | None = None

    def __post_init__(self):
        if self.kind == "parametric":
            if self.a < 0:
                raise ValidationError(f"parametric family needs a >= 0, got {self.a}")
            if 2.0 + self.a + self.b <= 0:
                raise ValidationError(
                    f"phi_1^2 = lambda^2 (2 + a + b) must be positive "
                    f"(a={self.a}, b={self.b})"
                )
        elif self.kind == "tabulated":
            if not self.values:
                raise ValidationError("tabulated family needs values")
            v = tuple(float(x) for x in self.values)
            if any(x <= 0 for x in v):
                raise ValidationError("tabulated phi values must be positive")
            if any(y < x for x, y in zip(v, v[1:])):
                raise ValidationError("tabulated phi values must be non-decreasing")
            object.__setattr__(self, "values", v)
        else:
            raise ValidationError(f"unknown phi family kind {self.kind!r}")

    def value(self, n: int | float, lam1: float) -> float:
        """phi_n; lam1 is the top eigenvalue of Gamma_n (ignored if tabulated)."""
        if n < 1:
            raise ValidationError(f"index must be >= 1, got {n}")
        if self.kind == "tabulated":
            idx = int(n)
            if idx > len(self.values):
                raise ValidationError(
                    f"index {idx} beyond tabulated phi range ({len(self.values)})"
                )
            phi2 = self.values[idx - 1] ** 2
        else:
            phi2 = lam1 * lam1 * (2.0 * llt(n) + self.a * lllt(n) + self.b)
        if self.clamp:
            lo = lam1 * lam1 * llt(n)
            hi = 3.0 * lam1 * lam1 * llt(n)
            phi2 = min(max(phi2, lo), hi)
        return math.sqrt(phi2)

    def classification_params(self) -> tuple[float, float] | None:
        if self.kind == "parametric":
            return self.a, self.b
        return self.envelope


def gamma_n(s: Spectrum, phi_n: float, upto: int | None = None) -> float:
    """prod_{i=2}^{upto} min(l1/(l1^2 - l_i^2)^{1/2}, phi_n/l1).

    Defaults to the full product i = 2..d; the empty product is 1 and
    equal-eigenvalue factors take the phi branch (a/0 read as infinity).
    """
    if s.lambda1 <= 0:
        raise ValidationError("largest eigenvalue must be positive")
    if phi_n <= 0:
        raise ValidationError(f"phi must be positive, got {phi_n}")
    lam1 = s.lambda1
    w = s.weights()
    stop = s.dim if upto is None else min(upto, s.dim)
    prod = 1.0
    for i in range(1, stop):
        gap = w[0] - w[i]
        phi_branch = phi_n / lam1
        prod *= phi_branch if gap <= 0 else min(lam1 / math.sqrt(gap), phi_branch)
    return prod


def series_term(
    n: int | float,
    s_n: Spectrum,
    phi: PhiFamily,
    d1: int | None = None,
    mode: str = "top-group",
) -> float:
    """n-th series term phi_n/(n l_{n,1}) * product * exp(-phi_n^2/2 l_{n,1}^2).

    The product runs over i = 2..d1 (d1 of the limit matrix) in the
    default mode; mode "full-product" extends it to i = 2..d, which the
    reduction argument shows is equivalent up to a constant.
    """
    lam1 = s_n.lambda1
    phi_n = phi.value(n, lam1)
    if mode == "top-group":
        upto = s_n.d1 if d1 is None else d1
    elif mode == "full-product":
        upto = s_n.dim
    else:
        raise ValidationError(f"unknown mode {mode!r}")
    g = gamma_n(s_n, phi_n, upto=upto)
    return phi_n / (n * lam1) * g * math.exp(-phi_n * phi_n / (2.0 * lam1 * lam1))


def subseq_series_term(
    k: int,
    seq: CovarianceSequence,
    phi: PhiFamily,
    alpha: float = 1.0,
    mode: str = "full-product",
) -> float:
    """k-th term gamma_{n_k}/phi_{n_k} exp(-phi_{n_k}^2 / 2 l_{n_k,1}^2)."""
    n_k = subsequence_index(alpha, k)
    s = seq.spectrum_at(n_k)
    phi_k = phi.value(n_k, s.lambda1)
    upto = s.dim if mode == "full-product" else s.d1
    g = gamma_n(s, phi_k, upto=upto)
    return g / phi_k * math.exp(-phi_k * phi_k / (2.0 * s.lambda1**2))


@dataclass(frozen=True)
class SeriesDiagnostics:
    """Verdict plus numeric partial sums (diagnostics, never the verdict)."""

    verdict: str  # Converges | Diverges | Inconclusive
    method: str  # asymptotic | none
    note: str
    ns: np.ndarray = field(default_factory=lambda: np.array([], dtype=int))
    terms: np.ndarray = field(default_factory=lambda: np.array([]))
    partial_sums: np.ndarray = field(default_factory=lambda: np.array([]))


def _exponent_verdict(a: float, d1: int) -> tuple[str, str]:
    """Verdict for terms ~ n^{-1} (Ln)^{-1} (LLn)^{(d1-a)/2}."""
    critical = d1 + 2.0
    if a > critical:
        return "Converges", (
            f"exponent analysis: (a - d1)/2 = {(a - d1) / 2:.3g} > 1, the "
            f"comparison integral converges"
        )
    if a < critical:
        return "Diverges", (
            f"exponent analysis: (a - d1)/2 = {(a - d1) / 2:.3g} < 1, the "
            f"comparison integral diverges"
        )
    return "Diverges", (
        "critical line a = d1 + 2: terms are comparable to the divergent "
        "series sum 1/(n Ln LLn); critical-line handling extends beyond the "
        "source criterion and is labeled as such"
    )


def _subseq_exponent_verdict(a: float, d1: int) -> str:
    """Verdict for the subsequence series, analyzed in k-space.

    With Ln_k = alpha k / Lk the terms behave like k^{-1} (Lk)^{-p} with
    p = (a - d1)/2, so the series converges iff p > 1; at p = 1 it is
    comparable to the divergent sum 1/(k Lk).
    """
    p = (a - d1) / 2.0
    if p > 1.0:
        return "Converges"
    return "Diverges"


def classify(
    phi: PhiFamily,
    seq: CovarianceSequence,
    d1: int,
    n_terms: int = 5000,
) -> SeriesDiagnostics:
    """Convergence verdict for the series, by asymptotic exponent analysis.

    Requires a parametric family or a tabulated one with a declared
    envelope; otherwise Inconclusive. Partial sums over the first
    ``n_terms`` indices are attached for inspection.
    """
    if d1 < 1:
        raise ValidationError(f"d1 must be >= 1, got {d1}")
    n_max = n_terms if seq.max_index is None else min(n_terms, seq.max_index)
    if phi.kind == "tabulated":
        n_max = min(n_max, len(phi.values))
    ns = np.arange(1, n_max + 1)
    terms = np.array(
        [series_term(int(n), seq.spectrum_at(int(n)), phi, d1=d1) for n in ns]
    )
    psums = np.cumsum(terms)
    params = phi.classification_params()
    if params is None:
        return SeriesDiagnostics(
            verdict="Inconclusive",
            method="none",
            note=(
                "tabulated family without a declared asymptotic envelope; "
                "finite partial sums cannot decide convergence"
            ),
            ns=ns,
            terms=terms,
            partial_sums=psums,
        )
    verdict, note = _exponent_verdict(params[0], d1)
    return SeriesDiagnostics(
        verdict=verdict,
        method="asymptotic",
        note=note,
        ns=ns,
        terms=terms,
        partial_sums=psums,
    )


@dataclass(frozen=True)
class FluctuationReport:
    """Partial sums of sum_k k^{-delta} Delta_k(alpha), per requested delta."""

    alpha: float
    deltas: tuple[float, ...]
    delta_k_values: np.ndarray
    partial_sums: dict[float, np.ndarray]
    last_decade_fraction: dict[float, float]
    label: str = FINITE_SAMPLE_LABEL


def fluctuation_diagnostic(
    seq: CovarianceSequence,
    alpha: float,
    deltas,
    K: int,
) -> FluctuationReport:
    """Finite-sample trend of the fluctuation condition.

    For each delta, reports the running sums up to K and the fraction of
    the K-sum contributed by k in (K/10, K]; a fraction stuck near the
    log-uniform level signals non-summability. Never a proof either way.
    """
    if K < 10:
        raise ValidationError(f"K must be >= 10, got {K}")
    dk = np.array([delta_k(seq, alpha, k) for k in range(1, K + 1)])
    ks = np.arange(1, K + 1, dtype=float)
    sums: dict[float, np.ndarray] = {}
    fractions: dict[float, float] = {}
    for d in deltas:
        weighted = dk * ks ** (-float(d))
        ps = np.cumsum(weighted)
        sums[float(d)] = ps
        total = float(ps[-1])
        if total > 0:
            fractions[float(d)] = float((total - ps[K // 10 - 1]) / total)
        else:
            fractions[float(d)] = 0.0
    return FluctuationReport(
        alpha=alpha,
        deltas=tuple(float(d) for d in deltas),
        delta_k_values=dk,
        partial_sums=sums,
        last_decade_fraction=fractions,
    )


@dataclass(frozen=True)
class EquivalenceReport:
    """Block sums of the full series against subsequence terms.

    bracketing_low/high are the observed analogues of the proof's
    C'_1 <= a_k / b_{k+1} and a_k / b_k <= C'_2 over the k-window.
    """

    alpha: float
    ks: np.ndarray
    n_ks: np.ndarray
    block_sums: np.ndarray
    subseq_terms: np.ndarray
    block_methods: tuple[str, ...]
    bracketing_low: float
    bracketing_high: float
    full_verdict: str
    subseq_verdict: str

    @property
    def verdicts_agree(self) -> bool:
        return self.full_verdict == self.subseq_verdict


def _block_sum_exact(seq, phi, d1, mode, lo, hi):
    total = 0.0
    for n in range(lo + 1, hi + 1):
        total += series_term(n, seq.spectrum_at(n), phi, d1=d1, mode=mode)
    return total


def _block_sum_integral(seq, phi, d1, mode, lo, hi):
    """Euler-Maclaurin: sum_{n=lo+1}^{hi} g(n) ~ int_lo^hi g + (g(hi)-g(lo))/2.

    The sequence spectrum is frozen at the block's left endpoint; drift
    within a block is exactly what the fluctuation condition bounds.
    """
    s = seq.spectrum_at(lo)

    def g(x: float) -> float:
        return series_term(x, s, phi, d1=d1, mode=mode)

    # integrate in log-space where the integrand is slowly varying
    body = adaptive_simpson(
        lambda u: g(math.exp(u)) * math.exp(u),
        math.log(lo),
        math.log(hi),
        atol=1e-300,
        rtol=1e-10,
    )
    return body + 0.5 * (g(hi) - g(lo))


def equivalence_report(
    phi: PhiFamily,
    seq: CovarianceSequence,
    alpha: float = 1.0,
    K: int = 200,
    k_min: int = 1,
    exact_block_limit: int = 200_000,
    mode: str = "full-product",
    d1: int | None = None,
) -> EquivalenceReport:
    """Compare block sums a_k with subsequence terms over k in [k_min, K].

    Blocks whose right endpoint exceeds ``exact_block_limit`` are summed
    by integral approximation (blocks grow like n_k/Lk, far beyond
    pointwise summation); the per-block method is recorded.
    """
    K = min(K, max_subsequence_k(alpha) - 1)
    if k_min < 1 or K < k_min:
        raise ValidationError(f"need 1 <= k_min <= K, got [{k_min}, {K}]")
    if d1 is None:
        d1 = seq.limit_spectrum().d1
    ks = np.arange(k_min, K + 1)
    n_ks = np.array([subsequence_index(alpha, int(k)) for k in range(k_min, K + 2)])
    block_sums = []
    methods = []
    for j, k in enumerate(ks):
        lo, hi = int(n_ks[j]), int(n_ks[j + 1])
        if hi <= lo:
            block_sums.append(0.0)
            methods.append("empty")
        elif hi <= exact_block_limit:
            block_sums.append(_block_sum_exact(seq, phi, d1, mode, lo, hi))
            methods.append("exact")
        else:
            block_sums.append(_block_sum_integral(seq, phi, d1, mode, lo, hi))
            methods.append("integral")
    block_sums = np.array(block_sums)
    subseq = np.array(
        [subseq_series_term(int(k), seq, phi, alpha=alpha, mode=mode) for k in range(k_min, K + 2)]
    )
    nonempty = block_sums > 0
    low = float(np.min(block_sums[nonempty] / subseq[1:][nonempty])) if np.any(nonempty) else math.nan
    high = float(np.max(block_sums[nonempty] / subseq[:-1][nonempty])) if np.any(nonempty) else math.nan
    params = phi.classification_params()
    if params is None:
        full_v = sub_v = "Inconclusive"
    else:
        full_v = _exponent_verdict(params[0], d1)[0]
        sub_v = _subseq_exponent_verdict(params[0], d1)
    return EquivalenceReport(
        alpha=alpha,
        ks=ks,
        n_ks=n_ks[:-1],
        block_sums=block_sums,
        subseq_terms=subseq[:-1],
        block_methods=tuple(methods),
        bracketing_low=low,
        bracketing_high=high,
        full_verdict=full_v,
        subseq_verdict=sub_v,
    )
