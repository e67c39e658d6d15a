"""Eigenspace-merging regularization and the resulting tail/shell bounds.

For a threshold t, eigenvalues whose squared gap to the top is at most
4 d^2 lambda_1^4 / t^2 are snapped to lambda_1, making the top eigenspace
exactly degenerate. The merged law dominates the original one and admits
two-sided tail bounds whose d-dependent constants are derived here by
tracing the proofs; the inequalities are the contract, not the constants'
tightness. Lower-bound constants contain e^{-16 d^3} factors that
underflow float64 for d >= 3, so every bound also has a log-scale form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .chidensity import (
    WeightedChiSquare,
    constants,
    weighted_density,
    weighted_norm_tail,
    weighted_shell_probability,
)
from .errors import ValidationError
from .spectral import Spectrum

__all__ = [
    "RegularizedSpectrum",
    "DerivedConstants",
    "d_tilde",
    "regularized",
    "derived_constants",
    "tail_upper_bound",
    "tail_lower_bound",
    "shell_lower_bound",
    "shifted_tail_vs_shell",
    "log_product_factor",
    "density_comparison_check",
]

_REL_SLACK = 1e-7  # numerical slack when checking strict inequalities


@dataclass(frozen=True)
class RegularizedSpectrum:
    """Merged spectrum: lambda_1 repeated d_tilde times, then the rest."""

    t: float
    d_tilde: int
    eigenvalues: tuple[float, ...]
    K_t: float

    def weights(self) -> WeightedChiSquare:
        return WeightedChiSquare.from_weights(x * x for x in self.eigenvalues)


@dataclass(frozen=True)
class DerivedConstants:
    """Constants of the two-sided product bounds, traced from the proofs.

    C1t gates validity (t >= C1t * lambda_1); C2t/C3t scale the upper and
    lower tail bounds, C4t/C5t the shifted-tail-vs-shell comparison, and
    C6t the shell lower bound. Logs are primary: exp(log_C3t) underflows
    to 0.0 from d = 3 on.
    """

    d: int
    C1t: float
    log_C2t: float
    log_C3t: float
    log_C4t: float
    C5t: float
    log_C6t: float

    @property
    def C2t(self) -> float:
        return math.exp(self.log_C2t)

    @property
    def C3t(self) -> float:
        return math.exp(self.log_C3t) if self.log_C3t > -745.0 else 0.0

    @property
    def C6t(self) -> float:
        return math.exp(self.log_C6t) if self.log_C6t > -745.0 else 0.0


@lru_cache(maxsize=None)
def derived_constants(d: int) -> DerivedConstants:
    c = constants(d)
    log_c2t = math.log(c.C2) + math.log(c.C3) + (d - 1) * math.log(2 * d)
    log_c3t = (
        math.log(c.C1 / 4.0) - d * math.log(2.0) - d * math.log(d) - 16.0 * d**3 - math.log(2.0)
    )
    log_c4t = math.log(12.0) + math.log(c.C3) + 16.0 * d**3
    return DerivedConstants(
        d=d,
        C1t=c.C5,
        log_C2t=log_c2t,
        log_C3t=log_c3t,
        log_C4t=log_c4t,
        C5t=c.beta,
        log_C6t=log_c3t - log_c4t,
    )


def _require_top(s: Spectrum) -> float:
    if s.lambda1 <= 0:
        raise ValidationError("largest eigenvalue must be positive")
    return s.lambda1


def d_tilde(s: Spectrum, t: float) -> int:
    """max{1 <= i <= d : lambda_1^2 - lambda_i^2 <= 4 d^2 lambda_1^4 / t^2}."""
    lam1 = _require_top(s)
    d = s.dim
    if t < 3 * d * lam1:
        raise ValidationError(
            f"regularization assumes t >= 3 d lambda_1 = {3 * d * lam1:.6g}, got {t}"
        )
    thresh = 4.0 * d * d * lam1**4 / (t * t)
    w = s.weights()
    out = 1
    for i in range(d):
        if w[0] - w[i] <= thresh:
            out = i + 1
    return out


def regularized(s: Spectrum, t: float) -> RegularizedSpectrum:
    """Merged spectrum at threshold t with its Zolotarev constant K_t."""
    dt = d_tilde(s, t)
    lam1 = s.lambda1
    merged = tuple([lam1] * dt) + tuple(float(x) for x in s.eigenvalues[dt:])
    rho2 = (np.asarray(merged[dt:]) / lam1) ** 2
    k_t = float(np.prod((1.0 - rho2) ** -0.5)) if rho2.size else 1.0
    return RegularizedSpectrum(t=t, d_tilde=dt, eigenvalues=merged, K_t=k_t)


def log_product_factor(s: Spectrum, t: float) -> float:
    """log of prod_{i=2}^d {l1/(l1^2-l_i^2)^{1/2} ^ t/l1} * (l1/t) e^{-t^2/2 l1^2}.

    The scale-invariant shape shared by all four bounds of the tail
    theorem; equal-eigenvalue factors take the t/lambda_1 branch (a/0 is
    read as +infinity).
    """
    lam1 = _require_top(s)
    w = s.weights()
    total = 0.0
    for i in range(1, s.dim):
        gap = w[0] - w[i]
        branch_t = t / lam1
        if gap <= 0:
            total += math.log(branch_t)
        else:
            total += math.log(min(lam1 / math.sqrt(gap), branch_t))
    return total + math.log(lam1 / t) - t * t / (2.0 * w[0])


def _check_valid_t(s: Spectrum, t: float) -> DerivedConstants:
    dc = derived_constants(s.dim)
    lam1 = _require_top(s)
    if t < dc.C1t * lam1:
        raise ValidationError(
            f"bound valid for t >= C1t*lambda_1 = {dc.C1t * lam1:.6g}, got {t}"
        )
    return dc


def tail_upper_bound(s: Spectrum, t: float) -> float:
    """Upper bound on P{|Y| >= t} for t >= C1t * lambda_1."""
    dc = _check_valid_t(s, t)
    return math.exp(dc.log_C2t + log_product_factor(s, t))


def tail_lower_bound(s: Spectrum, t: float) -> float:
    """Lower bound on P{|Y| >= t}; 0.0 when the constant underflows."""
    dc = _check_valid_t(s, t)
    v = dc.log_C3t + log_product_factor(s, t)
    return math.exp(v) if v > -745.0 else 0.0


def log_tail_upper_bound(s: Spectrum, t: float) -> float:
    dc = _check_valid_t(s, t)
    return dc.log_C2t + log_product_factor(s, t)


def log_tail_lower_bound(s: Spectrum, t: float) -> float:
    dc = _check_valid_t(s, t)
    return dc.log_C3t + log_product_factor(s, t)


def shell_lower_bound(s: Spectrum, t: float) -> float:
    """Lower bound on P{t <= |Y| <= t + C5t lambda_1^2/t}."""
    dc = _check_valid_t(s, t)
    v = dc.log_C6t + log_product_factor(s, t)
    return math.exp(v) if v > -745.0 else 0.0


def log_shell_lower_bound(s: Spectrum, t: float) -> float:
    dc = _check_valid_t(s, t)
    return dc.log_C6t + log_product_factor(s, t)


def shell_width(s: Spectrum, t: float) -> float:
    """C5t * lambda_1^2 / t, the shell width used by the bounds."""
    dc = derived_constants(s.dim)
    return dc.C5t * s.lambda1**2 / t


def shifted_tail_vs_shell(
    s: Spectrum, t: float, gamma: float
) -> tuple[float, float]:
    """Both sides of P{|Y| >= t - g l1^2/t} <= C4t e^g P{t <= |Y| <= t + C5t l1^2/t}.

    Returned for reporting; the right side overflows to +inf for d >= 3
    (use the _log variant there).
    """
    log_lhs, log_rhs = shifted_tail_vs_shell_log(s, t, gamma)
    rhs = math.exp(log_rhs) if log_rhs < 709.0 else math.inf
    return math.exp(log_lhs), rhs


def shifted_tail_vs_shell_log(
    s: Spectrum, t: float, gamma: float
) -> tuple[float, float]:
    dc = _check_valid_t(s, t)
    lam1 = s.lambda1
    if not 0 <= gamma < t * t / (4.0 * lam1**2):
        raise ValidationError(
            f"gamma must lie in [0, t^2/(4 lambda_1^2)) = "
            f"[0, {t * t / (4 * lam1**2):.6g}), got {gamma}"
        )
    w = WeightedChiSquare.from_spectrum(s)
    lhs = weighted_norm_tail(w, t - gamma * lam1**2 / t)
    shell = weighted_shell_probability(w, t, t + shell_width(s, t))
    return math.log(lhs), dc.log_C4t + gamma + math.log(shell)


# ---------------------------------------------------------------------------
# Inequality evaluators for the merged law (log scale throughout)
# ---------------------------------------------------------------------------


def merged_tail(s: Spectrum, t: float, at: float) -> float:
    """P{|Y_t| >= at} for the regularization of s at threshold t."""
    return weighted_norm_tail(regularized(s, t).weights(), at)


def upper_shift_sides(s: Spectrum, t: float, delta: float) -> tuple[float, float]:
    """(log lhs, log rhs) of P{|Y_t| >= t+d} <= 4 C3 e^{d/4} e^{-td/l1^2} P{|Y_t| >= t}."""
    if not 0 < delta <= t / 4.0:
        raise ValidationError(f"delta must lie in (0, t/4], got {delta}")
    w = regularized(s, t).weights()
    c3 = constants(s.dim).C3
    lhs = weighted_norm_tail(w, t + delta)
    rhs = (
        math.log(4.0 * c3)
        + s.dim / 4.0
        - t * delta / s.lambda1**2
        + math.log(weighted_norm_tail(w, t))
    )
    return math.log(lhs), rhs


def lower_shift_sides(s: Spectrum, t: float, delta: float) -> tuple[float, float]:
    """(log lhs, log rhs) of P{|Y_t| >= t-d} <= 6 C3 e^{td/l1^2} P{|Y_t| >= t}."""
    if not 0 < delta <= t / 4.0:
        raise ValidationError(f"delta must lie in (0, t/4], got {delta}")
    w = regularized(s, t).weights()
    c3 = constants(s.dim).C3
    lhs = weighted_norm_tail(w, t - delta)
    rhs = (
        math.log(6.0 * c3)
        + t * delta / s.lambda1**2
        + math.log(weighted_norm_tail(w, t))
    )
    return math.log(lhs), rhs


def merged_shell_sides(s: Spectrum, t: float) -> tuple[float, float]:
    """(log lhs, log rhs) of P{|Y_t| >= t} <= 2 P{t <= |Y_t| <= t + beta/t}."""
    c = constants(s.dim)
    lam1 = s.lambda1
    if t < c.C5 * lam1:
        raise ValidationError(
            f"shell comparison needs t >= C5*lambda_1 = {c.C5 * lam1:.6g}, got {t}"
        )
    w = regularized(s, t).weights()
    beta = c.beta * lam1**2
    lhs = weighted_norm_tail(w, t)
    rhs = weighted_shell_probability(w, t, t + beta / t)
    return math.log(lhs), math.log(2.0) + math.log(rhs)


def orig_shift_sides(s: Spectrum, t: float, gamma: float) -> tuple[float, float]:
    """(log lhs, log rhs) of P{|Y| >= t - g l1^2/t} <= 6 C3 e^g P{|Y_t| >= t}."""
    c = constants(s.dim)
    lam1 = s.lambda1
    if t < c.C5 * lam1:
        raise ValidationError(
            f"comparison needs t >= C5*lambda_1 = {c.C5 * lam1:.6g}, got {t}"
        )
    if not 0 <= gamma < t * t / (4.0 * lam1**2):
        raise ValidationError(f"gamma out of range, got {gamma}")
    lhs = weighted_norm_tail(
        WeightedChiSquare.from_spectrum(s), t - gamma * lam1**2 / t
    )
    rhs = math.log(6.0 * c.C3) + gamma + math.log(merged_tail(s, t, t))
    return math.log(lhs), rhs


def merged_vs_orig_shell_sides(s: Spectrum, t: float) -> tuple[float, float]:
    """(log lhs, log rhs) of P{|Y_t| >= t} <= 2 e^{16 d^3} P{t <= |Y| <= t + beta/t}."""
    c = constants(s.dim)
    lam1 = s.lambda1
    if t < c.C5 * lam1:
        raise ValidationError(
            f"comparison needs t >= C5*lambda_1 = {c.C5 * lam1:.6g}, got {t}"
        )
    beta = c.beta * lam1**2
    lhs = merged_tail(s, t, t)
    shell = weighted_shell_probability(
        WeightedChiSquare.from_spectrum(s), t, t + beta / t
    )
    rhs = math.log(2.0) + 16.0 * s.dim**3 + math.log(shell)
    return math.log(lhs), rhs


# ---------------------------------------------------------------------------
# Density comparison report
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ComparisonRow:
    z: float
    density: float
    merged_density: float
    lower_factor: float
    lower_ok: bool
    domination_ok: bool


@dataclass(frozen=True)
class ComparisonReport:
    t: float
    d_tilde: int
    rows: tuple[ComparisonRow, ...]

    @property
    def violations(self) -> list[int]:
        return [
            i
            for i, r in enumerate(self.rows)
            if not (r.lower_ok and r.domination_ok)
        ]


def density_comparison_check(s: Spectrum, t: float, zgrid) -> ComparisonReport:
    """Check h(z) >= h_t(z) e^{-8 d^3 z / t^2} and merged-tail domination.

    Violations are collected, not raised; tests treat a non-empty
    violation list as failure.
    """
    lam1 = _require_top(s)
    d = s.dim
    if t < 3 * d * lam1:
        raise ValidationError(
            f"comparison assumes t >= 3 d lambda_1 = {3 * d * lam1:.6g}, got {t}"
        )
    reg = regularized(s, t)
    w = WeightedChiSquare.from_spectrum(s)
    wt = reg.weights()
    rows = []
    for z in np.asarray(zgrid, dtype=float):
        h = float(weighted_density(w, z))
        ht = float(weighted_density(wt, z))
        factor = math.exp(-8.0 * d**3 * z / (t * t))
        lower_ok = h >= ht * factor * (1.0 - _REL_SLACK)
        dom_ok = weighted_norm_tail(wt, math.sqrt(z)) >= weighted_norm_tail(
            w, math.sqrt(z)
        ) * (1.0 - _REL_SLACK)
        rows.append(
            ComparisonRow(
                z=float(z),
                density=h,
                merged_density=ht,
                lower_factor=factor,
                lower_ok=lower_ok,
                domination_ok=dom_ok,
            )
        )
    return ComparisonReport(t=t, d_tilde=reg.d_tilde, rows=tuple(rows))
