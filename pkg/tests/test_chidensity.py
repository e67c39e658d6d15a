import math

import mpmath as mp
import numpy as np
import pytest

from conftest import random_weights, spectrum_from_weights

from gausslil.chidensity import (
    WeightedChiSquare,
    constants,
    density_lower_bound,
    density_upper_bound,
    weighted_density,
    weighted_norm_tail,
    weighted_shell_probability,
    zolotarev_constant,
)
from gausslil.errors import ValidationError
from gausslil.special import chisq_density, chisq_norm_tail

mp.mp.dps = 40


def two_weight_density_exact(w1, w2, z):
    """Closed form for two distinct chi^2(1) blocks, via the Bessel I0 kernel."""
    a = (1.0 / w1 + 1.0 / w2) / 4.0
    b = (1.0 / w2 - 1.0 / w1) / 4.0
    return float(mp.exp(-a * z) * mp.besseli(0, b * z) / (2 * mp.sqrt(w1 * w2)))


def two_weight_tail_exact(w1, w2, t):
    return float(
        mp.quad(lambda z: mp.exp(-((1 / w1 + 1 / w2) / 4) * z)
                * mp.besseli(0, ((1 / w2 - 1 / w1) / 4) * z) / (2 * mp.sqrt(w1 * w2)),
                [t * t, t * t + 40, t * t + 200, mp.inf])
    )


# ---- construction ----------------------------------------------------------


def test_weights_validation():
    with pytest.raises(ValidationError, match="zero"):
        WeightedChiSquare.from_weights([0.0, 0.0])
    with pytest.raises(ValidationError, match="empty"):
        WeightedChiSquare.from_weights([])
    w = WeightedChiSquare.from_weights([0.25, 1.0, 0.0])
    assert w.weights == (1.0, 0.25)  # sorted, zero dropped
    assert w.effective_dim == 2


# ---- density ---------------------------------------------------------------


def test_density_reduces_to_chisq():
    for d in (1, 2, 3, 5):
        w = WeightedChiSquare.from_weights([1.0] * d)
        for z in (0.3, 1.0, 4.0, 9.0):
            assert weighted_density(w, z) == pytest.approx(
                chisq_density(d, z), rel=1e-12
            )


def test_density_scaling_change_of_variables():
    lam2 = 0.37
    w = WeightedChiSquare.from_weights([lam2] * 3)
    for z in (0.2, 1.0, 5.0):
        assert weighted_density(w, z) == pytest.approx(
            chisq_density(3, z / lam2) / lam2, rel=1e-12
        )


def test_density_two_weights_against_bessel_oracle():
    w = WeightedChiSquare.from_weights([1.0, 0.25])
    for z in (0.01, 0.5, 1.0, 3.0, 10.0, 30.0, 80.0, 150.0, 200.0):
        assert weighted_density(w, z) == pytest.approx(
            two_weight_density_exact(1.0, 0.25, z), rel=5e-9
        )


def test_density_two_weights_monte_carlo_cdf_slope():
    # empirical CDF differencing at z = 3 with 10^7 samples
    rng = np.random.default_rng(99)
    n = 10_000_000
    h = 0.05
    lo = hi = 0
    for _ in range(10):
        e = rng.standard_normal((n // 10, 2))
        s = e[:, 0] ** 2 + 0.25 * e[:, 1] ** 2
        lo += int(np.count_nonzero(s <= 3.0 - h))
        hi += int(np.count_nonzero(s <= 3.0 + h))
    slope = (hi - lo) / n / (2 * h)
    dens = weighted_density(WeightedChiSquare.from_weights([1.0, 0.25]), 3.0)
    se = math.sqrt(dens / (2 * h) / n)  # binomial-width scale
    assert abs(slope - dens) <= 5 * se + 1e-4


def test_density_permutation_invariant(rng):
    base = [0.9, 0.4, 0.1, 1.3]
    w1 = WeightedChiSquare.from_weights(base)
    w2 = WeightedChiSquare.from_weights(base[::-1])
    assert w1.weights == w2.weights
    for z in (0.5, 2.0, 7.0):
        assert weighted_density(w1, z) == weighted_density(w2, z)


def test_density_normalizes(rng):
    # shell[0, T] + tail[T, inf) of the computed density must carry unit mass
    for d in (2, 3, 5, 8):
        w = WeightedChiSquare.from_weights(random_weights(rng, d))
        t_split = math.sqrt(40.0 * w.lambda1_sq)
        total = weighted_shell_probability(w, 0.0, t_split) + weighted_norm_tail(
            w, t_split
        )
        assert total == pytest.approx(1.0, abs=1e-8)
        # coarse cross-check via an independent rule (trapezoid accuracy is
        # limited by the sqrt-kink of the density at the origin)
        w1 = w.lambda1_sq
        zs = np.linspace(1e-9 * w1, 220.0 * w1, 150_001)
        vals = weighted_density(w, zs)
        assert float(np.trapezoid(vals, zs)) == pytest.approx(1.0, abs=1e-4)


def test_density_rejects_nonpositive_z():
    w = WeightedChiSquare.from_weights([1.0, 0.5])
    with pytest.raises(ValidationError):
        weighted_density(w, 0.0)
    with pytest.raises(ValidationError):
        weighted_density(w, -1.0)


# ---- tails -----------------------------------------------------------------


def test_tail_trivial_and_chisq_cases():
    w = WeightedChiSquare.from_weights([1.0, 1.0])
    assert weighted_norm_tail(w, 0.0) == 1.0
    for t in (0.5, 2.0, 6.0, 12.0):
        assert weighted_norm_tail(w, t) == pytest.approx(
            math.exp(-t * t / 2.0), rel=1e-10
        )
    w5 = WeightedChiSquare.from_weights([2.0] * 5)
    for t in (1.0, 3.0, 8.0):
        assert weighted_norm_tail(w5, t) == pytest.approx(
            chisq_norm_tail(5, t / math.sqrt(2.0)), rel=1e-12
        )


def test_tail_two_weights_against_quadrature_oracle():
    w = WeightedChiSquare.from_weights([1.0, 0.25])
    for t in (0.5, 1.0, 3.0, 6.0, 10.0):
        assert weighted_norm_tail(w, t) == pytest.approx(
            two_weight_tail_exact(1.0, 0.25, t), rel=1e-8
        )


def test_tail_monotone_in_t_and_weights(rng):
    w = WeightedChiSquare.from_weights([1.0, 0.6, 0.2])
    ts = np.linspace(0.0, 8.0, 40)
    vals = [weighted_norm_tail(w, float(t)) for t in ts]
    assert all(a >= b - 1e-12 for a, b in zip(vals, vals[1:]))
    bigger = WeightedChiSquare.from_weights([1.0, 0.7, 0.2])
    for t in (1.0, 3.0, 5.0):
        assert weighted_norm_tail(bigger, t) >= weighted_norm_tail(w, t) * (1 - 1e-9)


def test_tail_scale_equivariance(rng):
    for _ in range(5):
        w = random_weights(rng, 4)
        c2 = float(rng.uniform(0.2, 5.0))
        wa = WeightedChiSquare.from_weights(w)
        wb = WeightedChiSquare.from_weights(c2 * w)
        for t in (1.0, 2.5, 6.0):
            a = weighted_norm_tail(wa, t)
            b = weighted_norm_tail(wb, math.sqrt(c2) * t)
            assert b == pytest.approx(a, rel=1e-10)


def test_shell_probability_matches_tail_difference():
    w = WeightedChiSquare.from_weights([1.0, 0.5, 0.25])
    for t, width in [(2.0, 0.5), (5.0, 0.3)]:
        shell = weighted_shell_probability(w, t, t + width)
        diff = weighted_norm_tail(w, t) - weighted_norm_tail(w, t + width)
        assert shell == pytest.approx(diff, rel=1e-7)


def test_tail_monte_carlo_agreement(rng):
    # seeded 10^6-sample estimates within 4 binomial standard errors
    for _ in range(6):
        d = int(rng.integers(2, 6))
        w = WeightedChiSquare.from_weights(random_weights(rng, d))
        lam1 = math.sqrt(w.lambda1_sq)
        t = float(rng.uniform(1.0, 2.8)) * lam1
        p = weighted_norm_tail(w, t)
        if p < 1e-4:
            continue
        n = 1_000_000
        e = rng.standard_normal((n, d))
        s = (e * e) @ np.asarray(w.weights)
        p_hat = float(np.count_nonzero(s >= t * t)) / n
        se = math.sqrt(p * (1 - p) / n)
        assert abs(p_hat - p) <= 4 * se


# ---- Zolotarev constant and asymptotics ------------------------------------


def test_zolotarev_values():
    assert zolotarev_constant(spectrum_from_weights([1.0, 1.0, 1.0])) == 1.0
    s = spectrum_from_weights([1.0, 0.75, 0.75])
    assert s.d1 == 1
    assert zolotarev_constant(s) == pytest.approx(4.0, rel=1e-12)
    s2 = spectrum_from_weights([1.0, 1.0, 0.25])
    assert s2.d1 == 2
    assert zolotarev_constant(s2) == pytest.approx(1.0 / math.sqrt(0.75), rel=1e-12)


def test_zolotarev_asymptotic_ratio(rng):
    # h(z) / (K l1^-2 f_d1(z/l1^2)) -> 1; at z = 50 l1^2 within [0.9, 1.1]
    for _ in range(12):
        d = int(rng.integers(2, 6))
        wts = random_weights(rng, d, ratio_hi=math.sqrt(0.8))  # gap ratio <= 0.8
        s = spectrum_from_weights(wts)
        w = WeightedChiSquare.from_spectrum(s)
        w1 = w.lambda1_sq
        z = 50.0 * w1
        ratio = weighted_density(w, z) / (
            zolotarev_constant(s) * chisq_density(s.d1, z / w1) / w1
        )
        assert 0.9 <= ratio <= 1.1


# ---- density bounds ---------------------------------------------------------


def test_density_upper_bound_equality_case():
    # equal eigenvalues with d1 = d >= 2: bound equals the exact density
    s = spectrum_from_weights([1.0, 1.0, 1.0])
    w = WeightedChiSquare.from_spectrum(s)
    for z in (0.5, 2.0, 10.0):
        assert density_upper_bound(s, z) == pytest.approx(
            weighted_density(w, z), rel=1e-12
        )


def test_density_upper_bound_two_weights_formula():
    s = spectrum_from_weights([1.0, 0.5])
    c3 = constants(2).C3
    k = zolotarev_constant(s)
    z = 4.0
    assert density_upper_bound(s, z) == pytest.approx(
        c3 * k * chisq_density(1, z), rel=1e-12
    )
    assert k == pytest.approx((1 - 0.5) ** -0.5, rel=1e-13)


def test_density_lower_bound_threshold():
    s = spectrum_from_weights([1.0, 0.5])
    _, thresh = density_lower_bound(s, 1.0)
    assert thresh == pytest.approx(2.0 * 1 * 1.5 / 0.5, rel=1e-12)  # = 6
    s_eq = spectrum_from_weights([1.0, 1.0])
    val, thresh = density_lower_bound(s_eq, 5.0)
    assert math.isinf(thresh)
    assert val > 0


def test_density_bounds_sandwich_random(rng):
    for _ in range(15):
        d = int(rng.integers(2, 6))
        s = spectrum_from_weights(random_weights(rng, d))
        w = WeightedChiSquare.from_spectrum(s)
        w1 = s.lambda1**2
        zs = np.geomspace(0.05 * w1, 150.0 * w1, 60)
        h = weighted_density(w, zs)
        for z, hz in zip(zs, h):
            ub = density_upper_bound(s, float(z))
            assert hz <= ub * (1 + 1e-7)
            lb, thresh = density_lower_bound(s, float(z))
            if z >= thresh:
                assert hz >= lb * (1 - 1e-7)


# ---- constant table ---------------------------------------------------------


def test_constant_table_values():
    c2 = constants(2)
    assert c2.C0 == pytest.approx(0.5, rel=1e-14)
    c4_1 = math.sqrt(2) + math.sqrt(math.pi / math.e)
    assert c2.C4_by_multiplicity[0] == pytest.approx(c4_1, rel=1e-13)
    assert c2.C3 == pytest.approx(c4_1, rel=1e-13)

    c3 = constants(3)
    c4_2 = math.sqrt(2) + math.sqrt(math.pi) * (2 / math.e) / math.gamma(1.5)
    assert c3.C4_by_multiplicity[1] == pytest.approx(c4_2, rel=1e-13)
    # exhaustive over compositions {(2), (1,1)} of d - 1 = 2
    assert c3.C3 == pytest.approx(max(c4_2, c4_1**2), rel=1e-13)

    for d in (2, 3, 4, 5):
        c = constants(d)
        assert c.C5 >= 3 * d
        assert c.C5 == pytest.approx(
            max(4 * math.sqrt(math.log(8 * c.C3)), 3 * d), rel=1e-13
        )
        assert c.beta == pytest.approx(math.log(8 * c.C3) + d / 4, rel=1e-13)
        assert c.C3 > 1
        assert 0 < c.C1 <= c.C2


def test_constants_rejects_d1():
    with pytest.raises(ValidationError):
        constants(1)


def test_tail_ratio_sandwich_on_grid():
    # C1 t^{d-2} e^{-t^2/2} <= P{|Z| >= t} <= C2 ... on [2d, 40], log scale
    from gausslil.special import log_chisq_norm_tail

    for d in (2, 3, 4, 5):
        c = constants(d)
        for t in np.geomspace(2 * d, 40.0, 200):
            logp = log_chisq_norm_tail(d, float(t))
            shape = (d - 2) * math.log(t) - t * t / 2
            assert math.log(c.C1) + shape <= logp <= math.log(c.C2) + shape


def test_tail_ratio_monotone_beyond_grid():
    # the calibration grid stops at t=200; the ratio approaches 2*C0
    # monotonically, so the calibrated envelope stays valid beyond
    from gausslil.chidensity import _tail_ratio_log

    for d in (2, 3, 5):
        ts = np.geomspace(200.0, 400.0, 50)
        r = [_tail_ratio_log(d, float(t)) for t in ts]
        diffs = np.diff(r)
        assert np.all(diffs <= 1e-12) or np.all(diffs >= -1e-12)
        c = constants(d)
        assert math.log(c.C1) <= r[-1] <= math.log(c.C2)
