import numpy as np
import pytest

from gausslil.spectral import Spectrum, eigh


def random_weights(rng, d, ratio_lo=0.05, ratio_hi=0.999):
    """Descending lambda_i^2 with lambda_i/lambda_1 ratios in [lo, hi]."""
    lam1 = float(np.exp(rng.uniform(np.log(0.3), np.log(3.0))))
    ratios = np.sort(rng.uniform(ratio_lo, ratio_hi, size=d - 1))[::-1]
    lams = np.concatenate([[1.0], ratios]) * lam1
    return lams**2


def spectrum_from_weights(weights) -> Spectrum:
    return eigh(np.diag(np.asarray(weights, dtype=float)))


def random_spectrum(rng, d, ratio_lo=0.05, ratio_hi=0.999) -> Spectrum:
    return spectrum_from_weights(random_weights(rng, d, ratio_lo, ratio_hi))


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
