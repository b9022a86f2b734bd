"""Special-function helpers: Gaussian tails, incomplete gamma, l_p balls."""

import math

import numpy as np
from scipy.special import erfcx, gammainc, gammaincc, gammaln, log_ndtr

from .quadrature import integrate

SQRT_HALF_PI = math.sqrt(math.pi / 2.0)


def mills_value(t):
    """sqrt(2 pi) e^{t^2/2} (1 - Phi(t)), through the scaled erfc."""
    return SQRT_HALF_PI * erfcx(np.asarray(t, dtype=float) / math.sqrt(2.0))


def log_normal_sf(z: float) -> float:
    """log(1 - Phi(z))."""
    return float(log_ndtr(-z))


def log_gammainc_lower(k: float, z: float) -> float:
    """
    log of the regularized lower incomplete gamma function P(k, z).

    Falls back to the power series in log space when P underflows.
    """
    if z <= 0.0:
        return -math.inf
    p = float(gammainc(k, z))
    if p > 0.5:
        return math.log1p(-float(gammaincc(k, z)))
    if p > 1e-250:
        return math.log(p)

    # P(k, z) = z^k e^{-z} / Gamma(k+1) * sum_j z^j / ((k+1)...(k+j))
    terms = 64
    while True:
        j = np.arange(1, terms + 1, dtype=float)
        log_terms = np.concatenate(([0.0], np.cumsum(np.log(z / (k + j)))))
        if log_terms[-1] < log_terms.max() - 40.0 or terms > 1 << 22:
            break
        terms *= 2
    return k * math.log(z) - z - float(gammaln(k + 1.0)) + float(np.logaddexp.reduce(log_terms))


def log_gamma_tilt(k: float, rate: float, c: float, x: float) -> float:
    """
    log E[e^{cG} 1{G <= x}] for G ~ Gamma(shape k, rate).

    For c < rate this is k log(rate / (rate - c)) + log P(k, (rate - c) x);
    otherwise the density is integrated directly in log-shifted form.
    """
    if x <= 0.0:
        return -math.inf
    if c < rate:
        return k * math.log(rate / (rate - c)) + log_gammainc_lower(k, (rate - c) * x)

    d = c - rate

    def shifted(g):
        g = np.maximum(g, 1e-300)
        return np.exp(d * (g - x) + (k - 1.0) * (np.log(g) - math.log(x)))

    area = integrate(shifted, 0.0, x, rel_tol=1e-12, abs_tol=0.0)
    return (math.log(area) + c * x - rate * x + (k - 1.0) * math.log(x)
            + k * math.log(rate) - float(gammaln(k)))


def log_lp_ball_volume(p: float, n: int, level: float, weight: float = 1.0) -> float:
    """log Vol{x in R^n : sum weight |x_i|^p <= level}."""
    if level <= 0.0:
        return -math.inf
    return (n * math.log(2.0 * math.gamma(1.0 + 1.0 / p))
            + (n / p) * math.log(level / weight)
            - float(gammaln(1.0 + n / p)))
