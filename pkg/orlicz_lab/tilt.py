"""Tilted (Gibbs) measures mu_lambda(dt) = exp(-lambda Psi(t)) dt / Z_lambda."""

import logging
import math
from functools import cached_property

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .config import merged_config
from .errors import BracketFailure, DomainError, NoCramer, QuadratureFailure
from .quadrature import composite_rule, panel_sums
from .young import YoungFunction, inverse_neg, inverse_pos, sublevel_length

logger = logging.getLogger(__name__)

CDF_ORDER = 8


class TiltedMeasure(BaseModel):
    """
    The tilted measure mu_lambda with its normalizer and the law of Psi(X).

    `nodes` / `probs` form a quadrature rule for expectations under mu_lambda;
    (`cdf_t`, `cdf_u`) is the monotone CDF table used for inverse-CDF sampling.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    psi: YoungFunction
    lam: float = Field(gt=0.0)
    log_z: float
    m: float = Field(gt=0.0)
    sigma2: float = Field(gt=0.0)
    nu3: float
    cdf_t: np.ndarray
    cdf_u: np.ndarray
    nodes: np.ndarray
    probs: np.ndarray
    panels: int
    y_max: float

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    @cached_property
    def _quantile(self) -> PchipInterpolator:
        return PchipInterpolator(self.cdf_u, self.cdf_t, extrapolate=False)

    def quantile(self, u) -> np.ndarray:
        """Inverse CDF by monotone cubic interpolation of the table."""
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        return self._quantile(u)

    def expectation(self, h) -> float:
        """E h(X) for X ~ mu_lambda using the stored quadrature rule."""
        return float(np.dot(self.probs, h(self.nodes)))

    def summary(self) -> dict:
        return {
            "psi": self.psi.spec,
            "lambda": self.lam,
            "log_z": self.log_z,
            "m": self.m,
            "sigma2": self.sigma2,
            "nu3": self.nu3,
        }


class CramerParams(BaseModel):
    """Cramer's condition |phi_Y(t)| <= 1 - epsilon for |t| > delta."""

    model_config = ConfigDict(frozen=True)

    delta: float = Field(gt=0.0)
    epsilon: float = Field(gt=0.0, le=1.0)
    t_at_max: float
    max_modulus: float


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator or an integer seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def _log_z_estimate(psi: YoungFunction, lam: float) -> float:
    # Leb{Psi <= 1/lambda} is within a factor e of Z_lambda
    return math.log(sublevel_length(psi, 1.0 / lam))


def _psi_levels(lam: float, y_max: float, panels: int) -> np.ndarray:
    """Levels in Psi-space: equal Exp(lambda) mass plus a linear sweep of the tail."""
    q = np.linspace(0.0, 1.0, panels + 1)
    with np.errstate(divide="ignore"):
        equal_mass = -np.log1p(-q * (-math.expm1(-lam * y_max))) / lam
    linear = np.linspace(0.0, y_max, max(panels // 4, 2) + 1)
    levels = np.union1d(equal_mass, linear)
    return levels[(levels >= 0.0) & (levels <= y_max)]


def _edges(psi: YoungFunction, levels: np.ndarray) -> np.ndarray:
    pos = np.asarray(inverse_pos(psi, levels))
    neg = np.asarray(inverse_neg(psi, levels))
    edges = np.union1d(neg, pos)
    inside = [b for b in psi.breakpoints if edges[0] < b < edges[-1]]
    return np.union1d(edges, inside)


def _rule(psi: YoungFunction, lam: float, y_max: float, panels: int, order: int):
    edges = _edges(psi, _psi_levels(lam, y_max, panels))
    nodes, weights = composite_rule(edges, order)
    values = psi.eval(nodes)
    dens = weights * np.exp(-lam * values)
    return nodes, values, dens


def _converged_rule(psi: YoungFunction, lam: float, cfg: dict):
    """Double the panel count until Z and m settle."""
    rel, floor = cfg["quad_rel_tol"], cfg["quad_abs_tol"]
    y_max = (cfg["tail_log_cutoff"] + abs(_log_z_estimate(psi, lam))) / lam
    panels = cfg["quad_min_panels"]

    nodes, values, dens = _rule(psi, lam, y_max, panels, cfg["quad_order"])
    z_prev = dens.sum()
    m_prev = np.dot(dens, values) / z_prev

    while True:
        panels *= 2
        if panels > cfg["quad_max_panels"]:
            raise QuadratureFailure(
                f"Tilted quadrature for {psi.spec} at lambda={lam} did not settle",
                estimates=(z_prev, m_prev),
            )
        nodes, values, dens = _rule(psi, lam, y_max, panels, cfg["quad_order"])
        z = dens.sum()
        m = np.dot(dens, values) / z
        logger.debug("tilt %s lambda=%g panels=%d Z=%.17g m=%.17g", psi.spec, lam, panels, z, m)
        if abs(z - z_prev) <= rel * z + floor and abs(m - m_prev) <= rel * m + floor:
            return nodes, values, dens / z, math.log(z), float(m), panels, y_max
        z_prev, m_prev = z, m


def tilted_mean(psi: YoungFunction, lam: float, config: dict = None) -> tuple[float, float]:
    """
    The map R(lambda) = E Psi(X) under mu_lambda, with log Z_lambda.

    Returns:
        (log_z, m)
    """
    if lam <= 0.0:
        raise DomainError(f"lambda must be positive, got {lam}")
    _, _, _, log_z, m, _, _ = _converged_rule(psi, lam, merged_config(config))
    return log_z, m


def _cdf_table(psi: YoungFunction, lam: float, log_z: float, cfg: dict):
    y_max = (cfg["cdf_log_cutoff"] + abs(_log_z_estimate(psi, lam))) / lam
    edges = _edges(psi, _psi_levels(lam, y_max, cfg["cdf_panels"]))
    nodes, weights = composite_rule(edges, CDF_ORDER)
    masses = panel_sums(np.exp(-lam * psi.eval(nodes) - log_z), weights, CDF_ORDER)
    cdf = np.concatenate(([0.0], np.cumsum(masses)))
    cdf /= cdf[-1]
    keep = np.concatenate(([True], np.diff(cdf) > 0.0))
    return edges[keep], cdf[keep]


def build_tilted(psi: YoungFunction, lam: float, config: dict = None) -> TiltedMeasure:
    """
    Build mu_lambda and the moments of Psi(X).

    Args:
        psi: Young function
        lam: Tilt lambda > 0
        config: Optional quadrature overrides

    Returns:
        TiltedMeasure with log Z, m, sigma^2, nu_3 and a CDF table

    Raises:
        DomainError: If lam <= 0
        QuadratureFailure: If panel refinement does not settle
    """
    if lam <= 0.0:
        raise DomainError(f"lambda must be positive, got {lam}")
    cfg = merged_config(config)
    nodes, values, probs, log_z, m, panels, y_max = _converged_rule(psi, lam, cfg)

    centered = values - m
    sigma2 = float(np.dot(probs, centered ** 2))
    nu3 = float(np.dot(probs, np.abs(centered) ** 3)) / sigma2 ** 1.5
    cdf_t, cdf_u = _cdf_table(psi, lam, log_z, cfg)

    return TiltedMeasure(
        psi=psi, lam=float(lam), log_z=log_z, m=m, sigma2=sigma2, nu3=nu3,
        cdf_t=cdf_t, cdf_u=cdf_u, nodes=nodes, probs=probs,
        panels=panels, y_max=y_max,
    )


def solve_lambda(psi: YoungFunction, m_target: float, config: dict = None) -> TiltedMeasure:
    """
    Find lambda with E Psi(X) = m_target under mu_lambda.

    R(lambda) is strictly decreasing (dR/dlambda = -Var Psi(X)), so a bracket
    is grown from lambda = 1 by doubling or halving and then refined by
    Brent's method on log lambda.

    Args:
        psi: Young function
        m_target: Target mean > 0
        config: Optional overrides

    Returns:
        The TiltedMeasure at the solved lambda

    Raises:
        BracketFailure: If no bracket exists inside [lambda_min, lambda_max]
    """
    if m_target <= 0.0:
        raise DomainError(f"m_target must be positive, got {m_target}")
    cfg = merged_config(config)

    def gap(log_lam: float) -> float:
        return math.log(tilted_mean(psi, math.exp(log_lam), cfg)[1]) - math.log(m_target)

    lam = 1.0
    g = gap(0.0)
    step = math.log(2.0) if g > 0.0 else -math.log(2.0)
    lo_bound, hi_bound = math.log(cfg["lambda_min"]), math.log(cfg["lambda_max"])
    a, ga = 0.0, g
    while True:
        b = a + step
        if not lo_bound <= b <= hi_bound:
            raise BracketFailure(
                f"No lambda in [{cfg['lambda_min']}, {cfg['lambda_max']}] gives mean "
                f"{m_target} for {psi.spec}"
            )
        gb = gap(b)
        logger.debug("bracket lambda=%g gap=%g", math.exp(b), gb)
        if gb == 0.0 or (ga > 0.0) != (gb > 0.0):
            break
        a, ga = b, gb

    if gb == 0.0:
        log_lam = b
    else:
        lo, hi = min(a, b), max(a, b)
        log_lam = brentq(gap, lo, hi, xtol=cfg["lambda_rel_tol"], rtol=1e-15)
    lam = math.exp(log_lam)
    tm = build_tilted(psi, lam, cfg)
    logger.debug("solved lambda=%.17g for m=%g (got %.17g)", lam, m_target, tm.m)
    return tm


def sample_1d(tm: TiltedMeasure, rng, count: int) -> np.ndarray:
    """
    Draw i.i.d. samples from mu_lambda by inverse CDF.

    Args:
        tm: Tilted measure
        rng: numpy Generator or integer seed
        count: Number of draws >= 1

    Returns:
        Array of shape (count,)
    """
    if count < 1:
        raise DomainError("count must be >= 1")
    return tm.quantile(as_generator(rng).random(count))


def _char_rule(tm: TiltedMeasure, t_max: float, cfg: dict):
    lam, psi = tm.lam, tm.psi
    y_max = (cfg["cdf_log_cutoff"] + abs(_log_z_estimate(psi, lam))) / lam
    # Phase change per panel at most ~1.5 rad at t_max
    linear_panels = int(math.ceil(abs(t_max) * y_max / tm.sigma / 1.5))
    levels = np.union1d(_psi_levels(lam, y_max, cfg["quad_min_panels"] * 4),
                        np.linspace(0.0, y_max, max(linear_panels, 2) + 1))
    edges = _edges(psi, levels)
    nodes, weights = composite_rule(edges, cfg["quad_order"])
    values = psi.eval(nodes)
    probs = weights * np.exp(-lam * values - tm.log_z)
    return (values - tm.m) / tm.sigma, probs


def char_modulus_many(tm: TiltedMeasure, ts, config: dict = None) -> np.ndarray:
    """|E exp(i t Y)| for Y = (Psi(X) - m) / sigma on an array of t."""
    cfg = merged_config(config)
    ts = np.abs(np.atleast_1d(np.asarray(ts, dtype=float)))
    y, probs = _char_rule(tm, ts.max() if ts.size else 0.0, cfg)
    out = np.empty_like(ts)
    chunk = max(1, int(4_000_000 // max(y.size, 1)))
    for start in range(0, ts.size, chunk):
        phase = np.outer(ts[start:start + chunk], y)
        re = np.cos(phase) @ probs
        im = np.sin(phase) @ probs
        out[start:start + chunk] = np.hypot(re, im)
    return np.minimum(out, 1.0)


def char_modulus(tm: TiltedMeasure, t: float, config: dict = None) -> float:
    """
    Modulus of the characteristic function of the standardized Psi(X).

    Args:
        tm: Tilted measure
        t: Frequency

    Returns:
        |phi_Y(t)| in [0, 1]
    """
    if t == 0.0:
        return 1.0
    return float(char_modulus_many(tm, [t], config)[0])


def estimate_cramer(tm: TiltedMeasure, delta: float, t_max: float, step: float = 0.01,
                    config: dict = None) -> CramerParams:
    """
    Estimate epsilon in Cramer's condition on the grid delta <= |t| <= t_max.

    The law of Y is real, so |phi_Y(-t)| = |phi_Y(t)| and only t > 0 is scanned.

    Raises:
        NoCramer: If the modulus reaches 1 on the grid
    """
    if not 0.0 < delta < t_max:
        raise DomainError(f"Need 0 < delta < t_max, got delta={delta}, t_max={t_max}")
    step = min(step, 0.01)
    grid = np.arange(delta, t_max + 0.5 * step, step)
    mods = char_modulus_many(tm, grid, config)
    idx = int(np.argmax(mods))
    epsilon = 1.0 - float(mods[idx])
    if epsilon <= 0.0:
        raise NoCramer(
            f"|phi_Y| reaches 1 at t={grid[idx]:.4g} for {tm.psi.spec}; "
            f"Psi(X) looks lattice-valued"
        )
    return CramerParams(delta=delta, epsilon=epsilon, t_at_max=float(grid[idx]),
                        max_modulus=float(mods[idx]))
