"""Log-volumes of Orlicz balls B^n_{Psi/E} = {x : sum Psi(x_i) <= E}."""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.special import erfcx, log_ndtr

from .config import merged_config
from .errors import AllRejected, BoundViolation, DomainError, GridTooCoarse
from .logsum import LogMeanAccumulator, tree_merge
from .quadrature import integrate
from .special import log_lp_ball_volume, mills_value
from .tilt import TiltedMeasure, as_generator, sample_1d, solve_lambda
from .young import YoungFunction, sublevel_length

logger = logging.getLogger(__name__)

Method = Literal["asymptotic", "mc", "convolution", "closed_form"]

LOG_2PI = math.log(2.0 * math.pi)


class BallSpec(BaseModel):
    """
    The ball B^n_{Psi/E}, optionally with the tilted measure used to study it.

    With a measure attached, alpha = (E - m n) / (sigma sqrt(n)).
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    psi: YoungFunction
    n: int = Field(ge=1)
    E: float = Field(gt=0.0)
    tm: Optional[TiltedMeasure] = None

    @property
    def alpha(self) -> Optional[float]:
        if self.tm is None:
            return None
        return (self.E - self.tm.m * self.n) / (self.tm.sigma * math.sqrt(self.n))

    @classmethod
    def solved(cls, psi: YoungFunction, n: int, E: float, config: dict = None) -> "BallSpec":
        """Attach the measure whose mean is E/n, so alpha = 0."""
        return cls(psi=psi, n=n, E=E, tm=solve_lambda(psi, E / n, config))

    @classmethod
    def at_alpha(cls, tm: TiltedMeasure, n: int, alpha: float) -> "BallSpec":
        """Level E = m n + alpha sigma sqrt(n)."""
        E = tm.m * n + alpha * tm.sigma * math.sqrt(n)
        if E <= 0.0:
            raise DomainError(f"alpha={alpha} gives a non-positive level E={E} at n={n}")
        return cls(psi=tm.psi, n=n, E=E, tm=tm)

    @classmethod
    def at_offset(cls, tm: TiltedMeasure, n: int, a: float) -> "BallSpec":
        """Level E = m n + a sqrt(n), i.e. alpha = a / sigma."""
        return cls.at_alpha(tm, n, a / tm.sigma)

    def with_tilt(self, tm: TiltedMeasure) -> "BallSpec":
        return self.model_copy(update={"tm": tm})


class LogVolume(BaseModel):
    """A volume in log domain with its method tag and diagnostics."""

    model_config = ConfigDict(frozen=True)

    log_value: float
    method: Method
    diagnostics: dict[str, float] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check(self):
        if not math.isfinite(self.log_value):
            raise ValueError(f"log_value must be finite, got {self.log_value}")
        if self.method == "mc" and not self.diagnostics.get("standard_error", 0.0) > 0.0:
            raise ValueError("Monte Carlo volumes must carry a positive standard_error")
        return self

    @property
    def value(self) -> Optional[float]:
        """The raw volume when it fits in a double, else None."""
        return math.exp(self.log_value) if abs(self.log_value) < 700.0 else None


class MillsRatio(BaseModel):
    model_config = ConfigDict(frozen=True)

    lower: float
    value: float
    upper: float


def _tilt_for(spec: BallSpec, tm: Optional[TiltedMeasure]) -> TiltedMeasure:
    tm = tm or spec.tm
    if tm is None:
        raise DomainError("No tilted measure: pass tm or build the spec with BallSpec.solved")
    if tm.psi.spec != spec.psi.spec:
        raise DomainError(f"Measure built for {tm.psi.spec}, ball uses {spec.psi.spec}")
    return tm


def log_volume_asymptotic(spec: BallSpec, tm: TiltedMeasure = None) -> LogVolume:
    """
    Leading-order volume Z^n e^{lambda E} e^{-alpha^2/2} / (lambda sigma sqrt(2 pi n)).

    Valid for any lambda; the error is O(n^{-1/2}) and grows with |alpha|.

    Args:
        spec: Ball description
        tm: Tilted measure for spec.psi (defaults to spec.tm)

    Returns:
        LogVolume with method "asymptotic"
    """
    tm = _tilt_for(spec, tm)
    alpha = (spec.E - tm.m * spec.n) / (tm.sigma * math.sqrt(spec.n))
    return LogVolume(
        log_value=float(asymptotic_log_volumes(tm, spec.n, spec.E)),
        method="asymptotic",
        diagnostics={"lambda": tm.lam, "alpha": alpha, "correction_order": spec.n ** -0.5},
    )


def asymptotic_log_volumes(tm: TiltedMeasure, n: int, levels):
    """The leading-order log-volume for an array of levels at one dimension n."""
    levels = np.asarray(levels, dtype=float)
    alpha = (levels - tm.m * n) / (tm.sigma * math.sqrt(n))
    return (n * tm.log_z + tm.lam * levels
            - math.log(tm.lam * tm.sigma) - 0.5 * (LOG_2PI + math.log(n))
            - 0.5 * alpha * alpha)


def log_volume_closed_form(spec: BallSpec) -> LogVolume:
    """
    Exact volume for Psi(t) = a|t|^p: (2 Gamma(1+1/p))^n (E/a)^{n/p} / Gamma(1+n/p).

    Raises:
        DomainError: If Psi is not a pure power
    """
    law = spec.psi.power_law
    if law is None:
        raise DomainError(f"No closed form for {spec.psi.spec}; use convolution or mc")
    a, p = law
    return LogVolume(
        log_value=log_lp_ball_volume(p, spec.n, spec.E, a),
        method="closed_form",
        diagnostics={"p": p, "weight": a},
    )


def sublevel_volumes(psi: YoungFunction, k: int, s_max: float, cells: int) -> tuple[np.ndarray, np.ndarray]:
    """
    V_k(s) = Vol_k{sum_{i<=k} Psi(x_i) <= s} on s_j = j s_max / cells.

    Uses k-1 discrete convolutions of the sublevel-length measure.
    """
    s = np.linspace(0.0, s_max, cells + 1)
    sub = np.asarray(sublevel_length(psi, s), dtype=float)
    # Exact mass of each cell, including the singular first one
    mass = np.diff(sub)
    level = sub
    for _ in range(k - 1):
        avg = 0.5 * (level[1:] + level[:-1])
        level = np.concatenate(([0.0], np.convolve(mass, avg)[:cells]))
    return s, level


def _convolve_levels(psi: YoungFunction, n: int, E: float, cells: int) -> float:
    return float(sublevel_volumes(psi, n, E, cells)[1][-1])


def log_volume_convolution(spec: BallSpec, grid_step: float = None, config: dict = None) -> LogVolume:
    """
    Brute-force volume for small n by convolving the law of Psi under Lebesgue.

    The volume V_k(s) of {sum_{i<=k} Psi(x_i) <= s} satisfies
    V_k(s) = int V_{k-1}(s - u) dL(u) with L(u) = Leb{Psi <= u}; each cell of
    L is integrated exactly and V_{k-1} is averaged over the cell.

    Args:
        spec: Ball with n <= convolution_max_dim
        grid_step: Cell width, at most E/1000 (default E/convolution_cells)

    Returns:
        LogVolume with method "convolution" from the halved step

    Raises:
        DomainError: If n or grid_step is out of range
        GridTooCoarse: If halving the step moves the result by more than grid_tolerance
    """
    cfg = merged_config(config)
    if spec.n > cfg["convolution_max_dim"]:
        raise DomainError(
            f"Convolution oracle supports n <= {cfg['convolution_max_dim']}, got {spec.n}"
        )
    step = grid_step or spec.E / cfg["convolution_cells"]
    if step > spec.E / 1000.0 * (1.0 + 1e-12):
        raise DomainError(f"grid_step must be <= E/1000 = {spec.E / 1000.0}, got {step}")

    cells = int(round(spec.E / step))
    coarse = _convolve_levels(spec.psi, spec.n, spec.E, cells)
    fine = _convolve_levels(spec.psi, spec.n, spec.E, 2 * cells)
    if coarse <= 0.0 or fine <= 0.0:
        raise GridTooCoarse(f"Convolution underflowed for n={spec.n}, E={spec.E}",
                            estimates=(coarse, fine))
    change = abs(fine - coarse) / fine
    if change > cfg["grid_tolerance"]:
        raise GridTooCoarse(
            f"Halving the step changed the volume by {change:.3g}; use a smaller grid_step",
            estimates=(coarse, fine),
        )
    logger.debug("convolution n=%d E=%g cells=%d change=%.3g", spec.n, spec.E, cells, change)
    return LogVolume(
        log_value=math.log(fine),
        method="convolution",
        diagnostics={"grid_step": spec.E / (2 * cells), "halving_change": change},
    )


def level_weight_shard(tm: TiltedMeasure, n: int, rate: float, level: float,
                       rng: np.random.Generator, samples: int,
                       chunk_values: int) -> LogMeanAccumulator:
    """
    Accumulate log W, W = e^{rate (S - level)} 1{S <= level}, S = sum_{i<=n} Psi(X_i).

    X ~ mu_lambda^n is drawn in chunks of at most chunk_values coordinates.
    """
    acc = LogMeanAccumulator()
    rows_per_chunk = max(1, chunk_values // n)
    done = 0
    while done < samples:
        rows = min(rows_per_chunk, samples - done)
        x = sample_1d(tm, rng, rows * n).reshape(rows, n)
        total = tm.psi.eval(x).sum(axis=1)
        acc.add(np.where(total <= level, rate * (total - level), -np.inf))
        done += rows
    return acc


def split_counts(total: int, workers: int) -> list[int]:
    """Split `total` into `workers` near-equal shares, larger shares first."""
    base, extra = divmod(total, workers)
    return [base + (1 if i < extra else 0) for i in range(workers)]


def log_volume_mc(spec: BallSpec, tm: TiltedMeasure = None, rng=0, samples: int = 10**6,
                  workers: int = None, config: dict = None) -> LogVolume:
    """
    Importance-sampling volume: Vol = Z^n e^{lambda E} E[e^{lambda(S - E)} 1{S <= E}].

    S = sum Psi(X_i) with X ~ mu_lambda^n. Shards run on independent child
    generators and are merged in a fixed tree, so the result depends only on
    (seed, workers).

    Args:
        spec: Ball description
        tm: Proposal measure (defaults to spec.tm)
        rng: Generator or integer seed
        samples: Number of proposals >= 1000
        workers: Shard count (default from config)

    Returns:
        LogVolume with method "mc" and the delta-method standard error of the log

    Raises:
        AllRejected: If fewer than min_accepted proposals land in the ball
    """
    cfg = merged_config(config)
    tm = _tilt_for(spec, tm)
    if samples < 1000:
        raise DomainError(f"Monte Carlo volume needs samples >= 1000, got {samples}")
    workers = workers or cfg["workers"]
    children = as_generator(rng).spawn(workers)
    counts = split_counts(samples, workers)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        shards = list(pool.map(
            lambda args: level_weight_shard(tm, spec.n, tm.lam, spec.E, args[0], args[1],
                                           cfg["chunk_values"]),
            zip(children, counts),
        ))
    acc = tree_merge(shards)

    if acc.hits < cfg["min_accepted"]:
        raise AllRejected(
            f"Only {acc.hits} of {samples} proposals landed in the ball; "
            f"solve lambda from E/n = {spec.E / spec.n:g} instead of lambda={tm.lam:g}"
        )
    return LogVolume(
        log_value=spec.n * tm.log_z + tm.lam * spec.E + acc.log_mean,
        method="mc",
        diagnostics={
            "lambda": tm.lam,
            "alpha": (spec.E - tm.m * spec.n) / (tm.sigma * math.sqrt(spec.n)),
            "standard_error": max(acc.log_standard_error, 1e-16),
            "accepted": float(acc.hits),
            "samples": float(samples),
        },
    )


def log_volume(spec: BallSpec, method: Method = "asymptotic", rng=0, samples: int = 10**6,
               grid_step: float = None, workers: int = None, config: dict = None) -> LogVolume:
    """Dispatch to one of the volume methods, solving lambda from E/n when needed."""
    if method == "closed_form":
        return log_volume_closed_form(spec)
    if method == "convolution":
        return log_volume_convolution(spec, grid_step, config)
    if spec.tm is None:
        spec = spec.with_tilt(solve_lambda(spec.psi, spec.E / spec.n, config))
    if method == "mc":
        return log_volume_mc(spec, rng=rng, samples=samples, workers=workers, config=config)
    if method == "asymptotic":
        return log_volume_asymptotic(spec)
    raise DomainError(f"Unknown method '{method}'")


def exp_gaussian_closed_form(s: float, alpha: float, lam: float) -> float:
    """
    int_0^inf lam e^{-lam x} phi((x - alpha)/s) / s dx.

    Equals lam e^{-lam alpha + lam^2 s^2/2} (1 - Phi(lam s - alpha/s)); written
    as lam e^{-alpha^2/(2 s^2)} erfcx(z/sqrt 2)/2 with z = lam s - alpha/s.
    """
    if s <= 0.0 or lam <= 0.0:
        raise DomainError("exp_gaussian_closed_form needs s > 0 and lam > 0")
    z = lam * s - alpha / s
    if z > -20.0:
        return float(lam * math.exp(-0.5 * (alpha / s) ** 2) * 0.5 * erfcx(z / math.sqrt(2.0)))
    return float(math.exp(math.log(lam) - lam * alpha + 0.5 * (lam * s) ** 2 + log_ndtr(-z)))


def exp_gaussian_integral(s: float, alpha: float, lam: float) -> float:
    """The same integral by adaptive quadrature (oracle for the closed form)."""
    z = lam * s - alpha / s
    # The integrand decays at least like exp(-z x / s) past 0 when z > 0
    upper = 80.0 * s / z if z > 1.0 else max(alpha, 0.0) + 40.0 * s + 80.0 / lam
    norm = 1.0 / (s * math.sqrt(2.0 * math.pi))

    def integrand(x):
        return lam * norm * np.exp(-lam * x - 0.5 * ((x - alpha) / s) ** 2)

    return integrate(integrand, 0.0, upper, rel_tol=1e-13, abs_tol=0.0)


def mills_ratio_bounds(t: float) -> MillsRatio:
    """
    sqrt(2 pi) e^{t^2/2} (1 - Phi(t)) with the bounds 1/sqrt(t^2+2) <= . <= 1/t.

    Raises:
        DomainError: If t <= 0
        BoundViolation: If the computed value leaves the bracket
    """
    if t <= 0.0:
        raise DomainError(f"mills_ratio_bounds needs t > 0, got {t}")
    value = float(mills_value(t))
    lower, upper = 1.0 / math.sqrt(t * t + 2.0), 1.0 / t
    slack = 4.0 * np.finfo(float).eps * value
    if not lower - slack <= value <= upper + slack:
        raise BoundViolation(f"Mills ratio {value!r} at t={t} outside [{lower!r}, {upper!r}]")
    return MillsRatio(lower=lower, value=value, upper=upper)


def section_function(spec: BallSpec, t: float, tm: TiltedMeasure = None,
                     method: str = "auto", config: dict = None) -> float:
    """
    log f(t), f(t) = Vol_{n-1} of the section {x in B^n_{Psi/E} : x_1 = t}.

    The section is the ball B^{n-1}_{Psi/(E - Psi(t))}. With method "auto"
    the exact formula is used for pure powers, the convolution oracle for
    n - 1 <= convolution_max_dim, and the asymptotic formula otherwise
    (reusing `tm` when given, else re-solving lambda).

    Returns:
        log f(t), or -inf when Psi(t) >= E
    """
    cfg = merged_config(config)
    rest = spec.E - spec.psi.eval(t)
    if rest <= 0.0:
        return -math.inf
    if spec.n == 1:
        return 0.0

    sub = BallSpec(psi=spec.psi, n=spec.n - 1, E=rest)
    if method == "auto":
        if spec.psi.power_law is not None:
            method = "closed_form"
        elif sub.n <= cfg["convolution_max_dim"]:
            method = "convolution"
        else:
            method = "asymptotic"

    if method == "asymptotic":
        tm = tm or solve_lambda(spec.psi, rest / sub.n, cfg)
        return log_volume_asymptotic(sub, tm).log_value
    return log_volume(sub, method, config=cfg).log_value
