"""Uniform sampling on Orlicz balls by rejection from the product tilted measure."""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .config import merged_config
from .errors import BoundViolation, BudgetExceeded, DomainError
from .tilt import TiltedMeasure, as_generator, sample_1d, solve_lambda
from .volume import BallSpec, split_counts

logger = logging.getLogger(__name__)

# Re-solve lambda unless the attached measure already sits at alpha ~ 0
ALPHA_SOLVED = 1e-6


class SampleBatch(BaseModel):
    """Accepted points (one row each) with their provenance."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    points: np.ndarray
    seed: Optional[int] = None
    proposals_used: int = Field(ge=1)
    acceptance_rate: float = Field(gt=0.0, le=1.0)
    lam: float
    workers: int = 1

    @model_validator(mode="after")
    def _check_rate(self):
        expected = self.points.shape[0] / self.proposals_used
        if not math.isclose(self.acceptance_rate, expected, rel_tol=1e-12):
            raise ValueError(f"acceptance_rate {self.acceptance_rate} != count/proposals {expected}")
        return self

    @property
    def count(self) -> int:
        return self.points.shape[0]

    @property
    def n(self) -> int:
        return self.points.shape[1]

    def to_frame(self) -> pd.DataFrame:
        """One row per point, columns x1..xn."""
        return pd.DataFrame(self.points, columns=[f"x{i + 1}" for i in range(self.n)])


def predict_acceptance(spec: BallSpec, tm: TiltedMeasure = None) -> float:
    """
    Leading-order acceptance rate e^{-alpha^2/2} / (lambda sigma sqrt(2 pi n)).

    Args:
        spec: Ball description
        tm: Proposal measure (defaults to spec.tm)

    Returns:
        Predicted rate, clipped to at most 1
    """
    tm = tm or spec.tm
    if tm is None:
        raise DomainError("predict_acceptance needs a tilted measure")
    n = spec.n
    if n < 16.0 * tm.lam ** 2 * tm.sigma2:
        logger.warning(
            "n=%d is below 16 lambda^2 sigma^2 = %.3g; the acceptance prediction is rough",
            n, 16.0 * tm.lam ** 2 * tm.sigma2,
        )
    alpha = (spec.E - tm.m * n) / (tm.sigma * math.sqrt(n))
    rate = math.exp(-0.5 * alpha * alpha) / (tm.lam * tm.sigma * math.sqrt(2.0 * math.pi * n))
    return min(rate, 1.0)


def _sample_shard(spec: BallSpec, tm: TiltedMeasure, rng: np.random.Generator, need: int,
                  rate: float, budget: float, chunk_values: int) -> tuple[np.ndarray, int]:
    n, E, lam = spec.n, spec.E, tm.lam
    rows_cap = max(1, chunk_values // n)
    accepted = []
    have = 0
    proposals = 0

    while have < need:
        rows = min(rows_cap, max(256, int(math.ceil(1.2 * (need - have) / rate))))
        x = sample_1d(tm, rng, rows * n).reshape(rows, n)
        total = spec.psi.eval(x).sum(axis=1)
        log_u = np.log(rng.random(rows))
        keep = np.nonzero((total <= E) & (log_u <= lam * (total - E)))[0]

        take = keep[:need - have]
        if have + take.size == need and take.size:
            proposals += int(take[-1]) + 1
        else:
            proposals += rows
        accepted.append(x[take])
        have += take.size

        if proposals > budget:
            raise BudgetExceeded(
                f"Used {proposals} proposals for {have}/{need} points (budget {budget:.0f}); "
                f"the ball may be far from the solved tilt or n too large"
            )
    return np.concatenate(accepted, axis=0), proposals


def sample_uniform_ball(spec: BallSpec, tm: TiltedMeasure = None, rng=0, count: int = 1,
                        workers: int = None, config: dict = None) -> SampleBatch:
    """
    Draw `count` exact uniform points from B^n_{Psi/E}.

    Proposals X ~ mu_lambda^n are accepted when sum Psi(X_i) <= E and
    U <= e^{lambda (sum Psi(X_i) - E)}. Lambda is always solved from E/n
    (alpha = 0); the uniform law does not depend on it.

    Args:
        spec: Ball description
        tm: Optional measure; replaced unless it already gives alpha ~ 0
        rng: Generator or integer seed
        count: Number of points >= 1
        workers: Shard count; points are concatenated in worker order

    Returns:
        SampleBatch

    Raises:
        BudgetExceeded: If proposals exceed budget_factor * count / predicted rate
    """
    cfg = merged_config(config)
    if count < 1:
        raise DomainError("count must be >= 1")
    tm = tm or spec.tm
    if tm is None or abs((spec.E - tm.m * spec.n) / (tm.sigma * math.sqrt(spec.n))) > ALPHA_SOLVED:
        tm = solve_lambda(spec.psi, spec.E / spec.n, cfg)
        logger.debug("sampler re-solved lambda=%.12g for E/n=%g", tm.lam, spec.E / spec.n)
    spec = spec.with_tilt(tm)

    workers = workers or cfg["workers"]
    seed = rng if isinstance(rng, (int, np.integer)) else None
    rate = predict_acceptance(spec, tm)
    counts = split_counts(count, workers)
    children = as_generator(rng).spawn(workers)

    def run(args):
        child, need = args
        if need == 0:
            return np.empty((0, spec.n)), 0
        budget = cfg["budget_factor"] * need / rate
        return _sample_shard(spec, tm, child, need, rate, budget, cfg["chunk_values"])

    with ThreadPoolExecutor(max_workers=workers) as pool:
        shards = list(pool.map(run, zip(children, counts)))

    points = np.concatenate([pts for pts, _ in shards], axis=0)
    proposals = sum(used for _, used in shards)
    if not np.all(spec.psi.eval(points).sum(axis=1) <= spec.E):
        raise BoundViolation("Sampler returned a point outside the ball")

    logger.debug("sampled %d points with %d proposals over %d worker(s)", count, proposals, workers)
    return SampleBatch(
        points=points,
        seed=None if seed is None else int(seed),
        proposals_used=proposals,
        acceptance_rate=count / proposals,
        lam=tm.lam,
        workers=workers,
    )
