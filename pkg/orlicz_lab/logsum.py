"""Running log-sum-exp accumulation for importance weights."""

import math

import numpy as np
from scipy.special import logsumexp


class LogMeanAccumulator:
    """
    Accumulates weights W given as log W, without leaving the log domain.

    Keeps log(sum W), log(sum W^2), the number of draws and the number of
    draws with W > 0. Accumulators from independent shards are combined with
    `tree_merge`, whose pairing depends only on the number of shards.
    """

    def __init__(self):
        self.log_sum = -math.inf
        self.log_sum_sq = -math.inf
        self.count = 0
        self.hits = 0

    def add(self, log_w: np.ndarray) -> None:
        log_w = np.asarray(log_w, dtype=float).ravel()
        self.count += log_w.size
        finite = log_w[np.isfinite(log_w)]
        if finite.size == 0:
            return
        self.hits += finite.size
        self.log_sum = float(np.logaddexp(self.log_sum, logsumexp(finite)))
        self.log_sum_sq = float(np.logaddexp(self.log_sum_sq, logsumexp(2.0 * finite)))

    def merge(self, other: "LogMeanAccumulator") -> "LogMeanAccumulator":
        out = LogMeanAccumulator()
        out.log_sum = float(np.logaddexp(self.log_sum, other.log_sum))
        out.log_sum_sq = float(np.logaddexp(self.log_sum_sq, other.log_sum_sq))
        out.count = self.count + other.count
        out.hits = self.hits + other.hits
        return out

    @property
    def log_mean(self) -> float:
        if self.count == 0:
            return -math.inf
        return self.log_sum - math.log(self.count)

    @property
    def relative_variance(self) -> float:
        """Var(W) / E(W)^2 estimated from the draws."""
        if self.hits == 0:
            return math.inf
        log_mean_sq = self.log_sum_sq - math.log(self.count)
        return max(math.exp(log_mean_sq - 2.0 * self.log_mean) - 1.0, 0.0)

    @property
    def log_standard_error(self) -> float:
        """Delta-method standard error of log(mean W)."""
        if self.count == 0:
            return math.inf
        return math.sqrt(self.relative_variance / self.count)


def tree_merge(accumulators: list) -> LogMeanAccumulator:
    """Pairwise merge with a shape fixed by the list length."""
    level = list(accumulators)
    if not level:
        return LogMeanAccumulator()
    while len(level) > 1:
        paired = [level[i].merge(level[i + 1]) for i in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            paired.append(level[-1])
        level = paired
    return level[0]
