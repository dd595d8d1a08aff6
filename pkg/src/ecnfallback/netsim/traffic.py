"""Web-like traffic: Poisson arrivals of flows with truncated-Pareto sizes."""

import math
import random

PARETO_ALPHA = 0.9
SIZE_MIN = 1_000
SIZE_MAX = 1_000_000
# one request per second per 4 Mb/s of link rate
REQ_PER_BPS = 1 / 4e6


def pareto_truncated(rng: random.Random, alpha: float = PARETO_ALPHA,
                     lo: float = SIZE_MIN, hi: float = SIZE_MAX) -> int:
    """Inverse-CDF draw from a Pareto(alpha, lo) truncated at hi."""
    u = rng.random()
    tail = (lo / hi) ** alpha
    return int(lo / (1 - u * (1 - tail)) ** (1 / alpha))


def pareto_truncated_mean(alpha: float = PARETO_ALPHA, lo: float = SIZE_MIN,
                          hi: float = SIZE_MAX) -> float:
    norm = 1 - (lo / hi) ** alpha
    if alpha == 1:
        return lo * math.log(hi / lo) / norm
    return alpha * lo ** alpha * (hi ** (1 - alpha) - lo ** (1 - alpha)) / ((1 - alpha) * norm)


def request_rate(rate_bps: float) -> float:
    return rate_bps * REQ_PER_BPS


class WebArrivals:
    """Exponential inter-arrival times and Pareto sizes from one RNG."""

    def __init__(self, rate_bps: float, seed: int):
        self.rng = random.Random(seed)
        self.lam = request_rate(rate_bps)

    def next_gap_us(self) -> int:
        return max(1, int(self.rng.expovariate(self.lam) * 1e6))

    def next_size(self) -> int:
        return pareto_truncated(self.rng)
