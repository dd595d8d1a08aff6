"""Fairness statistics over per-second throughput samples."""

from dataclasses import dataclass

import numpy as np


def normalized_rate(x_bps: float, capacity_bps: float, n: int) -> float:
    """Rate of one flow relative to an equal share, x / (C / n)."""
    if n < 1:
        raise ValueError("flow count must be at least 1")
    if capacity_bps <= 0:
        raise ValueError("capacity must be positive")
    return x_bps * n / capacity_bps


def stabilization_time_s(rate_bps: float, rtt_s: float) -> float:
    """Seconds to wait before measuring: 5 + x*R/100000, x in b/s, R in s."""
    return 5.0 + rate_bps * rtt_s / 100_000


@dataclass(frozen=True)
class Whiskers:
    p1: float
    mean: float
    p99: float
    n: int

    def within(self, lo: float, hi: float) -> bool:
        return lo <= self.mean <= hi


def whiskers(samples) -> Whiskers:
    a = np.asarray(samples, dtype=np.float64)
    if a.size == 0:
        return Whiskers(float("nan"), float("nan"), float("nan"), 0)
    p1, p99 = np.percentile(a, [1, 99])
    return Whiskers(float(p1), float(a.mean()), float(p99), int(a.size))


def normalized_samples(bundle, fids, n_share: int, t0_us: int, bin_us: int = 1_000_000):
    """Per-second normalized rates of the given flows after t0, one row per flow."""
    rates = bundle.per_bin_rates(bin_us)
    first = -(-t0_us // bin_us)
    last = bundle.duration_us // bin_us
    cap = bundle.config.rate_bps
    out = {}
    for fid in fids:
        row = rates[fid, first:last] if fid < rates.shape[0] else np.zeros(0)
        out[fid] = row * n_share / cap
    return out


def class_whiskers(bundle, kind: str, n_share: int, t0_us: int) -> Whiskers:
    """Whiskers of the per-second class-average normalized rate of long flows."""
    fids = bundle.flow_ids(kind, long=True)
    if not fids:
        return whiskers([])
    per_flow = normalized_samples(bundle, fids, n_share, t0_us)
    stacked = np.vstack([per_flow[f] for f in fids])
    return whiskers(stacked.mean(axis=0))
