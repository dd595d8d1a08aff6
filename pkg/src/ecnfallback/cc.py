"""Congestion control engines: Prague with classic fallback, Cubic and Reno.

Windows are in segments (floats). Engines only do window arithmetic; the
sender decides when a round ends and when a reduction is allowed, and
passes the current time in microseconds where an engine needs it.
"""

import math

BETA_ABE = 0.7
ALPHA_ABE = 2 * (1 - BETA_ABE)
ALPHA_BITS = 20
ALPHA_ONE = 1 << ALPHA_BITS
CWND_FLOOR = 2.0

CUBIC_C = 0.4
CUBIC_BETA = 0.7


def prague_reduction(cwnd: float, alpha: float, c: float, alt: int = 2) -> float:
    """Window reduction on CE for a scalable sender blended toward ABE-Reno.

    Alt#2 takes the larger of the scalable and classic responses, Alt#1
    interpolates between them linearly in c.
    """
    if alt == 1:
        return cwnd * (alpha + c * (ALPHA_ABE - alpha)) / 2
    return cwnd * max(alpha, c * ALPHA_ABE) / 2


class PragueCC:
    """DCTCP-style alpha and additive increase with fallback changeover."""

    name = "prague"
    __slots__ = ("cwnd", "ssthresh", "alpha_fp", "g_shift", "alt", "fallback",
                 "round_acked", "round_ce", "ai")

    def __init__(self, init_cwnd: float = 10.0, alt: int = 2, fallback: bool = True,
                 g_shift: int = 4, ai: float = 1.0):
        self.cwnd = float(init_cwnd)
        self.ssthresh = math.inf
        self.alpha_fp = ALPHA_ONE
        self.g_shift = g_shift
        self.alt = alt
        self.fallback = fallback
        self.round_acked = 0
        self.round_ce = 0
        self.ai = ai

    @property
    def alpha(self) -> float:
        return self.alpha_fp / ALPHA_ONE

    @property
    def in_slow_start(self) -> bool:
        return self.cwnd < self.ssthresh

    def account(self, acked_bytes: int, ce_bytes: int) -> None:
        self.round_acked += acked_bytes
        self.round_ce += ce_bytes

    def on_ack(self, acked_segs: float, now_us: int = 0) -> None:
        if self.cwnd < self.ssthresh:
            self.cwnd += acked_segs
        else:
            self.cwnd += self.ai * acked_segs / self.cwnd

    def on_round_end(self) -> None:
        if self.round_acked > 0:
            f_fp = (min(self.round_ce, self.round_acked) << ALPHA_BITS) // self.round_acked
            self.alpha_fp += (f_fp - self.alpha_fp) >> self.g_shift
        self.round_acked = 0
        self.round_ce = 0

    def set_rtt(self, rtt_us: int) -> None:
        pass

    def on_ce(self, c: float) -> float:
        """Apply one reduction; returns the new ssthresh."""
        if not self.fallback:
            c = 0.0
        red = prague_reduction(self.cwnd, self.alpha, c, self.alt)
        self.cwnd = max(self.cwnd - red, CWND_FLOOR)
        self.ssthresh = self.cwnd
        return self.ssthresh

    def on_loss(self, now_us: int = 0) -> float:
        self.cwnd = max(self.cwnd / 2, CWND_FLOOR)
        self.ssthresh = self.cwnd
        return self.ssthresh

    def on_timeout(self, now_us: int = 0) -> float:
        self.ssthresh = max(self.cwnd / 2, CWND_FLOOR)
        self.cwnd = CWND_FLOOR
        return self.ssthresh


class RenoCC:
    """Reno with classic ECN: a CE mark counts as a loss."""

    name = "reno"
    __slots__ = ("cwnd", "ssthresh", "beta")

    def __init__(self, init_cwnd: float = 10.0, beta: float = 0.5):
        self.cwnd = float(init_cwnd)
        self.ssthresh = math.inf
        self.beta = beta

    @property
    def in_slow_start(self) -> bool:
        return self.cwnd < self.ssthresh

    def on_ack(self, acked_segs: float, now_us: int = 0) -> None:
        if self.cwnd < self.ssthresh:
            self.cwnd += acked_segs
        else:
            self.cwnd += acked_segs / self.cwnd

    def on_congestion(self, now_us: int = 0) -> float:
        self.cwnd = max(self.cwnd * self.beta, CWND_FLOOR)
        self.ssthresh = self.cwnd
        return self.ssthresh

    on_ce = on_congestion
    on_loss = on_congestion

    def on_timeout(self, now_us: int = 0) -> float:
        self.ssthresh = max(self.cwnd * self.beta, CWND_FLOOR)
        self.cwnd = CWND_FLOOR
        return self.ssthresh

    def set_rtt(self, rtt_us: int) -> None:
        pass


class CubicCC:
    """Cubic window growth with a Reno-friendly floor, beta 0.7 on CE or loss."""

    name = "cubic"
    __slots__ = ("cwnd", "ssthresh", "w_max", "k", "epoch", "w_est", "rtt_us", "fast_convergence")

    def __init__(self, init_cwnd: float = 10.0, fast_convergence: bool = True):
        self.cwnd = float(init_cwnd)
        self.ssthresh = math.inf
        self.w_max = 0.0
        self.k = 0.0
        self.epoch = -1
        self.w_est = 0.0
        self.rtt_us = 100_000
        self.fast_convergence = fast_convergence

    @property
    def in_slow_start(self) -> bool:
        return self.cwnd < self.ssthresh

    def set_rtt(self, rtt_us: int) -> None:
        if rtt_us > 0:
            self.rtt_us = rtt_us

    def w_cubic(self, t_s: float) -> float:
        return CUBIC_C * (t_s - self.k) ** 3 + self.w_max

    def on_ack(self, acked_segs: float, now_us: int) -> None:
        if self.cwnd < self.ssthresh:
            self.cwnd += acked_segs
            return
        if self.epoch < 0:
            self.epoch = now_us
            if self.w_max < self.cwnd:
                # no previous reduction (or we passed it): grow from here
                self.w_max = self.cwnd
                self.k = 0.0
            else:
                self.k = ((self.w_max - self.cwnd) / CUBIC_C) ** (1 / 3)
            self.w_est = self.cwnd
        t = (now_us - self.epoch + self.rtt_us) / 1e6
        target = self.w_cubic(t)
        if target > 1.5 * self.cwnd:
            target = 1.5 * self.cwnd
        cw = self.cwnd
        if target > cw:
            cw += (target - cw) / cw * acked_segs
        else:
            cw += 0.01 * acked_segs / cw
        alpha = 3 * (1 - CUBIC_BETA) / (1 + CUBIC_BETA)
        self.w_est += alpha * acked_segs / self.cwnd
        self.cwnd = max(cw, self.w_est)

    def on_congestion(self, now_us: int = 0) -> float:
        if self.fast_convergence and self.cwnd < self.w_max:
            self.w_max = self.cwnd * (1 + CUBIC_BETA) / 2
        else:
            self.w_max = self.cwnd
        self.cwnd = max(self.cwnd * CUBIC_BETA, CWND_FLOOR)
        self.ssthresh = self.cwnd
        self.k = ((self.w_max - self.cwnd) / CUBIC_C) ** (1 / 3) if self.w_max > self.cwnd else 0.0
        self.epoch = -1
        return self.ssthresh

    on_ce = on_congestion
    on_loss = on_congestion

    def on_timeout(self, now_us: int = 0) -> float:
        self.w_max = self.cwnd
        self.ssthresh = max(self.cwnd * CUBIC_BETA, CWND_FLOOR)
        self.cwnd = CWND_FLOOR
        self.epoch = -1
        return self.ssthresh


class SelfLimitMeter:
    """Time-weighted fraction of a round spent with nothing to send."""

    __slots__ = ("limited", "since", "round_start", "limited_time")

    def __init__(self, now: int = 0):
        self.limited = False
        self.since = now
        self.round_start = now
        self.limited_time = 0

    def set_limited(self, limited: bool, now: int) -> None:
        if limited == self.limited:
            return
        if self.limited:
            self.limited_time += now - self.since
        self.limited = limited
        self.since = now

    def end_round(self, now: int) -> float:
        span = now - self.round_start
        lim = self.limited_time
        if self.limited:
            lim += now - self.since
            self.since = now
        self.round_start = now
        self.limited_time = 0
        if span <= 0:
            return 1.0 if self.limited else 0.0
        return min(lim / span, 1.0)
