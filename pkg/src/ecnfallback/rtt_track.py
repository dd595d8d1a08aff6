"""Per-flow RTT statistics feeding fallback detection.

Smoothed RTT and mean deviation are kept as upscaled integers whose gains
adapt to ssthresh (gain ~ 1 / (2 * ssthresh^1.5)), a windowed min-RTT
tracker gives the base delay, and an optional reroute filter runs an
alternative pair of EWMAs after a step change in base RTT.
"""

from collections import deque

from .intlog import ilog2, shift_by

ACC_MRTT_MAX = (1 << 24) - 1    # us, about 16.7 s
SSTHRESH_CLAMP = 0x0FFF
FBK_G_DIFF = 1
OUTLIER_K2 = 2
DEFAULT_MIN_WINDOW_US = 10_000_000


def gain_shift_for(ssthresh: float) -> int:
    """Integer log2 of 2 * ssthresh^1.5, with ssthresh clamped."""
    s = ilog2(max(2, min(int(ssthresh), SSTHRESH_CLAMP)))
    return s + (s >> 1) + 1


def hysteresis_k1(g1: float, g2: float, k2: float = OUTLIER_K2) -> float:
    return 1 + g2 * (k2 * (1 - g1) + (k2 - 1) * (1 - g2) - 1)


class MinRttTracker:
    """Exact windowed minimum using a monotonic deque."""

    __slots__ = ("window", "samples")

    def __init__(self, window_us: int = DEFAULT_MIN_WINDOW_US):
        self.window = window_us
        self.samples = deque()

    def update(self, now: int, rtt: int) -> int:
        q = self.samples
        while q and q[-1][1] >= rtt:
            q.pop()
        q.append((now, rtt))
        horizon = now - self.window
        while q[0][0] < horizon:
            q.popleft()
        return q[0][1]

    @property
    def value(self) -> int:
        return self.samples[0][1] if self.samples else 0


class RerouteFilter:
    """Alternative srtt/mdev pair that takes over after a base-RTT step.

    Values are upscaled integers on the same shifts as the primary EWMAs.
    ``enabled`` plays the role of a non-zero alternative srtt.
    """

    __slots__ = ("enabled", "srtt_alt", "mdev_alt", "sign", "activations")

    def __init__(self):
        self.enabled = False
        self.srtt_alt = 0
        self.mdev_alt = 0
        self.sign = 0
        self.activations = 0

    def on_ack(self, acc: int, srtt0: int, mdev0: int, gs: int, gm: int) -> None:
        # must run before the primary EWMAs take this sample
        err = acc - (srtt0 >> gs)
        threshold = OUTLIER_K2 * mdev0
        if abs(err) << gm <= threshold or (self.enabled and (self.sign * err) << gm <= threshold):
            if self.enabled:
                self.mdev_alt += abs(acc - (self.srtt_alt >> gs)) - (self.mdev_alt >> gm)
                if self.mdev_alt > mdev0:
                    self.enabled = False
                else:
                    self.srtt_alt += acc - (self.srtt_alt >> gs)
        elif self.enabled:
            self.mdev_alt += abs(acc - (self.srtt_alt >> gs)) - (self.mdev_alt >> gm)
            self.srtt_alt += acc - (self.srtt_alt >> gs)
        else:
            # K1 inflation: mdev*(1 + G2*(2*(1-G1) + (1-G2) - 1)) in integer form
            two = mdev0 << 1
            self.mdev_alt = mdev0 + ((two - (two >> gs) - (mdev0 >> gm)) >> gm)
            self.srtt_alt = acc << gs
            self.sign = 1 if err > 0 else -1
            self.enabled = True
            self.activations += 1

    def rescale(self, delta_srtt: int, delta_mdev: int) -> None:
        self.srtt_alt = shift_by(self.srtt_alt, delta_srtt)
        self.mdev_alt = shift_by(self.mdev_alt, delta_mdev)


class RttEstimator:
    """Adaptive-gain smoothed RTT and mean deviation for one flow.

    ``srtt`` and ``mdev`` are stored upscaled by ``srtt_shift`` and
    ``mdev_shift`` bits. Times are integer microseconds.
    """

    __slots__ = (
        "srtt", "mdev", "srtt_shift", "mdev_shift", "g_diff",
        "min_tracker", "rtt_min", "filter", "samples",
    )

    def __init__(self, first_mrtt: int, now: int = 0, ssthresh: float = float("inf"),
                 g_diff: int = FBK_G_DIFF, reroute_filter: bool = True,
                 min_window_us: int = DEFAULT_MIN_WINDOW_US):
        first_mrtt = min(max(int(first_mrtt), 0), ACC_MRTT_MAX)
        self.g_diff = g_diff
        self.srtt_shift = gain_shift_for(_finite(ssthresh))
        self.mdev_shift = self.srtt_shift + g_diff
        self.srtt = first_mrtt << self.srtt_shift
        self.mdev = 1 << self.mdev_shift
        self.min_tracker = MinRttTracker(min_window_us)
        self.rtt_min = self.min_tracker.update(now, first_mrtt)
        self.filter = RerouteFilter() if reroute_filter else None
        self.samples = 1

    def on_ack(self, acc_mrtt: int, now: int) -> None:
        acc = acc_mrtt if acc_mrtt < ACC_MRTT_MAX else ACC_MRTT_MAX
        if acc < 0:
            acc = 0
        gs = self.srtt_shift
        gm = self.mdev_shift
        if self.filter is not None:
            self.filter.on_ack(acc, self.srtt, self.mdev, gs, gm)
        err = acc - (self.srtt >> gs)
        self.srtt += err
        self.mdev += (err if err >= 0 else -err) - (self.mdev >> gm)
        self.rtt_min = self.min_tracker.update(now, acc)
        self.samples += 1

    def on_ssthresh_change(self, ssthresh: float) -> int:
        """Recompute gain shifts and rescale; returns the shift delta."""
        gs = gain_shift_for(_finite(ssthresh))
        delta = gs - self.srtt_shift
        if delta:
            self.srtt_shift = gs
            self.mdev_shift = gs + self.g_diff
            self.srtt = shift_by(self.srtt, delta)
            self.mdev = shift_by(self.mdev, delta)
            if self.filter is not None:
                self.filter.rescale(delta, delta)
        return delta

    def _alt_selected(self) -> bool:
        f = self.filter
        return f is not None and f.enabled and f.mdev_alt < self.mdev

    # non-upscaled outputs, after the reroute selector

    @property
    def srtt_us(self) -> int:
        if self._alt_selected():
            return self.filter.srtt_alt >> self.srtt_shift
        return self.srtt >> self.srtt_shift

    @property
    def mdev_us(self) -> int:
        if self._alt_selected():
            return self.filter.mdev_alt >> self.mdev_shift
        return self.mdev >> self.mdev_shift

    @property
    def depth_us(self) -> int:
        d = self.srtt_us - self.rtt_min
        return d if d > 0 else 0

    # primary EWMAs without the selector, for traces

    @property
    def primary_srtt_us(self) -> int:
        return self.srtt >> self.srtt_shift

    @property
    def primary_mdev_us(self) -> int:
        return self.mdev >> self.mdev_shift

    @property
    def alt_enabled(self) -> bool:
        return self.filter is not None and self.filter.enabled

    @property
    def alt_srtt_us(self) -> int:
        return self.filter.srtt_alt >> self.srtt_shift if self.alt_enabled else 0

    @property
    def alt_mdev_us(self) -> int:
        return self.filter.mdev_alt >> self.mdev_shift if self.alt_enabled else 0


def _finite(ssthresh: float) -> float:
    return SSTHRESH_CLAMP if ssthresh == float("inf") else ssthresh
