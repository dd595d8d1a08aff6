"""Passive detection of a Classic ECN AQM at the bottleneck.

The score accumulates, once per round trip, how far queue variability and
queue depth sit above reference values that an L4S AQM would not exceed,
minus a penalty for rounds in which the sender was self-limited. It is kept
in fixed point, with 1.0 represented by 1 << SCORE_BITS, and is sticky at
both ends: -L_STICKY (quiescent, pure scalable) and CLASSIC_ECN + C_STICKY.
"""

import math
from dataclasses import dataclass

from .intlog import CarryState, carry_ilog2

SCORE_BITS = 20
ONE = 1 << SCORE_BITS


@dataclass(frozen=True)
class ScoreParams:
    v_lg: int = 1              # variability weight 2^-v_lg
    d_lg: int = 1              # depth weight 2^-d_lg
    s_weight: float = 0.25
    v0_us: int = 750
    d0_us: int = 2000
    c_frac_idle: int = 2
    classic_ecn: float = 1.0
    l_sticky: float = 8.0
    c_sticky: float = 8.0
    combined_log: bool = False

    @property
    def v_weight(self) -> float:
        return 2.0 ** -self.v_lg

    @property
    def d_weight(self) -> float:
        return 2.0 ** -self.d_lg


def lg_fixed(x_us: int) -> int:
    """log2(x) scaled by 2^SCORE_BITS, rounded to nearest."""
    return round(math.log2(x_us) * ONE)


class ClassicEcnScore:
    """Fixed-point classic_ecn score with its log carries.

    The carries for the variability, depth and combined logs are upscaled
    by the EWMA gain shifts they serve; call :meth:`set_shifts` whenever the
    RTT estimator changes its shifts.
    """

    __slots__ = (
        "p", "score", "floor", "ceil", "classic", "v0_lg", "d0_lg", "s_fp",
        "srtt_shift", "mdev_shift", "mdev_carry", "depth_carry", "ewmas_carry",
        "rounds_computed", "rounds_suppressed", "frozen", "losses_since_ce",
    )

    def __init__(self, params: ScoreParams | None = None, srtt_shift: int = 17,
                 mdev_shift: int = 18):
        p = params or ScoreParams()
        self.p = p
        self.classic = int(p.classic_ecn * ONE)
        self.floor = -int(p.l_sticky * ONE)
        self.ceil = self.classic + int(p.c_sticky * ONE)
        self.v0_lg = lg_fixed(p.v0_us) >> p.v_lg
        self.d0_lg = lg_fixed(p.d0_us) >> p.d_lg
        self.s_fp = int(p.s_weight * ONE)
        self.srtt_shift = srtt_shift
        self.mdev_shift = mdev_shift
        self.mdev_carry = CarryState(mdev_shift)
        self.depth_carry = CarryState(srtt_shift)
        self.ewmas_carry = CarryState(mdev_shift)
        self.rounds_computed = 0
        self.rounds_suppressed = 0
        self.frozen = False
        self.losses_since_ce = 0
        self.on_connection_init()

    def on_connection_init(self) -> int:
        self.score = self.floor
        return self.score

    def set_shifts(self, srtt_shift: int, mdev_shift: int) -> None:
        ds = srtt_shift - self.srtt_shift
        dm = mdev_shift - self.mdev_shift
        self.srtt_shift = srtt_shift
        self.mdev_shift = mdev_shift
        self.depth_carry.rescale(ds)
        self.mdev_carry.rescale(dm)
        self.ewmas_carry.rescale(dm)

    @property
    def quiescent(self) -> bool:
        return self.score <= self.floor

    def on_ce_feedback(self) -> int:
        if self.score <= self.floor:
            self.score = self.floor + ONE
        self.frozen = False
        self.losses_since_ce = 0
        return self.score

    def on_loss(self) -> None:
        # several losses with no CE in between: not an ECN bottleneck, stop scoring
        self.losses_since_ce += 1
        if self.losses_since_ce >= 2:
            self.frozen = True

    def round_delta(self, v: int, d: int, s: float) -> int:
        """Fixed-point delta for one round, advancing the carries."""
        if v < 1:
            v = 1
        if d < 1:
            d = 1
        p = self.p
        if p.combined_log and d > p.d0_us:
            lg = carry_ilog2(v * d, self.mdev_shift, self.ewmas_carry)
            delta = (lg << (SCORE_BITS - p.v_lg)) - self.v0_lg - self.d0_lg
        else:
            lg = carry_ilog2(v, self.mdev_shift, self.mdev_carry)
            delta = (lg << (SCORE_BITS - p.v_lg)) - self.v0_lg
            if not p.combined_log:
                dlg = carry_ilog2(d, self.srtt_shift, self.depth_carry) << (SCORE_BITS - p.d_lg)
                if dlg > self.d0_lg:
                    delta += dlg - self.d0_lg
        if s > 0:
            delta -= int(s * self.s_fp)
        return delta

    def on_round(self, v: int, d: int, s: float = 0.0) -> bool:
        """Per-round update; returns False when suppressed at the floor."""
        if self.score <= self.floor or self.frozen:
            self.rounds_suppressed += 1
            return False
        self.rounds_computed += 1
        x = self.score + self.round_delta(v, d, s)
        if x < self.floor:
            x = self.floor
        elif x > self.ceil:
            x = self.ceil
        self.score = x
        return True

    def on_idle_timeout(self) -> bool:
        """Halve a positive score; returns True if the idle timer re-arms."""
        if self.score > 0:
            self.score //= self.p.c_frac_idle
            return True
        return False

    def lower(self, amount: int) -> int:
        """Pull the score down (active-probe evidence), never below the floor."""
        x = self.score - amount
        self.score = x if x > self.floor else self.floor
        return self.score

    def c(self) -> float:
        x = self.score / self.classic
        return 0.0 if x <= 0 else (1.0 if x >= 1 else x)

    @property
    def value(self) -> float:
        return self.score / ONE

