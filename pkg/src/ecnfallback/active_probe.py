"""Active L4S probing with ECT tracer triplets.

A triplet is a large ECT(1) front segment followed back to back by a small
ECT(0) middle and a small ECT(1) rear. The middle overlaps the last two
bytes of the front and the rear overlaps the last byte of the middle, so
the receiver answers the duplicate bytes with an immediate ACK carrying a
D-SACK block. If a dual-queue AQM classified the middle into the classic
queue behind a standing queue, the rear overtakes it and the middle shows
up as a pure duplicate: evidence of an L4S bottleneck.
"""

from dataclasses import dataclass

from .fallback_detect import ONE

TRACER_NUM = 4
REAR_SIZE = 98
HEADER_BYTES = 40

ECT1 = 1
ECT0 = 2


@dataclass(frozen=True, slots=True)
class TracerSegment:
    start: int
    length: int
    ecn: int
    role: str

    @property
    def end(self) -> int:
        return self.start + self.length


def front_size(smss: int, header: int = HEADER_BYTES) -> int:
    return smss - 2 * (header + REAR_SIZE)


def triplet_layout(snd_nxt: int, smss: int, header: int = HEADER_BYTES) -> list[TracerSegment]:
    f = front_size(smss, header)
    e = snd_nxt + f
    return [
        TracerSegment(snd_nxt, f, ECT1, "front"),
        TracerSegment(e - 2, REAR_SIZE, ECT0, "middle"),
        TracerSegment(e - 1, REAR_SIZE, ECT1, "rear"),
    ]


class TracerState:
    """Arming, suppression and verdict bookkeeping for one flow.

    ``ect_tracers`` > 0 is the number of triplets still armed, < 0 means the
    next one is held back for a round, and -TRACER_NUM-1 means suppressed.
    ``tracer_nxt`` is the sequence number just past the last triplet while a
    verdict on it is still possible, else 0.
    """

    __slots__ = ("ect_tracers", "tracer_nxt", "l_sticky", "header", "sent",
                 "verdicts", "settled", "wait_rounds", "max_wait_rounds")

    def __init__(self, l_sticky: float = 8.0, header: int = HEADER_BYTES, max_wait_rounds: int = 4):
        self.ect_tracers = 0
        self.tracer_nxt = 0
        self.l_sticky = int(l_sticky * ONE)
        self.header = header
        self.sent = 0
        self.verdicts = 0
        self.settled = 0
        self.wait_rounds = 0
        self.max_wait_rounds = max_wait_rounds

    @property
    def arm_threshold(self) -> int:
        return -self.l_sticky // TRACER_NUM

    @property
    def suppressed(self) -> bool:
        return self.ect_tracers == -TRACER_NUM - 1

    @property
    def pending(self) -> bool:
        return self.tracer_nxt != 0

    def per_rtt_arm(self, score: int) -> None:
        if self.tracer_nxt:
            # a verdict is still outstanding; give up on it after a few rounds
            self.wait_rounds += 1
            if self.wait_rounds < self.max_wait_rounds:
                return
            self._settle()
        if score >= self.arm_threshold and self.ect_tracers == 0:
            self.ect_tracers = TRACER_NUM
        elif self.ect_tracers < 0 and not self.suppressed:
            self.ect_tracers = -self.ect_tracers

    def on_floor(self) -> None:
        # score back at the floor: lift suppression so probing can restart later
        self.ect_tracers = 0

    def can_send(self, queued_bytes: int, smss: int) -> bool:
        return (self.ect_tracers > 0 and not self.tracer_nxt and queued_bytes >= smss
                and front_size(smss, self.header) > 0)

    def take_triplet(self, snd_nxt: int, smss: int, score: int) -> list[TracerSegment]:
        """Lay out a triplet at snd_nxt and update the arming state."""
        segs = triplet_layout(snd_nxt, smss, self.header)
        self.tracer_nxt = segs[-1].end
        self.wait_rounds = 0
        self.sent += 1
        self.ect_tracers -= 1
        if self.ect_tracers:
            self.ect_tracers = -self.ect_tracers
        elif score >= self.arm_threshold:
            self.ect_tracers = -TRACER_NUM - 1
        return segs

    def on_ack(self, ackno: int, dsack: tuple[int, int] | None, score: int) -> bool:
        """Inspect an ACK; returns True on L4S evidence for the pending triplet.

        The middle is identified by its D-SACK block. If the whole middle
        came back as a duplicate, the rear got there first.
        """
        t = self.tracer_nxt
        if not t or dsack is None or ackno < t - REAR_SIZE + 1:
            return False
        mid_start = t - REAR_SIZE - 1
        if dsack[0] != mid_start:
            return False
        if dsack[1] == t - 1 and ackno >= t:
            self.verdicts += 1
            self._settle()
            return True
        # middle arrived in order, only its first two bytes duplicated
        self._settle()
        return False

    def _settle(self) -> None:
        self.tracer_nxt = 0
        self.wait_rounds = 0
        self.settled += 1

    def evidence_step(self) -> int:
        return self.l_sticky // TRACER_NUM
