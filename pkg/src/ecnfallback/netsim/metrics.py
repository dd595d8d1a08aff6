"""Raw per-run logs collected while the simulation runs.

Everything is appended to plain lists in the hot path and turned into
numpy arrays once the run is over.
"""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class FlowRecord:
    fid: int
    kind: str
    long: bool
    start_us: int
    size_bytes: int | None
    end_us: int | None = None
    acked_bytes: int = 0
    final_score: float | None = None
    triplets: int = 0
    verdicts: int = 0
    dup_bytes: int = 0
    retransmits: int = 0
    timeouts: int = 0


class Recorder:
    """Append-only logs for one run."""

    def __init__(self, trace_acks: bool = True):
        self.trace_acks = trace_acks
        # per dequeued packet
        self.pkt_t = []
        self.pkt_fid = []
        self.pkt_size = []
        self.pkt_sojourn = []
        self.pkt_ecn = []
        self.pkt_marked = []
        # per round of each scalable flow
        self.score_rows = []
        # per ACK of long scalable flows
        self.ack_rows = []
        # per window change (reductions, timeouts)
        self.cwnd_rows = []
        self.prob_rows = []
        self.probe_rows = []
        self.event_rows = []
        self.flows: dict[int, FlowRecord] = {}

    def departures(self):
        return (np.asarray(self.pkt_t, dtype=np.int64),
                np.asarray(self.pkt_fid, dtype=np.int64),
                np.asarray(self.pkt_size, dtype=np.int64))


@dataclass
class Accounting:
    """Byte conservation counters across the whole network."""

    sent: int = 0
    delivered: int = 0
    dropped: int = 0
    propagating: int = 0
    violations: list = field(default_factory=list)

    def check(self, queued: int, transmitting: int, now: int) -> bool:
        ok = self.sent == self.delivered + self.dropped + queued + transmitting + self.propagating
        if not ok:
            self.violations.append(now)
        return ok
