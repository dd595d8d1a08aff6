"""MetricsBundle: the results of one run as numpy arrays plus a summary."""

from dataclasses import asdict, dataclass, field

import numpy as np

from .. import kernels
from ..fallback_detect import ONE

ROLLING_US = 1_000_000


@dataclass
class MetricsBundle:
    config: object
    duration_us: int
    pkt_t: np.ndarray
    pkt_fid: np.ndarray
    pkt_size: np.ndarray
    pkt_sojourn: np.ndarray
    pkt_ecn: np.ndarray
    pkt_marked: np.ndarray
    score_rows: list
    ack_rows: list
    cwnd_rows: list
    prob_rows: list
    probe_rows: list
    event_rows: list
    flows: dict
    events: int
    utilization: float
    conservation_violations: int
    summary: dict = field(default_factory=dict)

    @classmethod
    def from_simulation(cls, sim) -> "MetricsBundle":
        rec = sim.rec
        b = cls(
            config=sim.cfg,
            duration_us=sim.end_us,
            pkt_t=np.asarray(rec.pkt_t, dtype=np.int64),
            pkt_fid=np.asarray(rec.pkt_fid, dtype=np.int64),
            pkt_size=np.asarray(rec.pkt_size, dtype=np.int64),
            pkt_sojourn=np.asarray(rec.pkt_sojourn, dtype=np.int64),
            pkt_ecn=np.asarray(rec.pkt_ecn, dtype=np.int64),
            pkt_marked=np.asarray(rec.pkt_marked, dtype=bool),
            score_rows=rec.score_rows,
            ack_rows=rec.ack_rows,
            cwnd_rows=rec.cwnd_rows,
            prob_rows=rec.prob_rows,
            probe_rows=rec.probe_rows,
            event_rows=rec.event_rows,
            flows=rec.flows,
            events=sim.loop.events,
            utilization=sim.link.busy_fraction(sim.end_us),
            conservation_violations=len(sim.acct.violations),
        )
        b.summary = {
            "events": b.events,
            "packets": int(b.pkt_t.shape[0]),
            "utilization": b.utilization,
            "aqm_end": sim.link.aqm.kind,
            "aqm_end_classic": sim.link.aqm.classic,
            "conservation_violations": b.conservation_violations,
        }
        return b

    # flow selections

    def flow_ids(self, kind: str | None = None, long: bool | None = None) -> list[int]:
        return [f.fid for f in self.flows.values()
                if (kind is None or f.kind == kind) and (long is None or f.long == long)]

    # throughput

    def rolling_throughput(self, fid: int, window_us: int = ROLLING_US):
        """(time_us, bits/s) sampled at each of the flow's departures."""
        m = self.pkt_fid == fid
        t = np.ascontiguousarray(self.pkt_t[m])
        sz = np.ascontiguousarray(self.pkt_size[m])
        if t.shape[0] == 0:
            return t, np.zeros(0)
        return t, kernels.rolling_rate(t, sz, window_us) * 8

    def per_bin_rates(self, bin_us: int = 1_000_000):
        """bits/s per flow per bin, shape (n_flows, n_bins)."""
        n_flows = max(self.flows) + 1 if self.flows else 0
        n_bins = -(-self.duration_us // bin_us)
        counts = kernels.binned_bytes(self.pkt_t, self.pkt_fid, self.pkt_size, n_flows, bin_us, n_bins)
        return counts * (8e6 / bin_us)

    def mean_rate(self, fid: int, t0_us: int, t1_us: int) -> float:
        m = (self.pkt_fid == fid) & (self.pkt_t >= t0_us) & (self.pkt_t < t1_us)
        span = (t1_us - t0_us) / 1e6
        return float(self.pkt_size[m].sum()) * 8 / span if span > 0 else 0.0

    # detection

    def score_trace(self, fid: int):
        """(time_us, score in units) per round for a traced flow."""
        rows = [r for r in self.score_rows if r[1] == fid]
        if not rows:
            return np.zeros(0, dtype=np.int64), np.zeros(0)
        t = np.array([r[0] for r in rows], dtype=np.int64)
        s = np.array([r[2] for r in rows], dtype=np.float64) / ONE
        return t, s

    def final_scores(self, kind: str = "prague", long: bool | None = None) -> dict[int, float]:
        return {f.fid: f.final_score for f in self.flows.values()
                if f.kind == kind and (long is None or f.long == long) and f.final_score is not None}

    def queue_delay(self, ecn: int | None = None):
        m = slice(None) if ecn is None else self.pkt_ecn == ecn
        return self.pkt_t[m], self.pkt_sojourn[m]

    def flow_table(self) -> list[dict]:
        return [asdict(f) for f in self.flows.values()]
