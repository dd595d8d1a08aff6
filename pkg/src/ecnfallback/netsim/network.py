"""Dumbbell network: senders, one bottleneck link with an AQM, receivers.

Senders attach directly to the bottleneck queue. After serialization a
packet propagates to its receiver in the flow's forward delay; ACKs come
back over an uncongested reverse path in the flow's reverse delay.
"""

from collections import deque

from ..active_probe import TracerState
from ..cc import CubicCC, PragueCC, RenoCC, SelfLimitMeter
from ..fallback_detect import ClassicEcnScore, ScoreParams
from ..packet import CE, ECT0, ECT1, FRONT, HEADER_BYTES, MIDDLE, MSS, NO_TRACER, REAR, Ack, Packet
from ..rtt_track import RttEstimator
from .metrics import Accounting, FlowRecord, Recorder

DELACK_US = 40_000
MIN_RTO_US = 200_000
MAX_RTO_US = 60_000_000
DUPTHRESH = 3


class Bottleneck:
    """Serializing link fed by an AQM."""

    def __init__(self, loop, rate_bps: float, aqm, rec: Recorder, acct: Accounting,
                 check_conservation: bool = True):
        self.loop = loop
        self.rate_bps = rate_bps
        self.us_per_byte = 8e6 / rate_bps
        self.rec = rec
        self.acct = acct
        self.busy = False
        self.tx_bytes = 0
        self.check = check_conservation
        self.busy_time = 0
        self._busy_since = 0
        self.set_aqm(aqm)

    def set_aqm(self, aqm) -> None:
        aqm.on_drop = self._on_drop
        self.aqm = aqm

    def _on_drop(self, pkt) -> None:
        self.acct.dropped += pkt.size

    def switch_aqm(self, new_aqm) -> None:
        old = self.aqm
        for pkt in old.drain():
            t = pkt.enq
            new_aqm.on_drop = self._on_drop
            if not new_aqm.enqueue(pkt, t):
                continue
        self.set_aqm(new_aqm)
        if not self.busy:
            self._start()

    def send(self, pkt) -> None:
        self.acct.sent += pkt.size
        if self.aqm.enqueue(pkt, self.loop.now) and not self.busy:
            self._start()

    def _start(self) -> None:
        loop = self.loop
        now = loop.now
        pkt = self.aqm.dequeue(now)
        if pkt is None:
            if self.busy:
                self.busy_time += now - self._busy_since
            self.busy = False
            self.tx_bytes = 0
            return
        if not self.busy:
            self._busy_since = now
        self.busy = True
        self.tx_bytes = pkt.size
        rec = self.rec
        rec.pkt_t.append(now)
        rec.pkt_fid.append(pkt.flow.fid)
        rec.pkt_size.append(pkt.size)
        rec.pkt_sojourn.append(now - pkt.enq)
        rec.pkt_ecn.append(pkt.ecn_in)
        rec.pkt_marked.append(pkt.ecn == CE and pkt.ecn_in != CE)
        loop.at(now + int(pkt.size * self.us_per_byte + 0.5), self._tx_done, pkt)

    def _tx_done(self, pkt) -> None:
        acct = self.acct
        acct.propagating += pkt.size
        self.tx_bytes = 0
        flow = pkt.flow
        self.loop.at(self.loop.now + flow.fwd_delay, flow.receiver.on_data, pkt)
        self._start()
        if self.check:
            acct.check(self.aqm.backlog, self.tx_bytes, self.loop.now)

    def busy_fraction(self, now: int) -> float:
        busy = self.busy_time + (now - self._busy_since if self.busy else 0)
        return busy / now if now > 0 else 0.0


class Receiver:
    """Delayed-ACK receiver with SACK, D-SACK and CE byte counting."""

    __slots__ = ("flow", "loop", "acct", "rcv_nxt", "ooo", "unacked", "ce_bytes",
                 "last_sent_ts", "last_arrival", "timer_at", "timer_pending")

    def __init__(self, flow, loop, acct: Accounting):
        self.flow = flow
        self.loop = loop
        self.acct = acct
        self.rcv_nxt = 0
        self.ooo = []
        self.unacked = 0
        self.ce_bytes = 0
        self.last_sent_ts = 0
        self.last_arrival = 0
        self.timer_at = 0
        self.timer_pending = False

    def on_data(self, pkt) -> None:
        acct = self.acct
        acct.propagating -= pkt.size
        acct.delivered += pkt.size
        now = self.loop.now
        if pkt.ecn == CE:
            self.ce_bytes += pkt.length
        s = pkt.seq
        e = s + pkt.length
        rn = self.rcv_nxt
        ooo = self.ooo
        dsack = None
        immediate = False
        if e <= rn:
            dsack = (s, e)
            immediate = True
        elif s <= rn:
            if s < rn:
                dsack = (s, rn)
                immediate = True
            rn = e
            if ooo:
                immediate = True
                while ooo and ooo[0][0] <= rn:
                    blk = ooo.pop(0)
                    if blk[1] > rn:
                        if blk[0] < e and dsack is None:
                            dsack = (blk[0], min(blk[1], e))
                        rn = blk[1]
                    elif dsack is None:
                        dsack = (blk[0], blk[1])
            self.rcv_nxt = rn
        else:
            immediate = True
            dsack = _insert_block(ooo, s, e)
        self.last_sent_ts = pkt.sent
        self.last_arrival = now
        self.unacked += 1
        if immediate or self.unacked >= 2:
            self._send_ack(now, dsack, 0)
        else:
            self.timer_at = now + DELACK_US
            if not self.timer_pending:
                self.timer_pending = True
                self.loop.at(self.timer_at, self._delack)

    def _delack(self) -> None:
        now = self.loop.now
        if self.unacked == 0:
            self.timer_pending = False
            return
        if now < self.timer_at:
            self.loop.at(self.timer_at, self._delack)
            return
        self.timer_pending = False
        self._send_ack(now, None, now - self.last_arrival)

    def _send_ack(self, now: int, dsack, hold: int) -> None:
        self.unacked = 0
        sack = [tuple(b) for b in self.ooo[:3]] if self.ooo else None
        ack = Ack(self.rcv_nxt, sack, dsack, self.ce_bytes, self.last_sent_ts, hold)
        self.ce_bytes = 0
        flow = self.flow
        self.loop.at(now + flow.rev_delay, flow.on_ack, ack)


def _insert_block(ooo: list, s: int, e: int):
    """Add [s, e) to the sorted disjoint block list; return any duplicate range."""
    dup = None
    i = 0
    n = len(ooo)
    while i < n and ooo[i][1] < s:
        i += 1
    ns, ne = s, e
    j = i
    while j < n and ooo[j][0] <= e:
        bs, be = ooo[j]
        if dup is None and bs < e and be > s:
            dup = (max(bs, s), min(be, e))
        ns = min(ns, bs)
        ne = max(ne, be)
        j += 1
    ooo[i:j] = [[ns, ne]]
    return dup


class FlowConfig:
    """Knobs for one sender; plain attributes so they are cheap to read."""

    def __init__(self, kind: str = "prague", fallback: bool = True, alt: int = 2,
                 probe: bool = False, reroute_filter: bool = True, g_diff: int = 1,
                 pacing_ss: float = 2.0, pacing_ca: float = 1.0,
                 score_params: ScoreParams | None = None, trace: bool = True,
                 init_cwnd: float = 10.0, min_window_us: int = 10_000_000,
                 passive: bool = True):
        self.kind = kind
        self.fallback = fallback
        self.alt = alt
        self.probe = probe
        self.reroute_filter = reroute_filter
        self.g_diff = g_diff
        self.pacing_ss = pacing_ss
        self.pacing_ca = pacing_ca
        self.score_params = score_params or ScoreParams()
        self.trace = trace
        self.init_cwnd = init_cwnd
        self.min_window_us = min_window_us
        # False runs the tracer alone: no per-round scoring and no CE wake-up
        self.passive = passive


class Flow:
    """A TCP-like sender with SACK loss recovery, RTO and optional pacing."""

    def __init__(self, fid: int, cfg: FlowConfig, loop, link: Bottleneck, rec: Recorder,
                 acct: Accounting, fwd_delay: int, rev_delay: int, size_bytes: int | None,
                 long: bool, on_done=None, mss: int = MSS, header: int = HEADER_BYTES):
        self.fid = fid
        self.cfg = cfg
        self.kind = cfg.kind
        self.loop = loop
        self.link = link
        self.rec = rec
        self.fwd_delay = fwd_delay
        self.rev_delay = rev_delay
        self.mss = mss
        self.header = header
        self.on_done = on_done
        self.receiver = Receiver(self, loop, acct)
        self.scalable = cfg.kind == "prague"
        if self.scalable:
            self.cc = PragueCC(cfg.init_cwnd, alt=cfg.alt, fallback=cfg.fallback)
            self.ecn = ECT1
            self.score = ClassicEcnScore(cfg.score_params)
            self.tracer = TracerState(cfg.score_params.l_sticky, header) if cfg.probe else None
            self.meter = SelfLimitMeter(loop.now)
            self.pacing = True
        else:
            self.cc = CubicCC(cfg.init_cwnd) if cfg.kind == "cubic" else RenoCC(cfg.init_cwnd)
            self.ecn = ECT0
            self.score = None
            self.tracer = None
            self.meter = None
            self.pacing = False
        self.est = None
        self.app_end = size_bytes if size_bytes is not None else 1 << 62
        self.long = long
        self.snd_una = 0
        self.snd_nxt = 0
        self.segs = deque()
        self.sacked_bytes = 0
        self.lost_bytes = 0
        self.retx_q = deque()
        self.high_sacked = 0
        self.in_recovery = False
        self.recovery_point = 0
        self.cwr_point = 0
        self.round_end = 0
        self.app_limited = False
        self.rto_srtt = 0.0
        self.rto_var = 0.0
        self.rto = 1_000_000
        self.rto_deadline = 0
        self.rto_pending = False
        self.backoff = 1
        self.pace_next = 0.0
        self.pace_pending = False
        self.last_send = 0
        self.idle_pending = False
        self.done = False
        self.record = FlowRecord(fid, cfg.kind, long, loop.now, size_bytes)
        rec.flows[fid] = self.record
        self.trace = cfg.trace and long and self.scalable

    # sending

    def start(self) -> None:
        self.record.start_us = self.loop.now
        self.try_send()

    def pipe(self) -> int:
        return self.snd_nxt - self.snd_una - self.sacked_bytes - self.lost_bytes

    def try_send(self) -> None:
        if self.done:
            return
        loop = self.loop
        now = loop.now
        mss = self.mss
        while True:
            wnd = self.cc.cwnd * mss
            if self.retx_q:
                if self.pipe() + mss > wnd and self.pipe() > 0:
                    break
                seg = self.retx_q.popleft()
                if not seg[4] or seg[0] < self.snd_una:
                    continue
                seg[4] = False
                self.lost_bytes -= seg[1] - seg[0]
                seg[2] = now
                self.record.retransmits += 1
                self._emit(seg[0], seg[1] - seg[0], NO_TRACER, now, True)
                continue
            remaining = self.app_end - self.snd_nxt
            if remaining <= 0:
                self._set_limited(True, now)
                break
            self._set_limited(False, now)
            if self.pipe() + mss > wnd:
                break
            if self.pacing and self.rto_srtt > 0 and now < self.pace_next:
                if not self.pace_pending:
                    self.pace_pending = True
                    loop.at(int(self.pace_next) + 1, self._pace_wake)
                break
            tr = self.tracer
            if tr is not None and tr.ect_tracers > 0 and tr.can_send(remaining, mss):
                sent = self._send_triplet(now)
            else:
                length = mss if remaining > mss else remaining
                seq = self.snd_nxt
                self.segs.append([seq, seq + length, now, False, False])
                self.snd_nxt = seq + length
                self._emit(seq, length, NO_TRACER, now, False)
                sent = length + self.header
            if self.pacing and self.rto_srtt > 0:
                ratio = self.cfg.pacing_ss if self.cc.cwnd < self.cc.ssthresh else self.cfg.pacing_ca
                interval = sent * self.rto_srtt / (ratio * self.cc.cwnd * mss)
                base = self.pace_next if self.pace_next > now else now
                self.pace_next = base + interval
        if not self.rto_pending and self.snd_nxt > self.snd_una:
            self._arm_rto(now)

    def _emit(self, seq: int, length: int, role: int, now: int, retx: bool) -> None:
        pkt = Packet(self, seq, length, self.ecn if role != MIDDLE else ECT0, now, role, self.header)
        pkt.retx = retx
        self.last_send = now
        self.link.send(pkt)

    def _send_triplet(self, now: int) -> int:
        tr = self.tracer
        segs = tr.take_triplet(self.snd_nxt, self.mss, self.score.score)
        front, middle, rear = segs
        self.segs.append([front.start, front.end, now, False, False])
        self.segs.append([front.end, rear.end, now, False, False])
        self.snd_nxt = rear.end
        self._emit(front.start, front.length, FRONT, now, False)
        self._emit(middle.start, middle.length, MIDDLE, now, False)
        self._emit(rear.start, rear.length, REAR, now, False)
        r = self.record
        r.triplets += 1
        r.dup_bytes += middle.length + rear.length - (rear.end - front.end)
        self.rec.probe_rows.append((now, self.fid, "triplet", self.score.score, tr.ect_tracers))
        return front.length + middle.length + rear.length + 3 * self.header

    def _pace_wake(self) -> None:
        self.pace_pending = False
        self.try_send()

    def _set_limited(self, limited: bool, now: int) -> None:
        if limited != self.app_limited:
            self.app_limited = limited
            if self.meter is not None:
                self.meter.set_limited(limited, now)

    # ACK processing

    def on_ack(self, ack: Ack) -> None:
        if self.done:
            return
        loop = self.loop
        now = loop.now
        acc = now - ack.echo_ts - ack.hold
        if acc < 1:
            acc = 1
        self._rto_sample(acc)
        newly = 0
        if ack.ackno > self.snd_una:
            newly = ack.ackno - self.snd_una
            self.snd_una = ack.ackno
            self._pop_acked(ack.ackno)
            self.backoff = 1
            self.record.acked_bytes = self.snd_una
        if ack.sack is not None:
            self._process_sack(ack.sack, now)
        ce = ack.ce_bytes
        if self.scalable:
            est = self.est
            if est is None:
                est = self.est = RttEstimator(acc, now, self.cc.ssthresh, self.cfg.g_diff,
                                              self.cfg.reroute_filter, self.cfg.min_window_us)
                self.score.set_shifts(est.srtt_shift, est.mdev_shift)
            else:
                est.on_ack(acc, now)
            if self.trace and self.rec.trace_acks:
                self.rec.ack_rows.append((now, self.fid, acc, est.srtt_us, int(self.rto_srtt),
                                          est.mdev_us, est.rtt_min))
            self.cc.account(newly, ce)
            tr = self.tracer
            if tr is not None and tr.tracer_nxt and ack.dsack is not None:
                if tr.on_ack(ack.ackno, ack.dsack, self.score.score):
                    self.score.lower(tr.evidence_step())
                    self.record.verdicts += 1
                    self.rec.probe_rows.append((now, self.fid, "verdict", self.score.score, tr.ect_tracers))
        if ce > 0:
            self._on_ce(now)
        if newly > 0 and not self.in_recovery and not self.app_limited:
            self.cc.on_ack(newly / self.mss, now)
        if self.in_recovery and self.snd_una >= self.recovery_point:
            self.in_recovery = False
        if self.scalable and self.snd_una >= self.round_end and newly > 0:
            self._end_round(now)
        if self.snd_una >= self.app_end:
            self._finish(now)
            return
        if self.snd_nxt > self.snd_una:
            self.rto_deadline = now + self.rto * self.backoff
            if not self.rto_pending:
                self._arm_rto(now)
        self.try_send()

    def _pop_acked(self, ackno: int) -> None:
        segs = self.segs
        while segs and segs[0][1] <= ackno:
            seg = segs.popleft()
            if seg[3]:
                self.sacked_bytes -= seg[1] - seg[0]
            elif seg[4]:
                self.lost_bytes -= seg[1] - seg[0]
                seg[4] = False
        if segs and segs[0][0] < ackno:
            seg = segs[0]
            if seg[3]:
                self.sacked_bytes -= ackno - seg[0]
            elif seg[4]:
                self.lost_bytes -= ackno - seg[0]
            seg[0] = ackno

    def _process_sack(self, blocks, now: int) -> None:
        hi = max(b[1] for b in blocks)
        if hi > self.high_sacked:
            self.high_sacked = hi
        segs = self.segs
        for seg in segs:
            if seg[0] >= hi:
                break
            if seg[3]:
                continue
            for bs, be in blocks:
                if bs <= seg[0] and seg[1] <= be:
                    seg[3] = True
                    n = seg[1] - seg[0]
                    self.sacked_bytes += n
                    if seg[4]:
                        seg[4] = False
                        self.lost_bytes -= n
                    break
        # a hole is lost once DUPTHRESH segments sent after it have been SACKed
        above = 0
        latest = -1
        thresh = DUPTHRESH * self.mss
        newly_lost = False
        for seg in reversed(segs):
            if seg[3]:
                above += seg[1] - seg[0]
                if seg[2] > latest:
                    latest = seg[2]
            elif above >= thresh and not seg[4] and seg[2] < latest:
                seg[4] = True
                self.lost_bytes += seg[1] - seg[0]
                self.retx_q.append(seg)
                newly_lost = True
        if newly_lost:
            self.retx_q = deque(sorted(self.retx_q, key=lambda s: s[0]))
            if not self.in_recovery:
                self._on_loss(now)

    def _on_loss(self, now: int) -> None:
        self.in_recovery = True
        self.recovery_point = self.snd_nxt
        if self.scalable:
            ss = self.cc.on_loss(now)
            self._rescale(ss)
            self.score.on_loss()
        else:
            self.cc.on_loss(now)
        self.cwr_point = self.snd_nxt
        self.rec.cwnd_rows.append((now, self.fid, self.cc.cwnd, self.cc.ssthresh, "loss"))

    def _on_ce(self, now: int) -> None:
        if self.scalable and self.cfg.passive:
            self.score.on_ce_feedback()
        if self.snd_una < self.cwr_point or self.in_recovery:
            return
        if self.scalable:
            ss = self.cc.on_ce(self.score.c())
            self._rescale(ss)
        else:
            self.cc.on_ce(now)
        self.cwr_point = self.snd_nxt
        self.rec.cwnd_rows.append((now, self.fid, self.cc.cwnd, self.cc.ssthresh, "ce"))

    def _rescale(self, ssthresh: float) -> None:
        est = self.est
        if est is not None and est.on_ssthresh_change(ssthresh):
            self.score.set_shifts(est.srtt_shift, est.mdev_shift)

    def _end_round(self, now: int) -> None:
        self.round_end = self.snd_nxt
        self.cc.on_round_end()
        s = self.meter.end_round(now)
        est = self.est
        score = self.score
        tr = self.tracer
        if not self.cfg.passive:
            if tr is not None:
                tr.per_rtt_arm(score.score)
        elif score.quiescent:
            score.rounds_suppressed += 1
            if tr is not None:
                tr.on_floor()
        else:
            score.on_round(est.mdev_us, est.depth_us, s)
            if tr is not None:
                tr.per_rtt_arm(score.score)
        if self.trace:
            self.rec.score_rows.append((now, self.fid, score.score, est.mdev_us, est.depth_us,
                                        s, score.c(), self.cc.cwnd, self.cc.alpha))
        if self.app_limited and self.snd_nxt == self.snd_una and not self.idle_pending:
            self.idle_pending = True
            self.loop.at(now + self.rto, self._idle_check)

    def _idle_check(self) -> None:
        self.idle_pending = False
        if self.done:
            return
        now = self.loop.now
        if self.snd_nxt == self.snd_una and now - self.last_send >= self.rto:
            if self.score.on_idle_timeout():
                self.idle_pending = True
                self.loop.at(now + self.rto, self._idle_check)
        elif self.snd_nxt == self.snd_una:
            self.idle_pending = True
            self.loop.at(self.last_send + self.rto, self._idle_check)

    # RTO

    def _rto_sample(self, acc: int) -> None:
        if self.rto_srtt == 0:
            self.rto_srtt = float(acc)
            self.rto_var = acc / 2
        else:
            err = acc - self.rto_srtt
            self.rto_srtt += err / 8
            self.rto_var += (abs(err) - self.rto_var) / 4
        rto = int(self.rto_srtt + max(4 * self.rto_var, 1000))
        self.rto = min(max(rto, MIN_RTO_US), MAX_RTO_US)
        self.cc.set_rtt(int(self.rto_srtt))

    def _arm_rto(self, now: int) -> None:
        if not self.rto_deadline or self.rto_deadline < now:
            self.rto_deadline = now + self.rto * self.backoff
        self.rto_pending = True
        self.loop.at(self.rto_deadline, self._rto_fire)

    def _rto_fire(self) -> None:
        self.rto_pending = False
        if self.done or self.snd_nxt == self.snd_una:
            return
        now = self.loop.now
        if now < self.rto_deadline:
            self._arm_rto(now)
            return
        # timeout: go back to snd_una and resend everything
        self.record.timeouts += 1
        ss = self.cc.on_timeout(now)
        if self.scalable:
            self._rescale(ss)
            self.score.on_loss()
        self.segs.clear()
        self.retx_q.clear()
        self.sacked_bytes = 0
        self.lost_bytes = 0
        self.snd_nxt = self.snd_una
        self.in_recovery = False
        self.cwr_point = 0
        self.round_end = self.snd_una
        self.backoff = min(self.backoff * 2, 64)
        self.rto_deadline = now + self.rto * self.backoff
        self.pace_next = now
        self.rec.cwnd_rows.append((now, self.fid, self.cc.cwnd, self.cc.ssthresh, "timeout"))
        self.try_send()

    def _finish(self, now: int) -> None:
        self.done = True
        r = self.record
        r.end_us = now
        r.acked_bytes = self.snd_una
        if self.scalable:
            r.final_score = self.score.value
        if self.on_done is not None:
            self.on_done(self)

    def final_snapshot(self) -> None:
        r = self.record
        r.acked_bytes = self.snd_una
        if self.scalable:
            r.final_score = self.score.value
