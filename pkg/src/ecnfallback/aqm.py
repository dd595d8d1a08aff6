"""Bottleneck queue disciplines: FIFO, CoDel, PI2 and DualPI2.

All ECN-capable packets are CE-marked rather than dropped; only Not-ECT
packets are dropped by the AQM, and anything is tail-dropped when the
shared buffer is full. Times are integer microseconds.
"""

import random
from collections import deque
from dataclasses import dataclass, field

from .packet import CE, ECT1, NOT_ECT

BUFFER_MS = 250


@dataclass
class AqmStats:
    enqueued: int = 0
    dequeued: int = 0
    marks: int = 0
    drops: int = 0
    overflow: int = 0
    marks_by_ecn: dict = field(default_factory=dict)


def buffer_bytes(rate_bps: float, ms: float = BUFFER_MS) -> int:
    return max(int(rate_bps * ms / 8000), 3000)


class Aqm:
    """Single FIFO with a byte cap; subclasses add marking."""

    kind = "fifo"
    classic = True

    def __init__(self, rate_bps: float, limit_bytes: int | None = None, seed: int = 0):
        self.rate_bps = rate_bps
        self.limit = limit_bytes if limit_bytes is not None else buffer_bytes(rate_bps)
        self.q = deque()
        self.backlog = 0
        self.stats = AqmStats()
        self.rng = random.Random(seed)
        self.on_drop = None

    def __len__(self):
        return len(self.q)

    def serialization_us(self, size: int) -> int:
        return int(size * 8e6 / self.rate_bps)

    def _accept(self, pkt, now: int) -> bool:
        if self.backlog + pkt.size > self.limit:
            self.stats.overflow += 1
            self._drop(pkt)
            return False
        pkt.enq = now
        self.backlog += pkt.size
        self.stats.enqueued += 1
        return True

    def _drop(self, pkt) -> None:
        self.stats.drops += 1
        if self.on_drop is not None:
            self.on_drop(pkt)

    def _mark_or_drop(self, pkt) -> bool:
        """CE-mark an ECT packet; drop a Not-ECT one. Returns True if kept."""
        if pkt.ecn == NOT_ECT:
            self._drop(pkt)
            return False
        if pkt.ecn != CE:
            st = self.stats
            st.marks += 1
            st.marks_by_ecn[pkt.ecn] = st.marks_by_ecn.get(pkt.ecn, 0) + 1
            pkt.ecn = CE
        return True

    def enqueue(self, pkt, now: int) -> bool:
        if not self._accept(pkt, now):
            return False
        self.q.append(pkt)
        return True

    def _pop(self, q):
        pkt = q.popleft()
        self.backlog -= pkt.size
        return pkt

    def dequeue(self, now: int):
        if not self.q:
            return None
        self.stats.dequeued += 1
        return self._pop(self.q)

    def drain(self) -> list:
        """Remove everything in arrival order (for switching disciplines)."""
        pkts = list(self.q)
        self.q.clear()
        self.backlog = 0
        return pkts

    def head_sojourn(self, now: int) -> int:
        return now - self.q[0].enq if self.q else 0

    def probability(self) -> float:
        return 0.0


class CoDel(Aqm):
    """Controlled delay, marking instead of dropping ECT packets."""

    kind = "codel"

    def __init__(self, rate_bps: float, limit_bytes: int | None = None, seed: int = 0,
                 target_us: int = 5000, interval_us: int = 100_000, mtu: int = 1500):
        super().__init__(rate_bps, limit_bytes, seed)
        self.target = target_us
        self.interval = interval_us
        self.mtu = mtu
        self.first_above_time = 0
        self.drop_next = 0
        self.count = 0
        self.lastcount = 0
        self.dropping = False

    def _control_law(self, t: int) -> int:
        return t + int(self.interval / (self.count ** 0.5))

    def _dodequeue(self, now: int):
        if not self.q:
            self.first_above_time = 0
            return None, False
        pkt = self._pop(self.q)
        sojourn = now - pkt.enq
        ok = False
        if sojourn < self.target or self.backlog <= self.mtu:
            self.first_above_time = 0
        elif self.first_above_time == 0:
            self.first_above_time = now + self.interval
        elif now >= self.first_above_time:
            ok = True
        return pkt, ok

    def dequeue(self, now: int):
        pkt, ok = self._dodequeue(now)
        if pkt is None:
            self.dropping = False
            return None
        if self.dropping:
            if not ok:
                self.dropping = False
            while self.dropping and now >= self.drop_next:
                self.count += 1
                if self._mark_or_drop(pkt):
                    self.drop_next = self._control_law(self.drop_next)
                    break
                pkt, ok = self._dodequeue(now)
                if pkt is None:
                    self.dropping = False
                    return None
                if not ok:
                    self.dropping = False
                else:
                    self.drop_next = self._control_law(self.drop_next)
        elif ok:
            if not self._mark_or_drop(pkt):
                pkt, _ = self._dodequeue(now)
            self.dropping = True
            delta = self.count - self.lastcount
            if delta > 1 and now - self.drop_next < 16 * self.interval:
                self.count = delta
            else:
                self.count = 1
            self.lastcount = self.count
            self.drop_next = self._control_law(now)
            if pkt is None:
                return None
        self.stats.dequeued += 1
        return pkt


class _PiCore:
    """Proportional-integral controller of the base probability p'."""

    def __init__(self, target_us: int = 15_000, tupdate_us: int = 16_000,
                 alpha: float = 0.16, beta: float = 3.2):
        self.target = target_us
        self.tupdate = tupdate_us
        self.alpha = alpha
        self.beta = beta
        self.p = 0.0
        self.prev_q = 0
        self.next_update = tupdate_us

    def update(self, qdelay_us: int) -> None:
        p = self.p + (self.alpha * (qdelay_us - self.target)
                      + self.beta * (qdelay_us - self.prev_q)) / 1e6
        self.p = 0.0 if p < 0 else (1.0 if p > 1 else p)
        self.prev_q = qdelay_us


class PI2(Aqm):
    """Single-queue PI2: classic packets marked with probability p'^2."""

    kind = "pi2"

    def __init__(self, rate_bps: float, limit_bytes: int | None = None, seed: int = 0,
                 target_us: int = 15_000, tupdate_us: int = 16_000,
                 alpha: float = 0.16, beta: float = 3.2):
        super().__init__(rate_bps, limit_bytes, seed)
        self.pi = _PiCore(target_us, tupdate_us, alpha, beta)

    def _maybe_update(self, now: int) -> None:
        pi = self.pi
        while now >= pi.next_update:
            pi.update(self.head_sojourn(now))
            pi.next_update += pi.tupdate

    def dequeue(self, now: int):
        self._maybe_update(now)
        while self.q:
            pkt = self._pop(self.q)
            p = self.pi.p
            if self.rng.random() < p * p and not self._mark_or_drop(pkt):
                continue
            self.stats.dequeued += 1
            return pkt
        return None

    def probability(self) -> float:
        return self.pi.p ** 2


class DualPI2(Aqm):
    """Coupled dual queue: ECT(1)/CE to the L4S queue, the rest to classic.

    The L4S queue is marked at a 1 ms sojourn step or with the coupled
    probability k*p'; the classic queue with p'^2. The L4S queue has
    priority, except that a credit counter gives the classic queue a
    c_protection share of the bytes while both are backlogged. Classic is
    only served on credit if its head is not younger than the L4S head.
    """

    kind = "dualpi2"
    classic = False

    def __init__(self, rate_bps: float, limit_bytes: int | None = None, seed: int = 0,
                 target_us: int = 15_000, tupdate_us: int = 16_000,
                 alpha: float = 0.16, beta: float = 3.2,
                 k: float = 2.0, step_us: int = 1000, c_protection: float = 0.1):
        super().__init__(rate_bps, limit_bytes, seed)
        self.lq = deque()
        self.pi = _PiCore(target_us, tupdate_us, alpha, beta)
        self.k = k
        self.step = step_us
        self.wc = c_protection
        self.credit = 0.0
        self.l_backlog = 0

    def __len__(self):
        return len(self.q) + len(self.lq)

    def enqueue(self, pkt, now: int) -> bool:
        if not self._accept(pkt, now):
            return False
        if pkt.ecn == ECT1 or pkt.ecn == CE:
            self.lq.append(pkt)
            self.l_backlog += pkt.size
        else:
            self.q.append(pkt)
        return True

    def _maybe_update(self, now: int) -> None:
        pi = self.pi
        while now >= pi.next_update:
            qc = now - self.q[0].enq if self.q else 0
            ql = now - self.lq[0].enq if self.lq else 0
            pi.update(qc if qc > ql else ql)
            pi.next_update += pi.tupdate

    def dequeue(self, now: int):
        self._maybe_update(now)
        rng = self.rng
        while self.q or self.lq:
            lq, cq = self.lq, self.q
            if lq and (not cq or not self._classic_turn(lq[0], cq[0])):
                pkt = self._pop(lq)
                self.l_backlog -= pkt.size
                if cq:
                    self.credit += self.wc * pkt.size
                if now - pkt.enq > self.step:
                    self._mark_or_drop(pkt)
                else:
                    pl = self.k * self.pi.p
                    if pl > 0 and rng.random() < pl:
                        self._mark_or_drop(pkt)
            else:
                pkt = self._pop(cq)
                if lq:
                    self.credit -= (1 - self.wc) * pkt.size
                p = self.pi.p
                if rng.random() < p * p and not self._mark_or_drop(pkt):
                    continue
            self.stats.dequeued += 1
            return pkt
        return None

    def _classic_turn(self, lhead, chead) -> bool:
        return self.credit > 0 and chead.enq <= lhead.enq + self.serialization_us(lhead.size)

    def drain(self) -> list:
        self.credit = 0.0
        pkts = sorted(list(self.q) + list(self.lq), key=lambda p: p.enq)
        self.q.clear()
        self.lq.clear()
        self.backlog = 0
        self.l_backlog = 0
        return pkts

    def head_sojourn(self, now: int) -> int:
        qc = now - self.q[0].enq if self.q else 0
        ql = now - self.lq[0].enq if self.lq else 0
        return max(qc, ql)

    def probability(self) -> float:
        return self.pi.p ** 2

    def l_probability(self) -> float:
        return min(self.k * self.pi.p, 1.0)


AQM_KINDS = {"fifo": Aqm, "codel": CoDel, "pi2": PI2, "dualpi2": DualPI2}


def make_aqm(kind: str, rate_bps: float, seed: int = 0, **params) -> Aqm:
    try:
        cls = AQM_KINDS[kind.lower()]
    except KeyError:
        raise ValueError(f"unknown AQM kind {kind!r}") from None
    return cls(rate_bps, seed=seed, **params)
