"""Packets and ECN codepoints shared by the AQMs and the simulator."""

NOT_ECT = 0
ECT1 = 1
ECT0 = 2
CE = 3

ECN_NAMES = {NOT_ECT: "not-ect", ECT1: "ect1", ECT0: "ect0", CE: "ce"}

HEADER_BYTES = 40
MTU = 1500
MSS = MTU - HEADER_BYTES

# tracer roles
NO_TRACER = 0
FRONT = 1
MIDDLE = 2
REAR = 3


class Packet:
    """A data segment on the wire. Times are integer microseconds."""

    __slots__ = ("flow", "seq", "length", "size", "ecn", "ecn_in", "sent", "tracer", "enq", "retx")

    def __init__(self, flow, seq: int, length: int, ecn: int, sent: int,
                 tracer: int = NO_TRACER, header: int = HEADER_BYTES):
        self.flow = flow
        self.seq = seq
        self.length = length
        self.size = length + header
        self.ecn = ecn
        self.ecn_in = ecn
        self.sent = sent
        self.tracer = tracer
        self.enq = 0
        self.retx = False

    @property
    def end(self) -> int:
        return self.seq + self.length

    def __repr__(self):
        return (f"Packet(flow={getattr(self.flow, 'fid', self.flow)}, seq={self.seq}, "
                f"len={self.length}, ecn={ECN_NAMES[self.ecn]})")


class Ack:
    """Cumulative ACK with SACK blocks and CE byte feedback."""

    __slots__ = ("ackno", "sack", "dsack", "ce_bytes", "echo_ts", "hold", "rcv_time")

    def __init__(self, ackno: int, sack: list, dsack, ce_bytes: int, echo_ts: int, hold: int):
        self.ackno = ackno
        self.sack = sack
        self.dsack = dsack
        self.ce_bytes = ce_bytes
        self.echo_ts = echo_ts
        self.hold = hold
        self.rcv_time = 0
