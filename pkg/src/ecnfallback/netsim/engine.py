"""Discrete-event loop with integer microsecond time and FIFO tie-breaking."""

from heapq import heappop, heappush


class SimulationError(RuntimeError):
    pass


class EventLoop:
    __slots__ = ("now", "_heap", "_seq", "events")

    def __init__(self):
        self.now = 0
        self._heap = []
        self._seq = 0
        self.events = 0

    def at(self, t: int, fn, *args) -> None:
        """Schedule fn(*args) at absolute time t."""
        self._seq += 1
        heappush(self._heap, (t, self._seq, fn, args))

    def after(self, dt: int, fn, *args) -> None:
        self._seq += 1
        heappush(self._heap, (self.now + dt, self._seq, fn, args))

    def run(self, until: int) -> None:
        heap = self._heap
        n = 0
        now = self.now
        while heap and heap[0][0] <= until:
            t, _, fn, args = heappop(heap)
            if t < now:
                raise SimulationError(f"event at {t} us scheduled in the past (now {now} us)")
            self.now = now = t
            fn(*args)
            n += 1
        self.events += n
        self.now = until

    def pending(self) -> int:
        return len(self._heap)
