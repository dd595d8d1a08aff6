"""Integer-only base-2 logarithms with dithered fractional carry.

carry_ilog2 returns an integer log each call but carries the remainder of
the argument over to the next call, so the long-run mean of its outputs
tracks the real log2 of a slowly varying argument.
"""

from dataclasses import dataclass


def ilog2(x: int) -> int:
    """Floor of log2(x) for x >= 1."""
    if x < 1:
        raise ValueError("ilog2 needs a positive argument")
    return x.bit_length() - 1


class CarryState:
    """Fractional remainder kept between carry_ilog2 calls.

    The value is upscaled by ``shift`` bits and stays in [2^shift, 2^(shift+1))
    once the first call has been made.
    """

    __slots__ = ("carry",)

    def __init__(self, shift: int, carry: int | None = None):
        # start at 1.5, the middle of the carry range
        self.carry = (3 << (shift - 1)) if carry is None else carry

    def rescale(self, delta: int) -> None:
        if delta > 0:
            self.carry <<= delta
        elif delta < 0:
            self.carry >>= -delta

    def __repr__(self):
        return f"CarryState({self.carry})"


def carry_ilog2(arg: int, shift: int, state: CarryState) -> int:
    """Dithered integer log2 of ``arg``.

    ``shift`` is the number of bits the carry is upscaled by. Each call
    multiplies the argument by the carried fraction, rounds, takes the
    integer log and keeps what is left over for next time.
    """
    arg *= state.carry
    arg += 1 << (shift - 1)
    r = arg.bit_length() - 1 - shift
    state.carry = arg >> r
    return r


@dataclass(slots=True)
class UpscaledEwma:
    """An EWMA stored as ``true_value << shift``."""

    value: int
    shift: int

    def true_value(self) -> int:
        return self.value >> self.shift

    def rescale(self, new_shift: int) -> None:
        delta = new_shift - self.shift
        self.value = shift_by(self.value, delta)
        self.shift = new_shift


def shift_by(value: int, delta: int) -> int:
    return value << delta if delta >= 0 else value >> -delta


def rescale_on_shift_change(ewma: UpscaledEwma, carry: CarryState, new_shift: int) -> int:
    """Move an EWMA and its carry to a new upscale; returns the shift delta."""
    delta = new_shift - ewma.shift
    ewma.rescale(new_shift)
    carry.rescale(delta)
    return delta
