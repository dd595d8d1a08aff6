"""Array kernels for trace replay and throughput statistics.

Each kernel has a plain implementation (Python loops over numpy arrays for
the sequential recurrences, vectorized numpy where the maths allows). When
numba is installed they are compiled with @njit, unless the environment
variable ECNFALLBACK_NO_NUMBA is set to a non-empty value other than "0".
Both versions give identical results; tests check that.
"""

import os
import types

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - depends on the environment
    numba = None

_disabled = os.environ.get("ECNFALLBACK_NO_NUMBA", "") not in ("", "0")
USE_NUMBA = numba is not None and not _disabled


def _ilog2(x):
    # floor(log2(x)) for x >= 1 using only integer shifts
    r = 0
    if x >= 1 << 32:
        x >>= 32
        r += 32
    if x >= 1 << 16:
        x >>= 16
        r += 16
    if x >= 1 << 8:
        x >>= 8
        r += 8
    if x >= 1 << 4:
        x >>= 4
        r += 4
    if x >= 1 << 2:
        x >>= 2
        r += 2
    if x >= 1 << 1:
        r += 1
    return r


def carry_ilog2_series_py(args, shift, carry0):
    """Run carry_ilog2 over an int64 array; returns (logs, final carry)."""
    n = args.shape[0]
    out = np.empty(n, dtype=np.int64)
    carry = carry0
    half = 1 << (shift - 1)
    for i in range(n):
        a = args[i] * carry + half
        r = _ilog2(a) - shift
        carry = a >> r
        out[i] = r
    return out, carry


def rtt_replay_py(samples, srtt_shift, mdev_shift, use_filter):
    """Replay the integer EWMAs and reroute filter over acc_mrtt samples.

    The first sample initializes the EWMAs. Returns an (n, 5) int64 array of
    primary srtt, primary mdev, selected srtt, selected mdev (all in us,
    upscaling removed) and an alt-enabled flag.
    """
    n = samples.shape[0]
    out = np.zeros((n, 5), dtype=np.int64)
    gs = srtt_shift
    gm = mdev_shift
    if n == 0:
        return out
    srtt = samples[0] << gs
    mdev = np.int64(1) << gm
    alt_on = False
    srtt_a = np.int64(0)
    mdev_a = np.int64(0)
    sign = 0
    out[0, 0] = srtt >> gs
    out[0, 1] = mdev >> gm
    out[0, 2] = srtt >> gs
    out[0, 3] = mdev >> gm
    for i in range(1, n):
        acc = samples[i]
        if use_filter:
            err = acc - (srtt >> gs)
            thr = 2 * mdev
            aerr = err if err >= 0 else -err
            if (aerr << gm) <= thr or (alt_on and ((sign * err) << gm) <= thr):
                if alt_on:
                    e2 = acc - (srtt_a >> gs)
                    mdev_a += (e2 if e2 >= 0 else -e2) - (mdev_a >> gm)
                    if mdev_a > mdev:
                        alt_on = False
                    else:
                        srtt_a += acc - (srtt_a >> gs)
            elif alt_on:
                e2 = acc - (srtt_a >> gs)
                mdev_a += (e2 if e2 >= 0 else -e2) - (mdev_a >> gm)
                srtt_a += acc - (srtt_a >> gs)
            else:
                two = mdev << 1
                mdev_a = mdev + ((two - (two >> gs) - (mdev >> gm)) >> gm)
                srtt_a = acc << gs
                sign = 1 if err > 0 else -1
                alt_on = True
        err = acc - (srtt >> gs)
        srtt += err
        mdev += (err if err >= 0 else -err) - (mdev >> gm)
        out[i, 0] = srtt >> gs
        out[i, 1] = mdev >> gm
        if alt_on and mdev_a < mdev:
            out[i, 2] = srtt_a >> gs
            out[i, 3] = mdev_a >> gm
        else:
            out[i, 2] = srtt >> gs
            out[i, 3] = mdev >> gm
        out[i, 4] = 1 if alt_on else 0
    return out


# event kinds for score_replay
EV_ROUND = 0
EV_CE = 1
EV_IDLE = 2
EV_INIT = 3


def score_replay_py(kinds, v, d, s_fp, floor, ceil, one, v0_lg, d0_lg, v_lg, d_lg,
                    srtt_shift, mdev_shift):
    """Replay the fixed-point score over an event stream (two-log path).

    s_fp holds the self-limited penalty already scaled to fixed point.
    Returns the score after every event.
    """
    n = kinds.shape[0]
    out = np.empty(n, dtype=np.int64)
    score = floor
    mcarry = 3 << (mdev_shift - 1)
    dcarry = 3 << (srtt_shift - 1)
    mhalf = 1 << (mdev_shift - 1)
    dhalf = 1 << (srtt_shift - 1)
    for i in range(n):
        k = kinds[i]
        if k == EV_ROUND:
            if score > floor:
                vv = v[i] if v[i] > 0 else 1
                dd = d[i] if d[i] > 0 else 1
                a = vv * mcarry + mhalf
                r = _ilog2(a) - mdev_shift
                mcarry = a >> r
                delta = (r << (20 - v_lg)) - v0_lg
                a = dd * dcarry + dhalf
                r = _ilog2(a) - srtt_shift
                dcarry = a >> r
                dl = r << (20 - d_lg)
                if dl > d0_lg:
                    delta += dl - d0_lg
                delta -= s_fp[i]
                score += delta
                if score < floor:
                    score = floor
                elif score > ceil:
                    score = ceil
        elif k == EV_CE:
            if score <= floor:
                score = floor + one
        elif k == EV_IDLE:
            if score > 0:
                score //= 2
        else:
            score = floor
        out[i] = score
    return out


def rolling_rate_py(t_us, size, window_us):
    """Bytes/s over the trailing window, evaluated at every sample time."""
    csum = np.concatenate(([0], np.cumsum(size, dtype=np.int64)))
    lo = np.searchsorted(t_us, t_us - window_us, side="right")
    hi = np.arange(1, t_us.shape[0] + 1)
    return (csum[hi] - csum[lo]) * (1e6 / window_us)


def binned_bytes_py(t_us, fid, size, n_flows, bin_us, n_bins):
    """Bytes per (flow, time bin); samples outside the range are ignored."""
    b = t_us // bin_us
    ok = (b >= 0) & (b < n_bins) & (fid >= 0) & (fid < n_flows)
    out = np.zeros(n_flows * n_bins, dtype=np.int64)
    np.add.at(out, fid[ok] * n_bins + b[ok], size[ok])
    return out.reshape(n_flows, n_bins)


def _rolling_rate_loop(t_us, size, window_us):
    n = t_us.shape[0]
    out = np.empty(n, dtype=np.float64)
    lo = 0
    acc = 0
    scale = 1e6 / window_us
    for i in range(n):
        acc += size[i]
        horizon = t_us[i] - window_us
        while t_us[lo] <= horizon:
            acc -= size[lo]
            lo += 1
        out[i] = acc * scale
    return out


def _binned_bytes_loop(t_us, fid, size, n_flows, bin_us, n_bins):
    out = np.zeros((n_flows, n_bins), dtype=np.int64)
    for i in range(t_us.shape[0]):
        b = t_us[i] // bin_us
        f = fid[i]
        if 0 <= b < n_bins and 0 <= f < n_flows:
            out[f, b] += size[i]
    return out


def _with_globals(fn, **extra):
    # same code object, different globals: lets the compiled copy call compiled helpers
    g = dict(fn.__globals__)
    g.update(extra)
    return types.FunctionType(fn.__code__, g, fn.__name__, fn.__defaults__, fn.__closure__)


if USE_NUMBA:
    _jit = numba.njit(cache=True)
    _ilog2_jit = _jit(_ilog2)
    carry_ilog2_series_jit = _jit(_with_globals(carry_ilog2_series_py, _ilog2=_ilog2_jit))
    rtt_replay_jit = _jit(rtt_replay_py)
    score_replay_jit = _jit(_with_globals(score_replay_py, _ilog2=_ilog2_jit))
    rolling_rate_jit = _jit(_rolling_rate_loop)
    binned_bytes_jit = _jit(_binned_bytes_loop)
    carry_ilog2_series = carry_ilog2_series_jit
    rtt_replay = rtt_replay_jit
    score_replay = score_replay_jit
    rolling_rate = rolling_rate_jit
    binned_bytes = binned_bytes_jit
else:
    carry_ilog2_series_jit = rtt_replay_jit = score_replay_jit = None
    rolling_rate_jit = binned_bytes_jit = None
    carry_ilog2_series = carry_ilog2_series_py
    rtt_replay = rtt_replay_py
    score_replay = score_replay_py
    rolling_rate = rolling_rate_py
    binned_bytes = binned_bytes_py


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
