"""Floating-point and brute-force references the tests compare against.

Nothing here imports the package: each function is written from the
defining recurrence or closed form so that it can catch errors in the
integer implementations.
"""

import math


def float_ewma(samples, srtt_shift: int, mdev_shift: int):
    """Real-valued srtt/mdev with gains 2^-shift; first sample initializes."""
    g1 = 2.0 ** -srtt_shift
    g2 = 2.0 ** -mdev_shift
    srtt = float(samples[0])
    mdev = 1.0
    out = [(srtt, mdev)]
    for x in samples[1:]:
        err = x - srtt
        srtt += g1 * err
        mdev += g2 * (abs(err) - mdev)
        out.append((srtt, mdev))
    return out


def k1(g1: float, g2: float, k2: float = 2.0) -> float:
    return 1 + g2 * (k2 * (1 - g1) + (k2 - 1) * (1 - g2) - 1)


def float_reroute(samples, srtt_shift: int, mdev_shift: int, k2: float = 2.0):
    """Real-valued primary EWMAs plus the flip-flop alternative pair.

    Returns one dict per sample with primary and selected srtt/mdev and
    whether the alternative pair is enabled.
    """
    g1 = 2.0 ** -srtt_shift
    g2 = 2.0 ** -mdev_shift
    srtt = float(samples[0])
    mdev = 1.0
    alt = False
    srtt_a = mdev_a = 0.0
    sign = 0
    rows = [dict(srtt=srtt, mdev=mdev, sel_srtt=srtt, sel_mdev=mdev, alt=False)]
    for x in samples[1:]:
        err = x - srtt
        outlier = abs(err) > k2 * mdev
        same_side = alt and sign * err > k2 * mdev
        if not outlier or (alt and not same_side):
            if alt:
                mdev_a += g2 * (abs(x - srtt_a) - mdev_a)
                if mdev_a > mdev:
                    alt = False
                else:
                    srtt_a += g1 * (x - srtt_a)
        elif alt:
            mdev_a += g2 * (abs(x - srtt_a) - mdev_a)
            srtt_a += g1 * (x - srtt_a)
        else:
            alt = True
            srtt_a = float(x)
            mdev_a = mdev * k1(g1, g2, k2)
            sign = 1 if err > 0 else -1
        srtt += g1 * err
        mdev += g2 * (abs(err) - mdev)
        use_alt = alt and mdev_a < mdev
        rows.append(dict(srtt=srtt, mdev=mdev, alt=alt,
                         sel_srtt=srtt_a if use_alt else srtt,
                         sel_mdev=mdev_a if use_alt else mdev))
    return rows


def score_delta(v_us: float, d_us: float, s: float, v0_us: float = 750.0, d0_us: float = 2000.0,
                v_weight: float = 0.5, d_weight: float = 0.5, s_weight: float = 0.25) -> float:
    """Real-valued per-round change of the classic ECN score."""
    v = max(v_us, 1.0)
    d = max(d_us, 1.0)
    return (v_weight * math.log2(v / v0_us) + d_weight * math.log2(max(d / d0_us, 1.0))
            - s_weight * s)


def windowed_min(times, values, now: int, window: int) -> int:
    return min(v for t, v in zip(times, values) if now - window <= t <= now)


def pareto_mean_numeric(alpha: float, lo: float, hi: float, n: int = 200_000) -> float:
    """Mean of a Pareto(alpha, lo) truncated at hi by midpoint rule in log space."""
    norm = 1 - (lo / hi) ** alpha
    a, b = math.log(lo), math.log(hi)
    h = (b - a) / n
    total = 0.0
    for i in range(n):
        x = math.exp(a + (i + 0.5) * h)
        pdf = alpha * lo ** alpha / x ** (alpha + 1) / norm
        total += x * pdf * x * h      # dx = x du
    return total


def cubic_window(t_s: float, w_max: float, beta: float = 0.7, c: float = 0.4) -> float:
    """W(t) = C (t - K)^3 + W_max with K = cbrt(W_max (1 - beta) / C)."""
    k = (w_max * (1 - beta) / c) ** (1 / 3)
    return c * (t_s - k) ** 3 + w_max


def reno_mark_probability(w: float) -> float:
    """Steady-state Reno marking probability for mean window w: 3 / (2 w^2)."""
    return 3 / (2 * w * w)
