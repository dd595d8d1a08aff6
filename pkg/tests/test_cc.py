import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from ecnfallback.cc import (ALPHA_ABE, CWND_FLOOR, CubicCC, PragueCC, RenoCC, SelfLimitMeter,
                            prague_reduction)

alphas = st.floats(0.0, 1.0)
cs = st.floats(0.0, 1.0)


def test_abe_constants():
    assert ALPHA_ABE == pytest.approx(0.6)


@pytest.mark.parametrize("alt", [1, 2])
@given(cwnd=st.floats(2, 1e4), alpha=alphas)
def test_endpoints(alt, cwnd, alpha):
    assert prague_reduction(cwnd, alpha, 0.0, alt) == pytest.approx(cwnd * alpha / 2)
    if alpha <= ALPHA_ABE:
        assert prague_reduction(cwnd, alpha, 1.0, alt) == pytest.approx(cwnd * ALPHA_ABE / 2)


@pytest.mark.parametrize("alt", [1, 2])
@given(alpha=alphas, c=cs)
def test_continuous_in_c(alt, alpha, c):
    eps = 1e-6
    a = prague_reduction(100.0, alpha, c, alt)
    b = prague_reduction(100.0, alpha, min(c + eps, 1.0), alt)
    assert abs(a - b) <= 100 * eps


@pytest.mark.parametrize("alt", [1, 2])
@given(alpha=st.floats(0.0, ALPHA_ABE, exclude_max=True), c1=cs, c2=cs)
def test_non_decreasing_in_c(alt, alpha, c1, c2):
    lo, hi = sorted((c1, c2))
    assert prague_reduction(50.0, alpha, lo, alt) <= prague_reduction(50.0, alpha, hi, alt) + 1e-12


@given(cwnd=st.floats(2, 1e4), alpha=alphas, c=cs)
def test_alt2_never_more_than_half(cwnd, alpha, c):
    assert prague_reduction(cwnd, alpha, c, 2) <= cwnd / 2 + 1e-9


def test_alt1_interpolates_linearly():
    assert prague_reduction(100, 0.2, 0.5, 1) == pytest.approx(100 * 0.4 / 2)


def test_alpha_ewma_decays_with_gain_one_sixteenth():
    cc = PragueCC()
    for n in range(1, 6):
        cc.account(10_000, 0)
        cc.on_round_end()
        assert cc.alpha == pytest.approx((15 / 16) ** n, abs=1e-5)


def test_alpha_converges_to_marked_fraction():
    cc = PragueCC()
    for _ in range(400):
        cc.account(10_000, 2_500)
        cc.on_round_end()
    assert cc.alpha == pytest.approx(0.25, abs=1e-3)


def test_fallback_off_ignores_c():
    on, off = PragueCC(init_cwnd=100), PragueCC(init_cwnd=100, fallback=False)
    on.alpha_fp = off.alpha_fp = 1 << 17     # alpha 0.125
    on.on_ce(1.0)
    off.on_ce(1.0)
    assert on.cwnd == pytest.approx(70.0)
    assert off.cwnd == pytest.approx(100 - 100 * 0.125 / 2)


def test_prague_growth_and_floor():
    cc = PragueCC(init_cwnd=10)
    cc.on_ack(5)
    assert cc.cwnd == 15 and cc.in_slow_start
    cc.ssthresh = 15
    cc.on_ack(15)
    assert cc.cwnd == pytest.approx(16)
    cc.cwnd = 2.5
    cc.on_ce(1.0)
    assert cc.cwnd >= CWND_FLOOR
    cc.on_timeout()
    assert cc.cwnd == CWND_FLOOR


def test_reno_halves_and_adds_one_per_window():
    cc = RenoCC(init_cwnd=40)
    assert cc.on_ce() == 20
    cc.on_ack(20)
    assert cc.cwnd == pytest.approx(21)
    assert cc.on_loss() == pytest.approx(10.5)


def test_cubic_reduction_and_k():
    cc = CubicCC(init_cwnd=100)
    cc.on_congestion(0)
    assert cc.cwnd == pytest.approx(70)
    assert cc.k == pytest.approx((100 * 0.3 / 0.4) ** (1 / 3))


def test_cubic_fast_convergence():
    cc = CubicCC(init_cwnd=100)
    cc.on_congestion(0)
    cc.on_congestion(0)
    assert cc.w_max == pytest.approx(70 * 1.7 / 2)


def drive_cubic(w_max: float, rtt_us: int, seconds: float):
    cc = CubicCC(init_cwnd=w_max)
    cc.set_rtt(rtt_us)
    cc.on_congestion(0)
    now = 0
    samples = []
    while now < seconds * 1e6:
        n = int(cc.cwnd)
        for i in range(n):
            cc.on_ack(1.0, now + rtt_us * i // n)
        now += rtt_us
        samples.append((now / 1e6, cc.cwnd))
    return samples


def test_cubic_follows_closed_form_through_plateau():
    # K is about 9.1 s: check the concave part, the plateau and the convex part
    for t, w in drive_cubic(1000.0, 50_000, 12.0):
        if t >= 0.5:
            assert w == pytest.approx(oracles.cubic_window(t, 1000.0), rel=0.01)


def test_cubic_reno_friendly_region_at_small_window():
    # the Reno-friendly estimate wins when W_max is small and RTT short
    samples = drive_cubic(20.0, 10_000, 3.0)
    t, w = samples[-1]
    assert w > oracles.cubic_window(t, 20.0)


def test_self_limit_meter():
    m = SelfLimitMeter(0)
    m.set_limited(True, 100)
    m.set_limited(False, 300)
    assert m.end_round(1000) == pytest.approx(0.2)
    m.set_limited(True, 1500)
    assert m.end_round(2000) == pytest.approx(0.5)
    assert m.end_round(3000) == pytest.approx(1.0)
    assert m.end_round(3000) == 1.0


def test_engines_share_interface():
    for cc in (PragueCC(), RenoCC(), CubicCC()):
        for name in ("on_ack", "on_ce", "on_loss", "on_timeout", "set_rtt"):
            assert callable(getattr(cc, name))
        assert math.isinf(cc.ssthresh)
