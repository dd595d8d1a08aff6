"""Acceptance checks, one function per criterion.

Each check runs its scenarios at the stated tolerance and returns a
CriterionResult whose line() is a single pass/fail summary. They are shared
by the test suite and the `verify` CLI verb.
"""

import filecmp
import math
import random
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import kernels
from ..aqm import make_aqm
from ..cc import ALPHA_ABE, prague_reduction
from ..fallback_detect import ONE, ClassicEcnScore, ScoreParams
from ..intlog import CarryState, carry_ilog2
from ..netsim import ScenarioConfig, Simulation, run
from ..packet import ECT0, ECT1, Packet
from ..rtt_track import RttEstimator
from . import csvout
from .matrix import cell_seed, pmap, run_matrix
from .stats import stabilization_time_s
from .verdict import Color, cell_verdict

CLASSIC = 1.0


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str
    elapsed_s: float = 0.0

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] {self.number:>2} {self.title}: {self.detail} ({self.elapsed_s:.1f}s)"


def _timed(number: int, title: str):
    def wrap(fn):
        def inner(*args, **kw):
            t = time.perf_counter()
            passed, detail = fn(*args, **kw)
            return CriterionResult(number, title, bool(passed), detail, time.perf_counter() - t)
        inner.__name__ = fn.__name__
        inner.__doc__ = fn.__doc__
        return inner
    return wrap


def _prague_trace(bundle):
    fid = bundle.flow_ids("prague", long=True)[0]
    t, s = bundle.score_trace(fid)
    return bundle.flows[fid], t, s


def _first(t, mask):
    idx = np.flatnonzero(mask)
    return int(t[idx[0]]) if idx.size else None


# 1. coexistence over CoDel

C1_RATES = (12.0, 40.0, 120.0)
C1_RTTS = (10.0, 20.0, 50.0)
C1_WINDOW_S = 10.0
C1_BUDGET_S = 300.0


def coexistence_config(rate: float, rtt: float, fallback: bool = True) -> ScenarioConfig:
    settle = stabilization_time_s(rate * 1e6, rtt / 1000)
    cfg = ScenarioConfig(rate_mbps=rate, rtt_ms=rtt, aqm="codel", prague="1", cubic="1",
                         duration_s=math.ceil(settle + C1_WINDOW_S), fallback=fallback)
    return cfg.with_(seed=cell_seed(1, cfg.label() + ("" if fallback else "_off")))


@_timed(1, "coexistence over CoDel")
def criterion_1(parallelism: int = 1, rates=C1_RATES, rtts=C1_RTTS):
    t0 = time.perf_counter()
    cells = [coexistence_config(r, d) for r in rates for d in rtts]
    off = coexistence_config(40.0, 10.0, fallback=False)
    results = run_matrix(cells + [off], parallelism)
    bad = []
    worst = (math.inf, -math.inf)
    for r in results[:-1]:
        if not r.ok:
            bad.append(f"{r.label}: {r.error}")
            continue
        lo, hi = min(r.prague.mean, r.cubic.mean), max(r.prague.mean, r.cubic.mean)
        worst = (min(worst[0], lo), max(worst[1], hi))
        if not (0.5 <= lo and hi <= 2.0):
            bad.append(f"{r.label} prague {r.prague.mean:.2f} cubic {r.cubic.mean:.2f}")
    r_off = results[-1]
    ratio = r_off.prague.mean / r_off.cubic.mean if r_off.ok and r_off.cubic.mean > 0 else math.inf
    elapsed = time.perf_counter() - t0
    ok = not bad and ratio > 2.0 and elapsed <= C1_BUDGET_S
    detail = (f"fallback on: normalized rates in [{worst[0]:.2f}, {worst[1]:.2f}] over "
              f"{len(cells)} cells; fallback off 40M/10ms ratio {ratio:.1f}; {elapsed:.0f}s")
    if bad:
        detail += "; out of range: " + ", ".join(bad)
    return ok, detail


# 2. detection speed

@_timed(2, "detection speed 12M/50ms")
def criterion_2(parallelism: int = 1):
    b = run(ScenarioConfig(rate_mbps=12, rtt_ms=50, aqm="codel", prague="1", cubic="1",
                           duration_s=20, seed=1))
    rec, t, s = _prague_trace(b)
    start = rec.start_us
    leave = _first(t, s > -7.0)
    classic = _first(t, s >= CLASSIC)
    top = _first(t, s >= 9.0)
    ok = (leave is not None and leave - start <= 2_000_000
          and classic is not None and classic - start <= 4_000_000 and top is not None)

    def fmt(x):
        return "never" if x is None else f"{(x - start) / 1e6:.2f}s"
    return ok, f"left floor {fmt(leave)}, classic {fmt(classic)}, ceiling {fmt(top)}"


# 3. no false positive over DualPI2

C3_RATES = (40.0, 120.0, 200.0)
C3_RTTS = (5.0, 10.0, 20.0, 50.0)
C3_PATTERNS = ("0", "1")


def _max_score(cfg: ScenarioConfig):
    b = run(cfg)
    _, _, s = _prague_trace(b)
    return cfg.label(), float(s.max()) if s.size else -8.0


@_timed(3, "no false positive over DualPI2")
def criterion_3(parallelism: int = 1, rates=C3_RATES, rtts=C3_RTTS, duration_s: float = 20.0,
                tolerated_rates=(4.0,)):
    cfgs = []
    for rate in tuple(rates) + tuple(tolerated_rates):
        for rtt in rtts:
            for cubic in C3_PATTERNS:
                c = ScenarioConfig(rate_mbps=rate, rtt_ms=rtt, aqm="dualpi2", prague="1",
                                   cubic=cubic, duration_s=duration_s)
                cfgs.append(c.with_(seed=cell_seed(3, c.label())))
    out = pmap(_max_score, cfgs, parallelism)
    judged = [(lbl, m) for (lbl, m), c in zip(out, cfgs) if c.rate_mbps not in tolerated_rates]
    amber = [f"{lbl} {m:.2f}" for lbl, m in judged if m >= CLASSIC]
    tolerated = sum(1 for (_, m), c in zip(out, cfgs) if c.rate_mbps in tolerated_rates and m >= CLASSIC)
    peak = max(m for _, m in judged)
    detail = (f"{len(judged)} runs, highest score {peak:.2f}; "
              f"{tolerated} tolerated AMBER at {','.join(f'{r:g}' for r in tolerated_rates)} Mb/s")
    if amber:
        detail += "; reached Classic: " + ", ".join(amber)
    return not amber, detail


# 4. staggered start

@_timed(4, "staggered start 1 Prague joins 9 Cubic")
def criterion_4(parallelism: int = 1, duration_s: float = 30.0, tail_s: float = 5.0):
    cfg = ScenarioConfig(rate_mbps=40, rtt_ms=20, aqm="codel", prague="1", cubic="9",
                         prague_start_s=10.0, duration_s=duration_s, seed=4)
    b = run(cfg)
    rec, t, s = _prague_trace(b)
    classic = _first(t, s >= CLASSIC)
    t0 = b.duration_us - int(tail_s * 1e6)
    prague = b.mean_rate(rec.fid, t0, b.duration_us)
    cubic = np.mean([b.mean_rate(f, t0, b.duration_us) for f in b.flow_ids("cubic", long=True)])
    ratio = prague / cubic if cubic > 0 else math.inf
    delay = None if classic is None else (classic - rec.start_us) / 1e6
    ok = delay is not None and delay <= 2.0 and ratio <= 2.0
    when = "never" if delay is None else f"{delay:.2f}s"
    return ok, f"Classic after {when}; Prague:avg Cubic over last {tail_s:g}s = {ratio:.2f}"


# 5. AQM switch

def _score_at(t, s, when_us: int) -> float:
    idx = np.searchsorted(t, when_us, side="right") - 1
    return float(s[idx]) if idx >= 0 else -8.0


def _longest_below(t, r, threshold: float, t_lo: int, t_hi: int) -> float:
    m = (t >= t_lo) & (t <= t_hi)
    t, r = t[m], r[m]
    longest = 0
    start = None
    for ti, ri in zip(t.tolist(), r.tolist()):
        if ri < threshold:
            if start is None:
                start = ti
            longest = max(longest, ti - start)
        else:
            start = None
    return longest / 1e6


def switch_run(first: str, second: str, seed: int = 5):
    cfg = ScenarioConfig(rate_mbps=40, rtt_ms=10, aqm=first, aqm_switch_s=10.0,
                         aqm_switch_to=second, prague="1L", cubic="9", duration_s=20, seed=seed)
    return run(cfg)


def _switch_check(first: str, second: str):
    b = switch_run(first, second)
    rec, t, s = _prague_trace(b)
    sw = 10_000_000
    classic_of = {"codel": True, "pi2": True, "fifo": True, "dualpi2": False}
    shorts = [f for f in b.flows.values() if f.kind == "prague" and not f.long and f.end_us is not None]
    before = cell_verdict(classic_of[first], [_score_at(t, s, 8_000_000)],
                          [f.final_score for f in shorts if f.end_us <= 8_000_000])
    after = cell_verdict(classic_of[second], [_score_at(t, s, b.duration_us)],
                         [f.final_score for f in shorts if f.start_us >= sw])
    tt, rate = b.rolling_throughput(rec.fid)
    pre = b.mean_rate(rec.fid, 5_000_000, sw)
    dip = _longest_below(tt, rate, 0.5 * pre, sw - 1_000_000, b.duration_us)
    ok = before.color == Color.GREEN and after.color == Color.GREEN and dip <= 2.0
    return ok, (f"{first}->{second}: before {before.color.name}, after {after.color.name}, "
                f"longest dip below half of {pre / 1e6:.1f} Mb/s: {dip:.1f}s")


@_timed(5, "AQM switch at 10 s")
def criterion_5(parallelism: int = 1):
    out = pmap(_switch_pair, [("codel", "dualpi2"), ("dualpi2", "codel")], parallelism)
    return all(ok for ok, _ in out), "; ".join(d for _, d in out)


def _switch_pair(pair):
    return _switch_check(*pair)


# 6. EWMA step response

def step_fraction(shift: int, lo: int = 10_000, hi: int = 20_000) -> float:
    srtt = lo << shift
    for _ in range(1 << shift):
        srtt += hi - (srtt >> shift)
    return ((srtt >> shift) - lo) / (hi - lo)


@_timed(6, "EWMA step response")
def criterion_6(parallelism: int = 1, shifts=range(4, 13)):
    fr = {g: step_fraction(g) for g in shifts}
    ok = all(abs(f - (1 - 1 / math.e)) <= 0.03 for f in fr.values())
    return ok, "moved " + ", ".join(f"{g}:{f:.1%}" for g, f in fr.items())


# 7. carry_ilog2 dithering

def dither_stats(x: int = 500, n: int = 100_000, shift: int = 9) -> tuple[float, float]:
    state = CarryState(shift)
    out = np.fromiter((carry_ilog2(x, shift, state) for _ in range(n)), dtype=np.int64, count=n)
    return float(np.mean(out == 9)), float(out.mean())


@_timed(7, "carry_ilog2 dithering")
def criterion_7(parallelism: int = 1, shift: int = 9, other_shifts=range(8, 20)):
    freq, mean = dither_stats(shift=shift)
    ok = abs(freq - 0.96578) <= 0.002 and abs(mean - 8.96578) <= 0.005
    worst = 0.0
    for sh in other_shifts:
        f, m = dither_stats(shift=sh)
        worst = max(worst, abs(m - 8.96578))
        ok = ok and abs(f - 0.96578) <= 0.002 and abs(m - 8.96578) <= 0.005
    return ok, (f"shift {shift}: nines {freq:.3%}, mean {mean:.5f}; worst mean error over "
                f"shifts {min(other_shifts)}-{max(other_shifts)} {worst:.5f}")


# 8. reroute filter

def sawtooth_trace(n: int = 12_000, step_at: int = 3000, base: int = 20_000, amp: int = 2000,
                   period: int = 64, step: int | None = None, seed: int = 8):
    """acc_mrtt samples: a noisy queue sawtooth plus a base step at step_at.

    With step=None the step is ten times the mean absolute deviation of the
    pre-step samples.
    """
    rng = random.Random(seed)
    saw = [base + (i % period) * amp // period + rng.randrange(0, amp // 8) for i in range(n)]
    if step is None:
        pre = np.asarray(saw[:step_at], dtype=np.float64)
        step = int(10 * np.mean(np.abs(pre - pre.mean())))
    return np.asarray([v + (step if i >= step_at else 0) for i, v in enumerate(saw)],
                      dtype=np.int64), step


REPLAY_COLUMNS = ("primary_mdev", "mdev", "primary_srtt", "alt_enabled", "alt_srtt", "alt_mdev")


def replay_filter(samples, ssthresh: int = 40, use_filter: bool = True):
    """Per-sample estimator outputs in REPLAY_COLUMNS order, in microseconds."""
    est = RttEstimator(int(samples[0]), 0, ssthresh, reroute_filter=use_filter)

    def row():
        return (est.primary_mdev_us, est.mdev_us, est.primary_srtt_us, est.alt_enabled,
                est.alt_srtt_us, est.alt_mdev_us)
    rows = [row()]
    for i, a in enumerate(samples[1:].tolist(), 1):
        est.on_ack(a, i)
        rows.append(row())
    return np.asarray(rows, dtype=np.int64)


def reroute_trace_check(step_at: int = 3000):
    """Peak mdev rise with and without the filter, and when the alt pair retires.

    The primary EWMAs count as converged on the alternative ones at the
    first sample where both srtt and mdev agree to within 1 us.
    """
    samples, step = sawtooth_trace(step_at=step_at)
    on = replay_filter(samples, use_filter=True)
    off = replay_filter(samples, use_filter=False)
    pre = int(np.mean(off[step_at - 500:step_at, 0]))
    rise_off = int(off[step_at:, 0].max()) - pre
    rise_on = int(on[step_at:, 1].max()) - pre
    post = on[step_at:]
    alive = post[:, 3] == 1
    close = alive & (np.abs(post[:, 2] - post[:, 4]) <= 1) & (np.abs(post[:, 0] - post[:, 5]) <= 1)
    conv = np.flatnonzero(close)
    conv_i = step_at + int(conv[0]) if conv.size else None
    alt_off_i = None
    if conv_i is not None:
        dead = np.flatnonzero(on[conv_i:, 3] == 0)
        alt_off_i = conv_i + int(dead[0]) if dead.size else None
    return {
        "step": step, "pre_mdev": pre, "rise_off": rise_off, "rise_on": rise_on,
        "converged": conv_i, "alt_off": alt_off_i,
    }


def reroute_sim_peak(use_filter: bool, seed: int = 1) -> float:
    cfg = ScenarioConfig(rate_mbps=40, rtt_ms=10, aqm="dualpi2", prague="1", cubic="0",
                         duration_s=12, reroute_s=8.0, reroute_ms=-4.0,
                         reroute_filter=use_filter, seed=seed)
    b = run(cfg)
    _, t, s = _prague_trace(b)
    after = s[t >= 8_000_000]
    return float(after.max()) if after.size else -8.0


@_timed(8, "reroute filter")
def criterion_8(parallelism: int = 1):
    r = reroute_trace_check()
    ratio = r["rise_on"] / r["rise_off"] if r["rise_off"] > 0 else math.inf
    lag = None if r["alt_off"] is None else r["alt_off"] - r["converged"]
    peaks = pmap(reroute_sim_peak, [True, False], parallelism)
    green = peaks[0] < CLASSIC
    amber = peaks[1] >= CLASSIC
    ok = ratio < 0.25 and lag is not None and lag <= 500 and green and amber
    return ok, (f"mdev rise {r['rise_on']} vs {r['rise_off']} us ({ratio:.1%}); alt off "
                f"{lag if lag is not None else 'never'} samples after convergence; DualPI2 "
                f"reroute peak score {peaks[0]:.2f} filtered, {peaks[1]:.2f} unfiltered")


# 9. active probe

def probe_script(aqm: str, kick_s: float = 5.0, seed: int = 9):
    """Tracer-only Prague flow next to a Cubic flow; score forced to -2 at kick_s."""
    cfg = ScenarioConfig(rate_mbps=40, rtt_ms=10, aqm=aqm, prague="1", cubic="1",
                         duration_s=kick_s + 3, probe=True, passive=False, seed=seed)
    sim = Simulation(cfg)
    sim.setup()
    prague = [f for f in sim.flows if f.scalable][0]
    seen = {}

    def kick():
        prague.score.score = -2 * ONE
        seen["sent"] = prague.tracer.sent
        seen["verdicts"] = prague.tracer.verdicts

    sim.loop.at(int(kick_s * 1e6), kick)
    sim.loop.run(sim.end_us)
    tr = prague.tracer
    return tr.sent - seen["sent"], tr.verdicts - seen["verdicts"], prague.score.value


@_timed(9, "active probe verdicts")
def criterion_9(parallelism: int = 1):
    sent, verdicts, score = probe_script("dualpi2")
    c_sent, c_verdicts, c_score = probe_script("codel")
    ok = sent == 4 and verdicts == 4 and score == -8.0 and c_verdicts == 0
    return ok, (f"DualPI2: {verdicts}/{sent} triplets gave L4S evidence, score -2.0 -> {score:.1f}; "
                f"CoDel: {c_verdicts} verdicts from {c_sent} triplets")


# 10. property suites

def score_fuzz(n: int = 1_000_000, seed: int = 10) -> tuple[int, int]:
    """Random rounds/CE/idle/init events through the score kernel; returns (min, max)."""
    rng = np.random.default_rng(seed)
    kinds = rng.choice(4, size=n, p=[0.85, 0.1, 0.04, 0.01]).astype(np.int64)
    v = np.exp2(rng.uniform(0, 24, n)).astype(np.int64)
    d = np.exp2(rng.uniform(0, 24, n)).astype(np.int64)
    s_fp = (rng.uniform(0, 1, n) * (ONE // 4)).astype(np.int64)
    p = ScoreParams()
    sc = ClassicEcnScore(p)
    out = kernels.score_replay(kinds, v, d, s_fp, sc.floor, sc.ceil, ONE, sc.v0_lg, sc.d0_lg,
                               p.v_lg, p.d_lg, 17, 18)
    return int(out.min()), int(out.max())


def symmetry_gap(k: int, rounds: int = 4096, shifts=(8, 9)) -> float:
    """|mean delta(V0*2^k) + mean delta(V0*2^-k)| in score units."""
    p = ScoreParams()
    means = []
    for v in (p.v0_us * 2.0 ** k, p.v0_us * 2.0 ** -k):
        sc = ClassicEcnScore(p, *shifts)
        means.append(np.mean([sc.round_delta(round(v), 1, 0.0) for _ in range(rounds)]) / ONE)
    return abs(means[0] + means[1])


def aqm_decisions(kind: str, swap: bool, n: int = 4000, rate_bps: float = 10e6, seed: int = 3):
    """Mark/drop decisions of one AQM for a random arrival trace."""
    rng = random.Random(seed)
    aqm = make_aqm(kind, rate_bps, seed=seed)
    dropped = []
    aqm.on_drop = lambda pkt: dropped.append(pkt.seq)
    t = 0
    arrivals = []
    for i in range(n):
        t += int(rng.expovariate(1 / 1100))
        ecn = ECT0 if rng.random() < 0.5 else ECT1
        if swap:
            ecn = ECT1 if ecn == ECT0 else ECT0
        arrivals.append((t, Packet(None, i, 1460, ecn, t, 0, 40)))
    out = []
    busy_until = 0
    i = 0
    now = 0
    while i < len(arrivals) or len(aqm):
        next_arr = arrivals[i][0] if i < len(arrivals) else None
        if len(aqm) and (next_arr is None or busy_until <= next_arr):
            now = max(now, busy_until)
            pkt = aqm.dequeue(now)
            if pkt is None:
                continue
            out.append((pkt.seq, now, pkt.ecn != pkt.ecn_in))
            busy_until = now + aqm.serialization_us(pkt.size)
        else:
            now = next_arr
            aqm.enqueue(arrivals[i][1], now)
            i += 1
    return out, sorted(dropped)


def csv_determinism(cfg: ScenarioConfig) -> bool:
    with tempfile.TemporaryDirectory() as a, tempfile.TemporaryDirectory() as b:
        pa = csvout.write_bundle(run(cfg), a)
        pb = csvout.write_bundle(run(cfg), b)
        return all(filecmp.cmp(x, Path(b) / x.name, shallow=False) for x in pa) and len(pa) == len(pb)


@_timed(10, "property suites")
def criterion_10(parallelism: int = 1):
    fails = []
    lo, hi = score_fuzz()
    if lo < -8 * ONE or hi > 9 * ONE:
        fails.append(f"score bounds [{lo / ONE}, {hi / ONE}]")
    # depth term: never negative, zero below D0/2 where dithering cannot reach log2(D0)
    sc, base = ClassicEcnScore(), ClassicEcnScore()
    for d in range(1, 2001, 7):
        a, b = sc.round_delta(750, d, 0.0), base.round_delta(750, 1, 0.0)
        if a < b or (d < 1000 and a != b):
            fails.append(f"depth term at d={d}")
            break
    sc1, sc2 = ClassicEcnScore(), ClassicEcnScore()
    if any(sc1.round_delta(900, 3000, s) > sc2.round_delta(900, 3000, 0.0) for s in (0.1, 0.5, 1.0)):
        fails.append("self-limited term raised the score")
    gaps = [symmetry_gap(k) for k in range(1, 6)]
    if max(gaps) > 0.02:
        fails.append(f"variability asymmetry {max(gaps):.3f}")
    for alt in (1, 2):
        for cw, al in ((100.0, 0.2), (37.5, 0.6), (10.0, 0.05)):
            if not math.isclose(prague_reduction(cw, al, 0.0, alt), cw * al / 2):
                fails.append(f"c=0 endpoint alt{alt}")
            if not math.isclose(prague_reduction(cw, al, 1.0, alt), cw * ALPHA_ABE / 2):
                fails.append(f"c=1 endpoint alt{alt}")
    for kind in ("codel", "pi2"):
        if aqm_decisions(kind, False) != aqm_decisions(kind, True):
            fails.append(f"{kind} treats ECT(0) and ECT(1) differently")
    cfg = ScenarioConfig(rate_mbps=12, rtt_ms=20, aqm="codel", prague="1L", cubic="1",
                         duration_s=4, seed=10)
    b = run(cfg)
    if b.conservation_violations:
        fails.append(f"{b.conservation_violations} conservation violations")
    if not csv_determinism(cfg.with_(duration_s=2)):
        fails.append("CSV output differs between identical runs")
    detail = ("score fuzz 1e6 events, depth/self-limited asymmetry, variability symmetry "
              f"(max gap {max(gaps):.4f}), endpoints, ECT equality, conservation, determinism")
    return not fails, detail + ("" if not fails else "; failed: " + ", ".join(fails))


CRITERIA = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
    6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10,
}


def run_all(numbers=None, parallelism: int = 1, echo=print) -> list[CriterionResult]:
    out = []
    for n in numbers or sorted(CRITERIA):
        res = CRITERIA[n](parallelism=parallelism)
        if echo is not None:
            echo(res.line())
        out.append(res)
    return out
