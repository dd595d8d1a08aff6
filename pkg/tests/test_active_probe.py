import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ecnfallback.active_probe import (ECT0, ECT1, REAR_SIZE, TRACER_NUM, TracerState, front_size,
                                      triplet_layout)
from ecnfallback.aqm import DualPI2
from ecnfallback.fallback_detect import ONE, ClassicEcnScore
from ecnfallback.lab.acceptance import probe_script
from ecnfallback.netsim import ScenarioConfig, Simulation
from ecnfallback.packet import Packet

SMSS = 1460


def test_front_size_leaves_room_for_two_small_packets():
    assert front_size(SMSS) == SMSS - 2 * (40 + REAR_SIZE) == 1184


def test_triplet_overlaps():
    front, middle, rear = triplet_layout(1000, SMSS)
    assert (front.ecn, middle.ecn, rear.ecn) == (ECT1, ECT0, ECT1)
    assert middle.start == front.end - 2
    assert rear.start == middle.end - REAR_SIZE + 1 == front.end - 1
    sent = front.length + middle.length + rear.length
    distinct = rear.end - front.start
    assert sent - distinct == 99


def test_duplicate_payload_overhead_at_16_packets_per_round():
    # one triplet per round: 99 duplicate bytes per 16 segments
    assert 99 / (16 * SMSS) <= 0.0075
    # counting the two extra headers as well gives slightly more
    assert (99 + 2 * 40) / (16 * SMSS) == pytest.approx(0.00766, abs=1e-5)


def armed(score_units: float = -2.0) -> TracerState:
    tr = TracerState()
    tr.per_rtt_arm(int(score_units * ONE))
    return tr


def test_arming_threshold_is_minus_two():
    assert TracerState().arm_threshold == -2 * ONE
    assert armed(-2.0).ect_tracers == TRACER_NUM
    assert armed(-2.01).ect_tracers == 0


def test_one_triplet_per_round_then_suppressed():
    tr = armed()
    score = -2 * ONE
    snd = 0
    for i in range(TRACER_NUM):
        assert tr.can_send(SMSS, SMSS)
        segs = tr.take_triplet(snd, SMSS, score)
        assert tr.pending and not tr.can_send(SMSS, SMSS)
        t = segs[-1].end
        assert tr.on_ack(t, (t - REAR_SIZE - 1, t - 1), score)
        snd = t
        tr.per_rtt_arm(score)
    assert tr.suppressed and not tr.can_send(SMSS, SMSS)
    tr.per_rtt_arm(score)
    assert tr.suppressed
    tr.on_floor()
    assert tr.ect_tracers == 0 and not tr.suppressed


def test_in_order_middle_is_not_evidence():
    tr = armed()
    t = tr.take_triplet(0, SMSS, -2 * ONE)[-1].end
    # only the two bytes the middle shares with the front came back twice
    assert tr.on_ack(t, (t - REAR_SIZE - 1, t - REAR_SIZE + 1), -2 * ONE) is False
    assert not tr.pending and tr.verdicts == 0


def test_unrelated_dsack_ignored_and_verdict_expires():
    tr = armed()
    t = tr.take_triplet(5000, SMSS, -2 * ONE)[-1].end
    assert tr.on_ack(t, (10, 20), -2 * ONE) is False
    assert tr.pending
    for _ in range(tr.max_wait_rounds):
        tr.per_rtt_arm(-2 * ONE)
    assert not tr.pending


def test_no_send_without_a_full_segment_queued():
    tr = armed()
    assert not tr.can_send(SMSS - 1, SMSS)


@given(ops=st.lists(st.tuples(st.sampled_from(["round", "send", "ack", "floor"]),
                              st.floats(-8, 9)), max_size=300))
@settings(max_examples=200)
def test_at_most_one_triplet_in_flight_per_round(ops):
    tr = TracerState()
    snd = 0
    sent_this_round = 0
    for op, s in ops:
        score = int(s * ONE)
        if op == "round":
            tr.per_rtt_arm(score)
            sent_this_round = 0
        elif op == "send" and tr.can_send(SMSS, SMSS):
            assert not tr.pending
            snd = tr.take_triplet(snd, SMSS, score)[-1].end
            sent_this_round += 1
            assert sent_this_round == 1
        elif op == "ack" and tr.pending:
            t = tr.tracer_nxt
            tr.on_ack(t, (t - REAR_SIZE - 1, t - 1), score)
        elif op == "floor":
            tr.on_floor()
        assert -TRACER_NUM - 1 <= tr.ect_tracers <= TRACER_NUM


def test_evidence_never_raises_score():
    tr = TracerState()
    sc = ClassicEcnScore()
    for start in (-8.0, -5.0, -2.0, 0.5, 9.0):
        sc.score = int(start * ONE)
        before = sc.score
        sc.lower(tr.evidence_step())
        assert sc.score <= before


def test_four_verdicts_from_minus_two_reach_floor():
    sc = ClassicEcnScore()
    sc.score = -2 * ONE
    tr = TracerState()
    for _ in range(TRACER_NUM):
        sc.lower(tr.evidence_step())
    assert sc.value == -8.0


def test_rear_overtakes_middle_behind_classic_queue():
    q = DualPI2(40e6, seed=1)
    for i in range(20):
        q.enqueue(Packet(None, -10_000 + i * 1460, 1460, ECT0, 0), 0)
    now = 2_000
    front, middle, rear = triplet_layout(0, SMSS)
    for seg, role in ((front, 1), (middle, 2), (rear, 3)):
        q.enqueue(Packet(None, seg.start, seg.length, seg.ecn, now, role), now)
    order = []
    t = now
    while len(q):
        pkt = q.dequeue(t)
        if pkt is None:
            break
        order.append(pkt.tracer)
        t += q.serialization_us(pkt.size)
    roles = [r for r in order if r]
    assert roles.index(3) < roles.index(2)


def test_scripted_dualpi2_probe_reaches_floor():
    sent, verdicts, score = probe_script("dualpi2", kick_s=2.0)
    assert (sent, verdicts, score) == (4, 4, -8.0)


def test_scripted_codel_probe_is_silent():
    sent, verdicts, score = probe_script("codel", kick_s=2.0)
    assert sent == 4 and verdicts == 0 and score == -2.0


def test_probe_heavy_run_byte_accounting():
    cfg = ScenarioConfig(rate_mbps=40, rtt_ms=10, aqm="dualpi2", prague="1", cubic="1",
                         duration_s=4, probe=True, passive=False, seed=3)
    sim = Simulation(cfg)
    sim.setup()
    prague = [f for f in sim.flows if f.scalable][0]

    def rearm():
        prague.score.score = -2 * ONE
        prague.tracer.on_floor()
        sim.loop.after(20_000, rearm)

    sim.loop.at(1_000_000, rearm)
    b = sim.run()
    rec = b.flows[prague.fid]
    assert rec.triplets > 20
    assert rec.dup_bytes == 99 * rec.triplets
    assert rec.dup_bytes / rec.acked_bytes <= 0.0075
