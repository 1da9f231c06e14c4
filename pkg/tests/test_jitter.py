import threading

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nmplab.jitter import (
    Concealment,
    JitterBuffer,
    JitterBufferConfig,
    JitterBufferStats,
    Provenance,
    PushStatus,
)
from nmplab.stream import PcmSignal, StreamConfig, packetize

CFG = StreamConfig()


def make_packets(n, seed=0, start=0):
    rng = np.random.default_rng(seed)
    sig = PcmSignal(rng.uniform(-0.5, 0.5, (n * CFG.frames_per_packet, 2)), 48000)
    return packetize(sig, CFG, first_sequence=start)


def test_in_order_accepted():
    jb = JitterBuffer(CFG)
    assert [jb.push(p, 0.0) for p in make_packets(3)] == [PushStatus.ACCEPTED] * 3


def test_late_packet_dropped():
    pk = make_packets(7)
    jb = JitterBuffer(CFG, JitterBufferConfig(depth_packets=8))
    for p in pk[:5]:
        jb.push(p, 0.0)
    for t in range(6):
        jb.pop(float(t))
    assert jb.head == 6
    assert jb.push(pk[5], 6.5) is PushStatus.LATE
    assert jb.stats().dropped_late == 1


def test_overflow_evicts_oldest():
    pk = make_packets(5)
    jb = JitterBuffer(CFG, JitterBufferConfig(depth_packets=4))
    statuses = [jb.push(p, 0.0) for p in pk]
    assert statuses[-1] is PushStatus.ACCEPTED
    assert jb.stats().overruns == 1
    assert len(jb) == 4
    block = jb.pop(0.0)
    assert block.sequence == 1 and block.payload == pk[1].payload


def test_overflow_when_incoming_is_oldest():
    pk = make_packets(3)
    jb = JitterBuffer(CFG, JitterBufferConfig(depth_packets=2))
    jb.push(pk[1], 0.0)
    jb.push(pk[2], 0.0)
    assert jb.push(pk[0], 0.0) is PushStatus.OVERFLOW
    assert jb.stats().overruns == 1


def test_duplicate():
    pk = make_packets(1)
    jb = JitterBuffer(CFG)
    jb.push(pk[0], 0.0)
    assert jb.push(pk[0], 0.0) is PushStatus.DUPLICATE


def test_pop_in_order():
    pk = make_packets(3)
    jb = JitterBuffer(CFG)
    for p in pk:
        jb.push(p, 1.0)
    block = jb.pop(3.0)
    assert block.provenance is Provenance.ON_TIME
    assert block.payload == pk[0].payload
    assert block.residency_ms == 2.0


def test_repeat_last_conceals_gap():
    pk = make_packets(3)
    jb = JitterBuffer(CFG, JitterBufferConfig(concealment=Concealment.REPEAT_LAST))
    jb.push(pk[0], 0.0)
    jb.push(pk[2], 0.0)
    jb.pop(0.0)
    block = jb.pop(1.0)
    assert block.provenance is Provenance.CONCEALED
    assert block.payload == pk[0].payload
    assert jb.pop(2.0).payload == pk[2].payload
    s = jb.stats()
    assert (s.concealed, s.underruns, s.delivered) == (1, 1, 3)


def test_zero_fill_on_empty_buffer():
    jb = JitterBuffer(CFG, JitterBufferConfig(concealment=Concealment.ZERO_FILL))
    block = jb.pop(0.0)
    assert block.provenance is Provenance.CONCEALED
    assert block.payload == bytes(512)


def test_repeat_last_with_nothing_delivered_is_silence():
    assert JitterBuffer(CFG).pop(0.0).payload == bytes(512)


def test_no_activity_stats():
    assert JitterBuffer(CFG).stats() == JitterBufferStats()


def test_n_in_order():
    pk = make_packets(50)
    jb = JitterBuffer(CFG)
    for k, p in enumerate(pk):
        jb.push(p, float(k))
        jb.pop(float(k))
    s = jb.stats()
    assert s.delivered == 50 and s.concealed == 0 and s.on_time == 50


def test_random_loss_concealment_count():
    n = 10_000
    rng = np.random.default_rng(1234)
    lost = rng.random(n) < 0.03
    payload = bytes(CFG.payload_bytes)
    jb = JitterBuffer(CFG, JitterBufferConfig(depth_packets=4))
    from nmplab.stream import AudioPacket
    for k in range(n):
        if not lost[k]:
            jb.push(AudioPacket(k, k * 128, CFG.config_tag, payload), float(k))
        jb.pop(float(k))
    s = jb.stats()
    # binomial oracle: mean 300, sd sqrt(n p (1-p))
    sd = (n * 0.03 * 0.97) ** 0.5
    assert abs(s.concealed - 300) <= 3 * sd
    assert s.concealed == int(lost.sum())
    assert s.on_time + s.concealed == n


def _play(jb, arrivals, n):
    """arrivals: list of (packet, time); pop k happens at time k after pushes with time <= k."""
    arrivals = sorted(arrivals, key=lambda a: a[1])
    out, i = [], 0
    for k in range(n):
        while i < len(arrivals) and arrivals[i][1] <= k:
            jb.push(*arrivals[i])
            i += 1
        out.append(jb.pop(float(k)))
    return out


@settings(max_examples=100, deadline=None)
@given(st.integers(min_value=1, max_value=40), st.data())
def test_reordering_is_corrected(n, data):
    pk = make_packets(n, seed=n)
    # each packet arrives no later than its own playout deadline
    times = [data.draw(st.floats(min_value=0, max_value=k)) for k in range(n)]
    perm = data.draw(st.permutations(range(n)))
    shuffled = [(pk[i], times[i]) for i in perm]
    got = _play(JitterBuffer(CFG, JitterBufferConfig(depth_packets=n)), shuffled, n)
    ref = _play(JitterBuffer(CFG, JitterBufferConfig(depth_packets=n)), [(p, 0.0) for p in pk], n)
    assert b"".join(b.payload for b in got) == b"".join(b.payload for b in ref)
    assert all(b.provenance is Provenance.ON_TIME for b in got)


@settings(max_examples=100, deadline=None)
@given(st.integers(min_value=1, max_value=60), st.floats(min_value=0, max_value=1),
       st.sampled_from(list(Concealment)), st.integers(min_value=1, max_value=8), st.integers(0, 2**16))
def test_output_continuity(n, loss, concealment, depth, seed):
    rng = np.random.default_rng(seed)
    pk = make_packets(n, seed=seed)
    arrivals = [(p, float(rng.uniform(0, n))) for p in pk if rng.random() >= loss]
    jb = JitterBuffer(CFG, JitterBufferConfig(depth_packets=depth, concealment=concealment))
    out = _play(jb, arrivals, n)
    assert sum(len(b.payload) for b in out) == n * CFG.payload_bytes
    s = jb.stats()
    assert s.on_time + s.concealed == n == s.delivered
    assert s.received == sum(1 for _, t in arrivals if t <= n - 1)


def test_wraparound_successor():
    pk = make_packets(3, start=2**32 - 2)
    jb = JitterBuffer(CFG, start_sequence=2**32 - 2)
    for p in pk:
        assert jb.push(p, 0.0) is PushStatus.ACCEPTED
    seqs = [jb.pop(0.0).sequence for _ in range(3)]
    assert seqs == [2**32 - 2, 2**32 - 1, 0]
    assert jb.stats().concealed == 0


def test_threaded_single_producer_single_consumer():
    n = 2000
    pk = make_packets(n)
    jb = JitterBuffer(CFG, JitterBufferConfig(depth_packets=n))

    def producer():
        for p in pk:
            jb.push(p, 0.0)

    t = threading.Thread(target=producer)
    t.start()
    t.join()
    out = [jb.pop(0.0) for _ in range(n)]
    assert all(b.provenance is Provenance.ON_TIME for b in out)


def test_invalid_depth():
    with pytest.raises(ValueError):
        JitterBufferConfig(depth_packets=0)
