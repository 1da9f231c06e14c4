"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` or directly as a script.
"""
import io
import json
import math
import time
from contextlib import redirect_stdout

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nmplab import cli
from nmplab.analysis import (
    BAND_LABELS_HZ,
    generate,
    pitch_deviation,
    quarter_tone_scale,
    spectral_compare,
    white_noise,
)
from nmplab.jitter import Concealment, JitterBuffer, JitterBufferConfig, Provenance
from nmplab.netem import NetworkConditions, empirical_loss_rate, transmit
from nmplab.paths import CONFERENCE_BASELINE, PCM_JACKTRIP, run_session
from nmplab.stream import (
    HEADER_BYTES,
    AudioPacket,
    PcmSignal,
    StreamConfig,
    decode_config_tag,
    deserialize,
    encode_config_tag,
    packetize,
    serialize,
    stream_bitrate,
)

QUIET = NetworkConditions(loss_probability=0.0, jitter_ms=0.0)
CFG = StreamConfig()


def report(number, title, ok, detail, capsys=None):
    line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
    if capsys is None:
        print(line)
    else:
        with capsys.disabled():
            print("\n" + line)
    return ok


def budget_via_cli(proc):
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = cli.main(["budget", "--bits", "4096", "--bw", "5e6", "--dist", "1e6", "--proc", str(proc), "--json"])
    assert code == 0
    return json.loads(buf.getvalue())


def check_budget():
    a, b = budget_via_cli(20), budget_via_cli(135)
    ok = (abs(a["transmission_ms"] - 0.8192) <= 1e-6 and a["propagation_ms"] == 5.0
          and abs(a["total_ms"] - 25.8192) <= 1e-6 and abs(b["total_ms"] - 140.8192) <= 1e-6)
    return ok, (f"T_d={a['transmission_ms']:.6f} T_p={a['propagation_ms']} "
                f"pcm={a['total_ms']:.6f} ({a['class']}) baseline={b['total_ms']:.6f} ({b['class']})")


def check_latency():
    sig = white_noise(5.0, seed=1)
    start = time.perf_counter()
    pcm = run_session(sig, PCM_JACKTRIP, QUIET).measured_one_way_ms
    base = run_session(sig, CONFERENCE_BASELINE, QUIET).measured_one_way_ms
    elapsed = time.perf_counter() - start
    diff = base - pcm
    ok = 25 <= pcm <= 28 and 139 <= base <= 143 and abs(diff - 115) <= 2 and elapsed < 10
    return ok, f"pcm={pcm:.4f} ms baseline={base:.4f} ms diff={diff:.4f} ms runtime={elapsed:.2f} s (5 s signal)"


def check_spectral():
    sig = white_noise(5.0, seed=2)
    pcm = spectral_compare(sig, run_session(sig, PCM_JACKTRIP, QUIET).received)
    base = spectral_compare(sig, run_session(sig, CONFERENCE_BASELINE, QUIET).received)
    worst_pcm = float(np.max(np.abs(pcm.delta_db)))
    high = [base.delta_at(f) for f in BAND_LABELS_HZ if f >= 4000]
    ok = worst_pcm <= 0.5 and all(d <= -20.0 for d in high)
    return ok, (f"pcm max |delta|={worst_pcm:.3f} dB; baseline >=4 kHz deltas="
                + ",".join(f"{d:.1f}" for d in high) + " dB")


def check_bitrate():
    pcm = stream_bitrate(StreamConfig(sample_rate_hz=48000, bit_depth=16, channels=2))
    base = CONFERENCE_BASELINE.effective_bitrate_bps
    return pcm == 1_536_000 and base == 192_000, f"pcm={pcm} bps baseline={base} bps"


def check_pitch():
    spec = quarter_tone_scale()
    sig = generate(spec)
    parts, ok = [], True
    for loss, seeds in ((0.0, [0]), (0.03, [0, 1, 2, 3, 4])):
        for seed in seeds:
            r = run_session(sig, PCM_JACKTRIP, NetworkConditions(loss_probability=loss, seed=seed))
            rep = pitch_deviation(r.received, spec)
            worst = rep.max_abs_deviation_cents
            ok &= rep.detected_count >= (12 if loss == 0 else 11) and (worst is None or worst <= 5.0)
            shown = "n/a" if worst is None else f"{worst:.3f}c"
            parts.append(f"loss={loss} seed={seed}: {rep.detected_count}/12 max={shown}")
    return ok, "; ".join(parts)


def check_emulator():
    n, p = 100_000, 0.03
    pk = [AudioPacket(k, k * 128, CFG.config_tag, bytes(CFG.payload_bytes)) for k in range(n)]
    sends = [k * 128 / 48 for k in range(n)]
    cond = NetworkConditions(loss_probability=p, seed=12345)
    a = transmit(pk, sends, cond)
    rate = empirical_loss_rate(a)
    sigma = math.sqrt(p * (1 - p) / n)
    identical = a.to_text() == transmit(pk, sends, cond).to_text()
    ok = abs(rate - p) <= 3 * sigma and identical
    return ok, f"loss={rate:.5f} (|dev|={abs(rate - p) / sigma:.2f} sigma), identical traces={identical}"


def _play(jb, arrivals, n):
    arrivals = sorted(arrivals, key=lambda a: a[1])
    out, i = [], 0
    for k in range(n):
        while i < len(arrivals) and arrivals[i][1] <= k:
            jb.push(*arrivals[i])
            i += 1
        out.append(jb.pop(float(k)))
    return out


def _packets(n, seed):
    rng = np.random.default_rng(seed)
    return packetize(PcmSignal(rng.uniform(-0.5, 0.5, (n * CFG.frames_per_packet, 2)), 48000), CFG)


@settings(max_examples=300, deadline=None, derandomize=True)
@given(st.integers(min_value=1, max_value=48), st.data())
def _permutation_identity(n, data):
    pk = _packets(n, n)
    times = [data.draw(st.floats(min_value=0, max_value=k)) for k in range(n)]
    perm = data.draw(st.permutations(range(n)))
    got = _play(JitterBuffer(CFG, JitterBufferConfig(depth_packets=n)), [(pk[i], times[i]) for i in perm], n)
    ref = _play(JitterBuffer(CFG, JitterBufferConfig(depth_packets=n)), [(p, 0.0) for p in pk], n)
    assert b"".join(b.payload for b in got) == b"".join(b.payload for b in ref)
    assert all(b.provenance is Provenance.ON_TIME for b in got)


@settings(max_examples=300, deadline=None, derandomize=True)
@given(st.integers(min_value=1, max_value=64), st.floats(min_value=0, max_value=1),
       st.sampled_from(list(Concealment)), st.integers(min_value=1, max_value=8), st.integers(0, 2**16))
def _frame_conservation(n, loss, concealment, depth, seed):
    rng = np.random.default_rng(seed)
    arrivals = [(p, float(rng.uniform(0, n))) for p in _packets(n, seed) if rng.random() >= loss]
    out = _play(JitterBuffer(CFG, JitterBufferConfig(depth_packets=depth, concealment=concealment)), arrivals, n)
    frames = sum(len(b.payload) for b in out) // CFG.frame_bytes
    assert frames == n * CFG.frames_per_packet


def check_jitter_buffer():
    try:
        _permutation_identity()
        _frame_conservation()
    except AssertionError as exc:
        return False, f"counterexample: {exc}"
    return True, "300 permutations bit-identical to in-order; 300 lossy runs conserve pops x frames_per_packet"


_SAMPLE_TAGS = [encode_config_tag(r, d, c) for r in (44100, 48000, 96000) for d in (16, 24, 32) for c in (1, 2)]


@st.composite
def _wire_packets(draw):
    tag = draw(st.sampled_from(_SAMPLE_TAGS))
    _, depth, ch = decode_config_tag(tag)
    frames = draw(st.integers(min_value=0, max_value=256))
    size = frames * ch * depth // 8
    return AudioPacket(draw(st.integers(0, 2**32 - 1)), draw(st.integers(0, 2**64 - 1)), tag,
                       draw(st.binary(min_size=size, max_size=size)))


_wire_count = [0]


@settings(max_examples=10_000, deadline=None, derandomize=True)
@given(_wire_packets())
def _wire_roundtrip(p):
    _wire_count[0] += 1
    data = serialize(p)
    assert len(data) == HEADER_BYTES + len(p.payload)
    assert deserialize(data) == p


def check_wire():
    _wire_count[0] = 0
    try:
        _wire_roundtrip()
    except AssertionError as exc:
        return False, f"counterexample: {exc}"
    default = packetize(white_noise(CFG.frames_per_packet / 48000, seed=0), CFG)[0]
    ok = _wire_count[0] >= 10_000 and len(default.payload) == 512
    return ok, f"{_wire_count[0]} randomized round trips; default payload={len(default.payload)} bytes"


CRITERIA = [
    (1, "latency budget reproduction", check_budget),
    (2, "end-to-end simulated latency", check_latency),
    (3, "spectral fidelity", check_spectral),
    (4, "bitrate", check_bitrate),
    (5, "microtonal preservation", check_pitch),
    (6, "emulator statistics", check_emulator),
    (7, "jitter-buffer conservation", check_jitter_buffer),
    (8, "wire-format round trip", check_wire),
]


@pytest.mark.parametrize("number,title,check", CRITERIA, ids=[f"c{n}" for n, _, _ in CRITERIA])
def test_criterion(number, title, check, capsys):
    ok, detail = check()
    assert report(number, title, ok, detail, capsys), detail


if __name__ == "__main__":
    results = [report(n, title, *check()) for n, title, check in CRITERIA]
    raise SystemExit(0 if all(results) else 1)
