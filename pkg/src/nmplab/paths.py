"""End-to-end sessions over the emulated path.

Two named profiles are compared: the uncompressed PCM path and a
conference-call baseline modelled as extra processing delay plus band
limiting. Nothing here talks to real conferencing software.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import signal as sps

from .errors import ConfigurationError
from .jitter import JitterBuffer, JitterBufferConfig, JitterBufferStats, Provenance
from .latency import LatencyBudget, LinkParams, total_latency
from .netem import EventTrace, NetworkConditions, replay, transmit
from .stream import (
    HEADER_BYTES,
    PcmSignal,
    StreamConfig,
    decode_pcm,
    packet_interval,
    packetize,
    stream_bitrate,
)

# pushes within this many ms after a pop's scheduled time count as on time
_TIME_EPS_MS = 1e-9


class CodecModel(str, enum.Enum):
    TRANSPARENT = "Transparent"
    BAND_LIMITED = "BandLimited"


@dataclass(frozen=True)
class PathProfile:
    name: str
    processing_delay_ms: float
    codec_model: CodecModel = CodecModel.TRANSPARENT
    bandlimit_cutoff_hz: float = 3000.0
    effective_bitrate_bps: int = 1_536_000
    filter_order: int = 8

    def __post_init__(self):
        if not self.processing_delay_ms >= 0:
            raise ConfigurationError(f"processing_delay_ms must be >= 0, got {self.processing_delay_ms}")
        if not self.bandlimit_cutoff_hz > 0:
            raise ConfigurationError(f"bandlimit_cutoff_hz must be positive, got {self.bandlimit_cutoff_hz}")
        object.__setattr__(self, "codec_model", CodecModel(self.codec_model))

    @classmethod
    def preset(cls, name: str, **overrides) -> "PathProfile":
        try:
            base, (lo, hi) = PRESETS[name], PRESET_PROCESSING_RANGES[name]
        except KeyError:
            raise ConfigurationError(f"unknown path preset {name!r}; choose from {sorted(PRESETS)}") from None
        profile = replace(base, **overrides)
        if not lo <= profile.processing_delay_ms <= hi:
            raise ConfigurationError(
                f"{name} processing delay must stay within the measured {lo}-{hi} ms range")
        return profile

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "processing_delay_ms": self.processing_delay_ms,
            "codec_model": self.codec_model.value,
            "bandlimit_cutoff_hz": self.bandlimit_cutoff_hz,
            "effective_bitrate_bps": self.effective_bitrate_bps,
        }


PCM_JACKTRIP = PathProfile("pcm-jacktrip", 20.0, CodecModel.TRANSPARENT,
                           effective_bitrate_bps=stream_bitrate(StreamConfig()))
CONFERENCE_BASELINE = PathProfile("conference-baseline", 135.0, CodecModel.BAND_LIMITED,
                                  bandlimit_cutoff_hz=3000.0, effective_bitrate_bps=192_000)
PRESETS = {p.name: p for p in (PCM_JACKTRIP, CONFERENCE_BASELINE)}
PRESET_PROCESSING_RANGES = {"pcm-jacktrip": (15.0, 20.0), "conference-baseline": (130.0, 140.0)}


def apply_codec_model(signal: PcmSignal, profile: PathProfile, bit_depth: int = 16) -> PcmSignal:
    """Transparent: identity. BandLimited: causal Butterworth low-pass + 16-bit requantization.

    With the baseline's 192 kbps at 16-bit stereo the effective sample rate is
    6 kHz, whose Nyquist frequency is the default 3 kHz cutoff.
    """
    if profile.codec_model is CodecModel.TRANSPARENT:
        return signal
    nyquist = signal.sample_rate_hz / 2
    if profile.bandlimit_cutoff_hz >= nyquist:
        raise ConfigurationError(
            f"cutoff {profile.bandlimit_cutoff_hz} Hz is not below Nyquist ({nyquist} Hz)")
    sos = sps.butter(profile.filter_order, profile.bandlimit_cutoff_hz, btype="low",
                     fs=signal.sample_rate_hz, output="sos")
    filtered = sps.sosfilt(sos, signal.samples, axis=0)
    return PcmSignal(filtered, signal.sample_rate_hz).quantized(bit_depth)


def analytic_budget_for(profile: PathProfile, conditions: NetworkConditions,
                        stream: StreamConfig | None = None, *, include_header: bool = False,
                        direction: str = "uplink") -> LatencyBudget:
    """Closed-form budget for one packet; header bits excluded unless asked for."""
    stream = stream or StreamConfig()
    bits = stream.payload_bits + (HEADER_BYTES * 8 if include_header else 0)
    return total_latency(LinkParams(
        packet_size_bits=bits,
        bandwidth_bps=conditions.bandwidth(direction),
        distance_m=conditions.distance_m,
        propagation_speed_mps=conditions.propagation_speed_mps,
        processing_delay_ms=profile.processing_delay_ms,
    ))


@dataclass
class SessionResult:
    received: PcmSignal
    trace: EventTrace
    buffer_stats: JitterBufferStats
    measured_one_way_ms: float
    analytic_budget: LatencyBudget
    mean_one_way_ms: float = math.nan
    playout_start_ms: float = 0.0
    profile: PathProfile | None = None
    stream: StreamConfig = field(default_factory=StreamConfig)
    per_packet_ms: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def buffer_residency_ms(self) -> float:
        """Median one-way latency not explained by the closed-form budget."""
        return self.measured_one_way_ms - self.analytic_budget.total_ms

    def timeline_received(self) -> PcmSignal:
        """Received audio placed on the sender's clock (leading silence = playout start)."""
        lead = int(round(self.playout_start_ms * self.received.sample_rate_hz / 1000.0))
        return self.received.delayed(max(lead, 0))

    def report(self) -> dict:
        return {
            "path": self.profile.name if self.profile else None,
            "profile": self.profile.as_dict() if self.profile else None,
            "direction": self.trace.direction,
            "conditions": self.trace.conditions.as_dict(),
            "stream": {
                "sample_rate_hz": self.stream.sample_rate_hz,
                "bit_depth": self.stream.bit_depth,
                "channels": self.stream.channels,
                "frames_per_packet": self.stream.frames_per_packet,
                "payload_bitrate_bps": stream_bitrate(self.stream),
            },
            "analytic_budget": self.analytic_budget.as_dict(),
            "measured_one_way_ms": _json_float(self.measured_one_way_ms),
            "mean_one_way_ms": _json_float(self.mean_one_way_ms),
            "playout_start_ms": self.playout_start_ms,
            "packets_sent": len(self.trace),
            "packets_lost": self.trace.lost_count,
            "buffer_stats": self.buffer_stats.as_dict(),
        }


def _json_float(x: float) -> float | None:
    return None if math.isnan(x) else x


def run_session(signal: PcmSignal, profile: PathProfile, conditions: NetworkConditions,
                stream: StreamConfig | None = None, buffer: JitterBufferConfig | None = None,
                direction: str = "uplink") -> SessionResult:
    stream = stream or StreamConfig(sample_rate_hz=signal.sample_rate_hz, channels=signal.channels)
    buffer = buffer or JitterBufferConfig()
    interval = packet_interval(stream)

    coded = apply_codec_model(signal, profile, stream.bit_depth)
    packets = packetize(coded, stream)
    send_times = [k * interval for k in range(len(packets))]
    trace = transmit(packets, send_times, conditions, direction)
    proc = profile.processing_delay_ms
    arrivals = [(p, t + proc) for p, t in replay(trace, packets)]
    analytic = analytic_budget_for(profile, conditions, stream, direction=direction)

    if arrivals:
        first_packet, first_time = arrivals[0]
        # schedule as if the first arrival were exactly on time
        t0 = first_time - first_packet.sequence * interval
    else:
        t0 = analytic.total_ms
    t0 += buffer.prefetch_packets * interval

    jb = JitterBuffer(stream, buffer)
    blocks = []
    latencies = []
    nxt = 0
    for k in range(len(packets)):
        t = t0 + k * interval
        while nxt < len(arrivals) and arrivals[nxt][1] <= t + _TIME_EPS_MS:
            jb.push(*arrivals[nxt])
            nxt += 1
        block = jb.pop(t)
        blocks.append(block)
        if block.provenance is Provenance.ON_TIME:
            latencies.append(t - send_times[block.sequence])

    fpp = stream.frames_per_packet
    if blocks:
        frames = decode_pcm(b"".join(b.payload for b in blocks), stream.bit_depth, stream.channels)
    else:
        frames = np.zeros((0, stream.channels))
    missing = np.repeat([b.provenance is Provenance.CONCEALED for b in blocks], fpp).astype(bool)
    received = PcmSignal(frames, stream.sample_rate_hz, missing=missing)

    lat = np.asarray(latencies, dtype=float)
    return SessionResult(
        received=received,
        trace=trace,
        buffer_stats=jb.stats(),
        measured_one_way_ms=float(np.median(lat)) if lat.size else math.nan,
        mean_one_way_ms=float(lat.mean()) if lat.size else math.nan,
        analytic_budget=analytic,
        playout_start_ms=t0,
        profile=profile,
        stream=stream,
        per_packet_ms=lat,
    )


def run_round_trip(signal: PcmSignal, profile: PathProfile, conditions: NetworkConditions,
                   stream: StreamConfig | None = None,
                   buffer: JitterBufferConfig | None = None) -> tuple[SessionResult, SessionResult]:
    """Uplink session followed by a downlink session carrying the received audio back."""
    up = run_session(signal, profile, conditions, stream, buffer, direction="uplink")
    down = run_session(up.received, profile, conditions, stream, buffer, direction="downlink")
    return up, down
