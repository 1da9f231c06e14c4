"""PCM packetization, datagram wire format and bitrate accounting.

Wire layout of one datagram (all header integers big-endian)::

    offset  size  field
    0       4     sequence          uint32, wraps modulo 2**32
    4       8     timestamp_frames  uint64, frame index of the first payload frame
    12      2     config_tag        sample rate / bit depth / channel count
    14      2     reserved          zero on send, ignored on receive
    16      n     payload           interleaved little-endian signed PCM

``config_tag`` packs ``rate_index << 12 | depth_code << 10 | (channels - 1)``
where ``rate_index`` indexes :data:`SAMPLE_RATES` and ``depth_code`` indexes
:data:`BIT_DEPTHS`. Frames per packet are implied by the payload length.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import ConfigurationError, DecodeError, ProtocolError

HEADER = struct.Struct(">IQHH")
HEADER_BYTES = HEADER.size  # 16

SEQ_MODULUS = 1 << 32
TIMESTAMP_MODULUS = 1 << 64

SAMPLE_RATES = (8000, 11025, 16000, 22050, 24000, 32000, 44100, 48000,
                88200, 96000, 176400, 192000)
BIT_DEPTHS = (16, 24, 32)
MAX_CHANNELS = 1024


@dataclass(frozen=True)
class StreamConfig:
    sample_rate_hz: int = 48000
    bit_depth: int = 16
    channels: int = 2
    frames_per_packet: int = 128

    def __post_init__(self):
        if int(self.sample_rate_hz) != self.sample_rate_hz or self.sample_rate_hz <= 0:
            raise ConfigurationError(f"sample_rate_hz must be a positive integer, got {self.sample_rate_hz}")
        if self.bit_depth not in BIT_DEPTHS:
            raise ConfigurationError(f"bit_depth must be one of {BIT_DEPTHS}, got {self.bit_depth}")
        if not 1 <= self.channels <= MAX_CHANNELS:
            raise ConfigurationError(f"channels must be in [1, {MAX_CHANNELS}], got {self.channels}")
        if self.frames_per_packet <= 0:
            raise ConfigurationError(f"frames_per_packet must be positive, got {self.frames_per_packet}")

    @property
    def bytes_per_sample(self) -> int:
        return self.bit_depth // 8

    @property
    def frame_bytes(self) -> int:
        return self.channels * self.bytes_per_sample

    @property
    def payload_bytes(self) -> int:
        return self.frames_per_packet * self.frame_bytes

    @property
    def payload_bits(self) -> int:
        return self.payload_bytes * 8

    @property
    def packet_bytes(self) -> int:
        return HEADER_BYTES + self.payload_bytes

    @property
    def config_tag(self) -> int:
        return encode_config_tag(self.sample_rate_hz, self.bit_depth, self.channels)


def encode_config_tag(sample_rate_hz: int, bit_depth: int, channels: int) -> int:
    try:
        rate_index = SAMPLE_RATES.index(sample_rate_hz)
    except ValueError:
        raise ConfigurationError(f"sample rate {sample_rate_hz} Hz has no wire encoding") from None
    return (rate_index << 12) | (BIT_DEPTHS.index(bit_depth) << 10) | (channels - 1)


def decode_config_tag(tag: int) -> tuple[int, int, int]:
    """Return ``(sample_rate_hz, bit_depth, channels)`` for a wire tag."""
    rate_index = tag >> 12
    depth_code = (tag >> 10) & 0x3
    if rate_index >= len(SAMPLE_RATES) or depth_code >= len(BIT_DEPTHS):
        raise DecodeError(f"unknown config_tag 0x{tag:04x}")
    return SAMPLE_RATES[rate_index], BIT_DEPTHS[depth_code], (tag & 0x3FF) + 1


@dataclass(frozen=True)
class AudioPacket:
    sequence: int
    timestamp_frames: int
    config_tag: int
    payload: bytes

    def __post_init__(self):
        if not 0 <= self.sequence < SEQ_MODULUS:
            raise ValueError(f"sequence out of uint32 range: {self.sequence}")
        if not 0 <= self.timestamp_frames < TIMESTAMP_MODULUS:
            raise ValueError(f"timestamp out of uint64 range: {self.timestamp_frames}")
        if not 0 <= self.config_tag <= 0xFFFF:
            raise ValueError(f"config_tag out of uint16 range: {self.config_tag}")

    @property
    def wire_bytes(self) -> int:
        return HEADER_BYTES + len(self.payload)


@dataclass
class PcmSignal:
    """Real-valued multichannel audio, shape ``(frames, channels)``.

    ``missing`` optionally flags frames that were never received and hold
    placeholder zeros.
    """

    samples: np.ndarray
    sample_rate_hz: int
    missing: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim == 1:
            samples = samples[:, None]
        if samples.ndim != 2:
            raise ValueError(f"samples must be 1-D or 2-D, got shape {samples.shape}")
        self.samples = samples
        if self.sample_rate_hz <= 0:
            raise ValueError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")

    @classmethod
    def silence(cls, frames: int, sample_rate_hz: int, channels: int = 1) -> "PcmSignal":
        return cls(np.zeros((frames, channels)), sample_rate_hz)

    @property
    def frames(self) -> int:
        return self.samples.shape[0]

    @property
    def channels(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_s(self) -> float:
        return self.frames / self.sample_rate_hz

    def mono(self) -> np.ndarray:
        return self.samples.mean(axis=1)

    def quantized(self, bit_depth: int = 16) -> "PcmSignal":
        """Snap samples to the integer PCM grid of ``bit_depth``."""
        return PcmSignal(dequantize(quantize(self.samples, bit_depth), bit_depth), self.sample_rate_hz)

    def padded_to(self, frames: int) -> "PcmSignal":
        if frames < self.frames:
            raise ValueError("cannot pad to a shorter length")
        out = np.zeros((frames, self.channels))
        out[: self.frames] = self.samples
        return PcmSignal(out, self.sample_rate_hz)

    def delayed(self, frames: int) -> "PcmSignal":
        """Prepend ``frames`` of silence."""
        out = np.zeros((self.frames + frames, self.channels))
        out[frames:] = self.samples
        return PcmSignal(out, self.sample_rate_hz)


def quantize(samples: np.ndarray, bit_depth: int) -> np.ndarray:
    """Clamp to [-1, 1] and round to signed integers of ``bit_depth`` bits."""
    scale = float(1 << (bit_depth - 1))
    clipped = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    ints = np.rint(clipped * scale)
    return np.clip(ints, -scale, scale - 1).astype(np.int64)


def dequantize(ints: np.ndarray, bit_depth: int) -> np.ndarray:
    return np.asarray(ints, dtype=np.float64) / float(1 << (bit_depth - 1))


def encode_pcm(samples: np.ndarray, bit_depth: int) -> bytes:
    """Interleaved little-endian signed PCM bytes for a ``(frames, channels)`` array."""
    ints = quantize(samples, bit_depth).reshape(-1)
    if bit_depth == 16:
        return ints.astype("<i2").tobytes()
    if bit_depth == 32:
        return ints.astype("<i4").tobytes()
    raw = ints.astype("<i4").view(np.uint8).reshape(-1, 4)
    return raw[:, :3].tobytes()


def decode_pcm(data: bytes, bit_depth: int, channels: int) -> np.ndarray:
    if bit_depth == 16:
        ints = np.frombuffer(data, dtype="<i2").astype(np.int64)
    elif bit_depth == 32:
        ints = np.frombuffer(data, dtype="<i4").astype(np.int64)
    elif bit_depth == 24:
        raw = np.frombuffer(data, dtype=np.uint8).reshape(-1, 3).astype(np.int64)
        ints = raw[:, 0] | (raw[:, 1] << 8) | (raw[:, 2] << 16)
        ints = np.where(ints & 0x800000, ints - (1 << 24), ints)
    else:
        raise ConfigurationError(f"unsupported bit depth {bit_depth}")
    return dequantize(ints, bit_depth).reshape(-1, channels)


def packetize(signal: PcmSignal, config: StreamConfig, *, first_sequence: int = 0,
              first_timestamp: int = 0) -> list[AudioPacket]:
    """Split a signal into fixed-size packets; the tail is zero-padded."""
    if signal.sample_rate_hz != config.sample_rate_hz:
        raise ConfigurationError(
            f"signal rate {signal.sample_rate_hz} Hz does not match stream rate {config.sample_rate_hz} Hz")
    if signal.channels != config.channels:
        raise ConfigurationError(
            f"signal has {signal.channels} channels, stream expects {config.channels}")
    tag = config.config_tag
    fpp = config.frames_per_packet
    n_packets = -(-signal.frames // fpp)
    padded = signal.padded_to(n_packets * fpp).samples
    packets = []
    for k in range(n_packets):
        payload = encode_pcm(padded[k * fpp:(k + 1) * fpp], config.bit_depth)
        packets.append(AudioPacket(
            sequence=(first_sequence + k) % SEQ_MODULUS,
            timestamp_frames=(first_timestamp + k * fpp) % TIMESTAMP_MODULUS,
            config_tag=tag,
            payload=payload,
        ))
    return packets


def seq_distance(seq: int, reference: int) -> int:
    """Signed distance from ``reference`` to ``seq`` in serial-number arithmetic."""
    d = (seq - reference) % SEQ_MODULUS
    return d - SEQ_MODULUS if d >= SEQ_MODULUS // 2 else d


def depacketize(packets: Iterable[AudioPacket], config: StreamConfig, *,
                first_sequence: int | None = None, count: int | None = None) -> PcmSignal:
    """Reassemble packets into a signal, ordered by sequence number.

    Positions are taken relative to ``first_sequence`` (default: the sequence
    of the packet with the earliest timestamp). Gaps, and any packets up to
    ``count`` that never arrived, come back as zeros flagged in
    ``PcmSignal.missing``.
    """
    packets = list(packets)
    tags = {p.config_tag for p in packets}
    if len(tags) > 1:
        raise ProtocolError(f"packets carry mixed config tags: {sorted(tags)}")
    if tags and tags != {config.config_tag}:
        raise ProtocolError(
            f"config tag 0x{tags.pop():04x} does not match stream tag 0x{config.config_tag:04x}")
    fpp = config.frames_per_packet
    if not packets and not count:
        return PcmSignal(np.zeros((0, config.channels)), config.sample_rate_hz,
                         missing=np.zeros(0, dtype=bool))
    if first_sequence is None:
        first_sequence = min(packets, key=lambda p: p.timestamp_frames).sequence if packets else 0
    slots: dict[int, AudioPacket] = {}
    for p in packets:
        if len(p.payload) != config.payload_bytes:
            raise ProtocolError(f"payload of {len(p.payload)} bytes, expected {config.payload_bytes}")
        pos = seq_distance(p.sequence, first_sequence)
        if pos < 0 or (count is not None and pos >= count):
            continue
        slots.setdefault(pos, p)
    n = count if count is not None else max(slots) + 1
    out = np.zeros((n * fpp, config.channels))
    missing = np.ones(n * fpp, dtype=bool)
    for pos, p in slots.items():
        out[pos * fpp:(pos + 1) * fpp] = decode_pcm(p.payload, config.bit_depth, config.channels)
        missing[pos * fpp:(pos + 1) * fpp] = False
    return PcmSignal(out, config.sample_rate_hz, missing=missing)


def serialize(packet: AudioPacket) -> bytes:
    return HEADER.pack(packet.sequence, packet.timestamp_frames, packet.config_tag, 0) + packet.payload


def deserialize(data: bytes) -> AudioPacket:
    if len(data) < HEADER_BYTES:
        raise DecodeError(f"datagram of {len(data)} bytes is shorter than the {HEADER_BYTES}-byte header")
    sequence, timestamp, tag, _reserved = HEADER.unpack_from(data)
    _, bit_depth, channels = decode_config_tag(tag)
    payload = bytes(data[HEADER_BYTES:])
    frame_bytes = channels * bit_depth // 8
    if len(payload) % frame_bytes:
        raise DecodeError(f"payload of {len(payload)} bytes is not a whole number of {frame_bytes}-byte frames")
    return AudioPacket(sequence, timestamp, tag, payload)


def stream_bitrate(config: StreamConfig) -> int:
    """Payload bitrate in bits/second (headers excluded)."""
    return config.sample_rate_hz * config.bit_depth * config.channels


def packet_interval(config: StreamConfig) -> float:
    """Time spanned by one packet's payload, in ms."""
    return config.frames_per_packet / config.sample_rate_hz * 1000.0


def config_for_tag(tag: int, frames_per_packet: int) -> StreamConfig:
    rate, depth, channels = decode_config_tag(tag)
    return StreamConfig(rate, depth, channels, frames_per_packet)

