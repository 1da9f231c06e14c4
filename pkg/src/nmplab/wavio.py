"""RIFF/WAVE PCM I/O on top of the stdlib ``wave`` module."""
from __future__ import annotations

import os
import wave

from .errors import ConfigurationError
from .stream import PcmSignal, decode_pcm, encode_pcm


def read_wav(path: str | os.PathLike) -> tuple[PcmSignal, int]:
    """Return the signal and its bit depth."""
    with wave.open(os.fspath(path), "rb") as w:
        width = w.getsampwidth()
        if width not in (2, 3, 4):
            raise ConfigurationError(f"{path}: unsupported sample width of {width} bytes")
        channels = w.getnchannels()
        data = w.readframes(w.getnframes())
        rate = w.getframerate()
    bit_depth = width * 8
    return PcmSignal(decode_pcm(data, bit_depth, channels), rate), bit_depth


def write_wav(path: str | os.PathLike, signal: PcmSignal, bit_depth: int = 16) -> None:
    if bit_depth not in (16, 24, 32):
        raise ConfigurationError(f"unsupported bit depth {bit_depth}")
    with wave.open(os.fspath(path), "wb") as w:
        w.setnchannels(signal.channels)
        w.setsampwidth(bit_depth // 8)
        w.setframerate(signal.sample_rate_hz)
        w.writeframes(encode_pcm(signal.samples, bit_depth))
