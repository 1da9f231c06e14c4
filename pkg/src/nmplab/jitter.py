"""Fixed-depth receive buffer with packet-loss concealment.

Playout is clocked externally: the owner calls :meth:`JitterBuffer.pop` once
per packet interval and always gets exactly one packet's worth of frames back,
either the next packet in sequence or a concealment block.
"""
from __future__ import annotations

import enum
import threading
from dataclasses import dataclass, replace

from .stream import SEQ_MODULUS, AudioPacket, StreamConfig, seq_distance


class Concealment(str, enum.Enum):
    ZERO_FILL = "ZeroFill"
    REPEAT_LAST = "RepeatLast"


class PushStatus(str, enum.Enum):
    ACCEPTED = "accepted"
    LATE = "late"
    # the buffer was full and the incoming packet was itself the oldest
    OVERFLOW = "overflow"
    DUPLICATE = "duplicate"


class Provenance(str, enum.Enum):
    ON_TIME = "on-time"
    CONCEALED = "concealed"


@dataclass(frozen=True)
class JitterBufferConfig:
    depth_packets: int = 4
    concealment: Concealment = Concealment.REPEAT_LAST
    # packets of extra playout delay a session adds before the first pop
    prefetch_packets: int = 0

    def __post_init__(self):
        if self.depth_packets < 1:
            raise ValueError(f"depth_packets must be >= 1, got {self.depth_packets}")
        if self.prefetch_packets < 0:
            raise ValueError(f"prefetch_packets must be >= 0, got {self.prefetch_packets}")
        object.__setattr__(self, "concealment", Concealment(self.concealment))


@dataclass(frozen=True)
class JitterBufferStats:
    received: int = 0
    delivered: int = 0
    concealed: int = 0
    dropped_late: int = 0
    overruns: int = 0
    underruns: int = 0

    @property
    def on_time(self) -> int:
        return self.delivered - self.concealed

    def as_dict(self) -> dict:
        return {
            "received": self.received,
            "delivered": self.delivered,
            "on_time": self.on_time,
            "concealed": self.concealed,
            "dropped_late": self.dropped_late,
            "overruns": self.overruns,
            "underruns": self.underruns,
        }


@dataclass(frozen=True)
class PlayoutBlock:
    payload: bytes
    provenance: Provenance
    sequence: int
    # time the packet spent queued; None for concealment
    residency_ms: float | None = None


class JitterBuffer:
    """Reordering buffer for one stream.

    Single producer (``push``), single consumer (``pop``); both may run on
    different threads.
    """

    def __init__(self, stream: StreamConfig, config: JitterBufferConfig | None = None,
                 start_sequence: int = 0):
        self.stream = stream
        self.config = config or JitterBufferConfig()
        self._head = start_sequence % SEQ_MODULUS
        self._slots: dict[int, tuple[AudioPacket, float]] = {}
        self._last_payload: bytes | None = None
        self._silence = bytes(stream.payload_bytes)
        self._stats = JitterBufferStats()
        self._lock = threading.Lock()

    @property
    def head(self) -> int:
        """Sequence number the next pop will play."""
        return self._head

    def __len__(self) -> int:
        return len(self._slots)

    def push(self, packet: AudioPacket, arrival_time_ms: float) -> PushStatus:
        with self._lock:
            st = self._stats
            st = replace(st, received=st.received + 1)
            if seq_distance(packet.sequence, self._head) < 0:
                self._stats = replace(st, dropped_late=st.dropped_late + 1)
                return PushStatus.LATE
            if packet.sequence in self._slots:
                self._stats = st
                return PushStatus.DUPLICATE
            self._slots[packet.sequence] = (packet, arrival_time_ms)
            status = PushStatus.ACCEPTED
            if len(self._slots) > self.config.depth_packets:
                oldest = min(self._slots, key=lambda s: seq_distance(s, self._head))
                del self._slots[oldest]
                self._head = (oldest + 1) % SEQ_MODULUS
                st = replace(st, overruns=st.overruns + 1)
                if oldest == packet.sequence:
                    status = PushStatus.OVERFLOW
            self._stats = st
            return status

    def pop(self, playout_time_ms: float) -> PlayoutBlock:
        with self._lock:
            seq = self._head
            self._head = (seq + 1) % SEQ_MODULUS
            st = self._stats
            entry = self._slots.pop(seq, None)
            if entry is not None:
                packet, arrival = entry
                self._last_payload = packet.payload
                self._stats = replace(st, delivered=st.delivered + 1)
                return PlayoutBlock(packet.payload, Provenance.ON_TIME, seq, playout_time_ms - arrival)
            if self.config.concealment is Concealment.REPEAT_LAST and self._last_payload is not None:
                payload = self._last_payload
            else:
                payload = self._silence
            self._stats = replace(st, delivered=st.delivered + 1, concealed=st.concealed + 1,
                                  underruns=st.underruns + 1)
            return PlayoutBlock(payload, Provenance.CONCEALED, seq)

    def stats(self) -> JitterBufferStats:
        with self._lock:
            return self._stats
