"""Deterministic discrete-event model of one constrained network path.

Per packet, in send order, two uniforms are drawn from :class:`Xoshiro256`
(loss first, then jitter) whether or not either is used, so a trace depends
only on the packet count, the conditions and the seed.

A surviving packet waits for the link (FIFO), is serialized at the direction's
bandwidth, then travels ``distance / speed`` plus a jitter term. Jitter is
drawn uniform on ``[-jitter_ms, +jitter_ms]`` and clamped at zero so no packet
ever beats the serialization + propagation floor.
"""
from __future__ import annotations

import io
import json
import math
import os
import warnings
from dataclasses import asdict, dataclass, replace
from typing import Sequence

from .errors import ConfigurationError, DomainError
from .latency import FIBER_SPEED_MPS, propagation_delay, transmission_delay
from .rng import MASK64, Xoshiro256
from .stream import AudioPacket

PAPER_LOSS_RANGE = (0.0, 0.03)
TRACE_MAGIC = "# nmplab-trace v1"


@dataclass(frozen=True)
class NetworkConditions:
    uplink_bps: float = 5e6
    downlink_bps: float = 10e6
    loss_probability: float = 0.01
    distance_m: float = 1e6
    jitter_ms: float = 0.0
    seed: int = 0
    propagation_speed_mps: float = FIBER_SPEED_MPS
    include_header_bits: bool = True
    # radio-style loss by default: a lost packet never occupies the link
    lost_packets_use_link: bool = False

    def __post_init__(self):
        if not (self.uplink_bps > 0 and self.downlink_bps > 0):
            raise ConfigurationError("bandwidths must be positive")
        if not 0.0 <= self.loss_probability <= 1.0:
            raise ConfigurationError(f"loss_probability must be in [0, 1], got {self.loss_probability}")
        if self.loss_probability > PAPER_LOSS_RANGE[1]:
            warnings.warn(f"loss_probability {self.loss_probability} is outside the 0-3% range "
                          "used for the reference experiments", stacklevel=3)
        if not self.distance_m >= 0:
            raise ConfigurationError(f"distance_m must be >= 0, got {self.distance_m}")
        if not self.jitter_ms >= 0:
            raise ConfigurationError(f"jitter_ms must be >= 0, got {self.jitter_ms}")
        if not self.propagation_speed_mps > 0:
            raise ConfigurationError("propagation speed must be positive")
        if not (isinstance(self.seed, int) and 0 <= self.seed <= MASK64):
            raise ConfigurationError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")

    def bandwidth(self, direction: str) -> float:
        if direction == "uplink":
            return self.uplink_bps
        if direction == "downlink":
            return self.downlink_bps
        raise ConfigurationError(f"direction must be 'uplink' or 'downlink', got {direction!r}")

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class DeliveryEvent:
    index: int
    sequence: int
    send_time_ms: float
    delivery_time_ms: float | None  # None when lost
    serialization_ms: float = 0.0
    propagation_ms: float = 0.0
    jitter_ms: float = 0.0
    queueing_ms: float = 0.0

    @property
    def lost(self) -> bool:
        return self.delivery_time_ms is None

    @property
    def status(self) -> str:
        return "LOST" if self.lost else "DELIVERED"

    @property
    def serialization_start_ms(self) -> float:
        return self.send_time_ms + self.queueing_ms


@dataclass(frozen=True)
class EventTrace:
    events: tuple[DeliveryEvent, ...]
    conditions: NetworkConditions
    direction: str = "uplink"

    @property
    def seed(self) -> int:
        return self.conditions.seed

    def __len__(self) -> int:
        return len(self.events)

    @property
    def lost_count(self) -> int:
        return sum(e.lost for e in self.events)

    def to_text(self) -> str:
        buf = io.StringIO()
        meta = {"direction": self.direction, "conditions": self.conditions.as_dict()}
        buf.write(f"{TRACE_MAGIC} {json.dumps(meta, sort_keys=True)}\n")
        for e in self.events:
            delivery = "-" if e.lost else repr(e.delivery_time_ms)
            buf.write("\t".join([str(e.index), str(e.sequence), repr(e.send_time_ms), e.status, delivery,
                                 repr(e.serialization_ms), repr(e.propagation_ms), repr(e.jitter_ms),
                                 repr(e.queueing_ms)]) + "\n")
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str) -> "EventTrace":
        lines = text.splitlines()
        if not lines or not lines[0].startswith(TRACE_MAGIC):
            raise ValueError("not an nmplab event trace")
        meta = json.loads(lines[0][len(TRACE_MAGIC):])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            conditions = NetworkConditions(**meta["conditions"])
        events = []
        for line in lines[1:]:
            if not line.strip():
                continue
            idx, seq, send, status, delivery, ser, prop, jit, queue = line.split("\t")
            events.append(DeliveryEvent(
                index=int(idx), sequence=int(seq), send_time_ms=float(send),
                delivery_time_ms=None if status == "LOST" else float(delivery),
                serialization_ms=float(ser), propagation_ms=float(prop),
                jitter_ms=float(jit), queueing_ms=float(queue)))
        return cls(tuple(events), conditions, meta["direction"])

    def dump(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(self.to_text())

    @classmethod
    def load(cls, path: str | os.PathLike) -> "EventTrace":
        with open(path, encoding="utf-8") as f:
            return cls.from_text(f.read())


NETWORK_PRESETS = {
    "wan-default": NetworkConditions(),
    "rural-3g": NetworkConditions(uplink_bps=5e6, downlink_bps=10e6, loss_probability=0.03),
    "rural-4g": NetworkConditions(uplink_bps=10e6, downlink_bps=50e6, loss_probability=0.01),
    "ideal": NetworkConditions(uplink_bps=1e9, downlink_bps=1e9, loss_probability=0.0, distance_m=0.0),
}


def network_preset(name: str, **overrides) -> NetworkConditions:
    try:
        base = NETWORK_PRESETS[name]
    except KeyError:
        raise ConfigurationError(f"unknown network preset {name!r}; choose from {sorted(NETWORK_PRESETS)}") from None
    return replace(base, **overrides)


def transmit(packets: Sequence[AudioPacket], send_times_ms: Sequence[float],
             conditions: NetworkConditions, direction: str = "uplink") -> EventTrace:
    if len(packets) != len(send_times_ms):
        raise ConfigurationError("one send time is required per packet")
    bandwidth = conditions.bandwidth(direction)
    prop = propagation_delay(conditions.distance_m, conditions.propagation_speed_mps)
    rng = Xoshiro256(conditions.seed)
    p_loss = conditions.loss_probability
    j = conditions.jitter_ms

    events = []
    link_free_at = -math.inf
    last_send = -math.inf
    for i, (packet, send) in enumerate(zip(packets, send_times_ms)):
        if send < last_send:
            raise ConfigurationError(f"send times must be non-decreasing (packet {i})")
        last_send = send
        u_loss = rng.uniform()
        u_jitter = rng.uniform()
        size = packet.wire_bytes if conditions.include_header_bits else len(packet.payload)
        ser = transmission_delay(size * 8, bandwidth)
        lost = u_loss < p_loss
        start = max(send, link_free_at)
        if lost:
            if conditions.lost_packets_use_link:
                link_free_at = start + ser
            events.append(DeliveryEvent(i, packet.sequence, send, None, ser, prop, 0.0, start - send))
            continue
        link_free_at = start + ser
        jitter = max(0.0, -j + 2.0 * j * u_jitter)
        events.append(DeliveryEvent(i, packet.sequence, send, link_free_at + prop + jitter,
                                    ser, prop, jitter, start - send))
    return EventTrace(tuple(events), conditions, direction)


def replay(trace: EventTrace, packets: Sequence[AudioPacket] | None = None) -> list[tuple]:
    """Arrivals as ``(packet, arrival_ms)`` in delivery order, lost packets skipped.

    Without ``packets`` the first element is the event's input index.
    """
    delivered = sorted((e for e in trace.events if not e.lost),
                       key=lambda e: (e.delivery_time_ms, e.index))
    if packets is None:
        return [(e.index, e.delivery_time_ms) for e in delivered]
    return [(packets[e.index], e.delivery_time_ms) for e in delivered]


def empirical_loss_rate(trace: EventTrace) -> float:
    if not trace.events:
        raise DomainError("loss rate of an empty trace is undefined")
    return trace.lost_count / len(trace.events)
