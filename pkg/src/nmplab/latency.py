"""One-way latency budgets: transmission + propagation + processing.

All public values are milliseconds.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import DomainError

FIBER_SPEED_MPS = 2e8

# Upper bounds (exclusive) of the faster classes, in ms.
DEFAULT_THRESHOLDS_MS = (30.0, 50.0)


class PlayabilityClass(str, enum.Enum):
    REAL_TIME_ENSEMBLE = "RealTimeEnsemble"
    PLAYABLE = "Playable"
    DEGRADED = "Degraded"


@dataclass(frozen=True)
class LinkParams:
    packet_size_bits: int
    bandwidth_bps: float
    distance_m: float
    propagation_speed_mps: float = FIBER_SPEED_MPS
    processing_delay_ms: float = 0.0

    def __post_init__(self):
        if self.packet_size_bits < 0:
            raise DomainError(f"packet_size_bits must be >= 0, got {self.packet_size_bits}")
        if not self.bandwidth_bps > 0:
            raise DomainError(f"bandwidth_bps must be > 0, got {self.bandwidth_bps}")
        if self.distance_m < 0:
            raise DomainError(f"distance_m must be >= 0, got {self.distance_m}")
        if not self.propagation_speed_mps > 0:
            raise DomainError(f"propagation_speed_mps must be > 0, got {self.propagation_speed_mps}")
        if not self.processing_delay_ms >= 0:
            raise DomainError(f"processing_delay_ms must be >= 0, got {self.processing_delay_ms}")


@dataclass(frozen=True)
class LatencyBudget:
    transmission_ms: float
    propagation_ms: float
    processing_ms: float
    total_ms: float

    @classmethod
    def from_components(cls, transmission_ms: float, propagation_ms: float,
                        processing_ms: float) -> "LatencyBudget":
        return cls(transmission_ms, propagation_ms, processing_ms,
                   transmission_ms + propagation_ms + processing_ms)

    def as_dict(self) -> dict:
        return {
            "transmission_ms": self.transmission_ms,
            "propagation_ms": self.propagation_ms,
            "processing_ms": self.processing_ms,
            "total_ms": self.total_ms,
        }


def transmission_delay(packet_size_bits: float, bandwidth_bps: float) -> float:
    """Serialization time of one packet, in ms."""
    if not bandwidth_bps > 0:
        raise DomainError(f"bandwidth must be positive, got {bandwidth_bps}")
    if packet_size_bits < 0:
        raise DomainError(f"packet size must be non-negative, got {packet_size_bits}")
    return packet_size_bits / bandwidth_bps * 1000.0


def propagation_delay(distance_m: float, propagation_speed_mps: float = FIBER_SPEED_MPS) -> float:
    """Time of flight over ``distance_m``, in ms."""
    if not propagation_speed_mps > 0:
        raise DomainError(f"propagation speed must be positive, got {propagation_speed_mps}")
    if distance_m < 0:
        raise DomainError(f"distance must be non-negative, got {distance_m}")
    return distance_m / propagation_speed_mps * 1000.0


def total_latency(params: LinkParams) -> LatencyBudget:
    return LatencyBudget.from_components(
        transmission_delay(params.packet_size_bits, params.bandwidth_bps),
        propagation_delay(params.distance_m, params.propagation_speed_mps),
        float(params.processing_delay_ms),
    )


def classify(budget: LatencyBudget | float,
             thresholds: tuple[float, float] = DEFAULT_THRESHOLDS_MS) -> PlayabilityClass:
    """Map a total one-way latency to a playability class.

    A total equal to a threshold falls into the slower class, so the default
    thresholds read as "under 30 ms" and "under 50 ms".
    """
    total = budget.total_ms if isinstance(budget, LatencyBudget) else float(budget)
    ensemble, playable = thresholds
    if not (math.isfinite(ensemble) and ensemble < playable):
        raise DomainError(f"thresholds must be strictly increasing, got {thresholds}")
    if total < ensemble:
        return PlayabilityClass.REAL_TIME_ENSEMBLE
    if total < playable:
        return PlayabilityClass.PLAYABLE
    return PlayabilityClass.DEGRADED
