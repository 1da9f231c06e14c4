"""Low-latency uncompressed audio streaming and a deterministic network lab.

The package is split along the pipeline:

- ``latency``   closed-form one-way delay budgets and playability classes
- ``stream``    PCM packetization, the 16-byte datagram header, bitrates
- ``wavio``     RIFF/WAVE PCM read/write
- ``jitter``    fixed-depth receive buffer with loss concealment
- ``rng``       the specified splitmix64/xoshiro256** generator
- ``netem``     discrete-event model of a constrained network path
- ``paths``     end-to-end PCM and conference-baseline sessions
- ``analysis``  test signals, octave-band comparison, pitch and lag measurement
- ``cli``       the ``nmplab`` command
"""

from .errors import (
    ConfigurationError,
    DecodeError,
    DomainError,
    NmpLabError,
    ProtocolError,
    UnreliableMeasurementError,
)
from .latency import (
    LatencyBudget,
    LinkParams,
    PlayabilityClass,
    classify,
    propagation_delay,
    total_latency,
    transmission_delay,
)
from .stream import (
    AudioPacket,
    PcmSignal,
    StreamConfig,
    depacketize,
    deserialize,
    packet_interval,
    packetize,
    serialize,
    stream_bitrate,
)
from .jitter import JitterBuffer, JitterBufferConfig, JitterBufferStats, Concealment
from .netem import NetworkConditions, DeliveryEvent, EventTrace, transmit, replay, empirical_loss_rate
from .paths import PathProfile, SessionResult, run_session, apply_codec_model, analytic_budget_for

__version__ = "0.1.0"

__all__ = [
    "AudioPacket",
    "Concealment",
    "ConfigurationError",
    "DecodeError",
    "DeliveryEvent",
    "DomainError",
    "EventTrace",
    "JitterBuffer",
    "JitterBufferConfig",
    "JitterBufferStats",
    "LatencyBudget",
    "LinkParams",
    "NetworkConditions",
    "NmpLabError",
    "PathProfile",
    "PcmSignal",
    "PlayabilityClass",
    "ProtocolError",
    "SessionResult",
    "StreamConfig",
    "UnreliableMeasurementError",
    "analytic_budget_for",
    "apply_codec_model",
    "classify",
    "depacketize",
    "deserialize",
    "empirical_loss_rate",
    "packet_interval",
    "packetize",
    "propagation_delay",
    "replay",
    "run_session",
    "serialize",
    "stream_bitrate",
    "total_latency",
    "transmission_delay",
    "transmit",
]
