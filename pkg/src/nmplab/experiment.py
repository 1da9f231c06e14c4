"""Experiment configs and batch runs.

A config is a JSON document::

    {
      "seed": 7,
      "output_dir": "out",                       # optional
      "profiles": ["pcm-jacktrip", {"preset": "conference-baseline", "processing_delay_ms": 130}],
      "network": {"preset": "wan-default", "loss_probability": 0.0},
      "sweep": {"loss_probability": {"start": 0, "stop": 0.03, "step": 0.005}},
      "signals": [{"kind": "noise", "duration_s": 5},
                  {"kind": "microtonal_scale"}],
      "stream": {"frames_per_packet": 128},
      "buffer": {"depth_packets": 4, "concealment": "RepeatLast"}
    }

``sweep`` maps numeric network fields to a list of values or a
start/stop/step range; several fields expand to their cartesian product.
Signal kinds are ``transient``, ``sustained``, ``microtonal_scale`` (a
quarter-tone panpipe scale unless ``cents_offsets`` is given) and ``noise``.

Per run the output directory receives ``<run>.session.json``,
``<run>.spectrum.json``, ``<run>.spectrum_{sent,received}.tsv``,
``<run>.trace.txt`` and, for scales, ``<run>.pitch.json``; ``summary.tsv``
holds one row per run.
"""
from __future__ import annotations

import itertools
import json
import os
import tempfile
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .analysis import (
    SignalKind,
    TestSignalSpec,
    generate,
    pitch_deviation,
    quarter_tone_scale,
    spectral_compare,
    white_noise,
)
from .errors import ConfigurationError
from .jitter import JitterBufferConfig
from .latency import classify
from .netem import NetworkConditions, network_preset
from .paths import PRESETS, PathProfile, run_session
from .stream import PcmSignal, StreamConfig

SWEEPABLE = ("uplink_bps", "downlink_bps", "loss_probability", "distance_m", "jitter_ms")
MAX_SWEEP_POINTS = 10_000

SUMMARY_COLUMNS = (
    "run_id", "profile", "signal", "uplink_bps", "downlink_bps", "loss_probability", "distance_m",
    "jitter_ms", "seed", "analytic_total_ms", "measured_one_way_ms", "mean_one_way_ms", "playability",
    "packets_sent", "packets_lost", "concealed", "dropped_late", "full_band_preserved",
    "max_pitch_deviation_cents", "notes_detected",
)


@dataclass(frozen=True)
class SignalEntry:
    name: str
    kind: str
    spec: TestSignalSpec | None = None
    duration_s: float = 5.0
    rms_dbfs: float = -20.0
    seed: int = 0


@dataclass
class ExperimentConfig:
    profiles: list[PathProfile]
    conditions: list[NetworkConditions]
    signals: list[SignalEntry]
    seed: int = 0
    stream: StreamConfig = field(default_factory=StreamConfig)
    buffer: JitterBufferConfig = field(default_factory=JitterBufferConfig)
    output_dir: str | None = None

    def __post_init__(self):
        if not self.profiles:
            raise ConfigurationError("an experiment needs at least one profile")
        if not self.signals:
            raise ConfigurationError("an experiment needs at least one signal")


def _profile(entry) -> PathProfile:
    if isinstance(entry, str):
        return PathProfile.preset(entry)
    entry = dict(entry)
    preset = entry.pop("preset", None)
    if preset is not None:
        return PathProfile.preset(preset, **entry)
    return PathProfile(**entry)


def _sweep_values(spec) -> list[float]:
    if isinstance(spec, list):
        return [float(v) for v in spec]
    start, stop, step = float(spec["start"]), float(spec["stop"]), float(spec["step"])
    if not step > 0 or stop < start:
        raise ConfigurationError(f"bad sweep range {spec}")
    count = int(round((stop - start) / step)) + 1
    if count > MAX_SWEEP_POINTS:
        raise ConfigurationError(f"sweep of {count} points exceeds {MAX_SWEEP_POINTS}")
    # round to kill accumulated float error (0.1 + 0.2 style)
    return [round(start + i * step, 12) for i in range(count)]


def _conditions(network: dict, sweep: dict, seed: int) -> list[NetworkConditions]:
    network = dict(network)
    network.setdefault("seed", seed)
    base = network_preset(network.pop("preset", "wan-default"), **network)
    unknown = set(sweep) - set(SWEEPABLE)
    if unknown:
        raise ConfigurationError(f"cannot sweep {sorted(unknown)}; sweepable: {SWEEPABLE}")
    axes = [[(k, v) for v in _sweep_values(sweep[k])] for k in sorted(sweep)]
    return [replace(base, **dict(point)) for point in itertools.product(*axes)] if axes else [base]


def _signal(entry: dict, index: int) -> SignalEntry:
    entry = dict(entry)
    kind = entry.pop("kind")
    name = entry.pop("name", f"{kind}{index}")
    if kind == "noise":
        return SignalEntry(name, kind, None, **entry)
    if kind == SignalKind.MICROTONAL_SCALE.value and "cents_offsets" not in entry:
        base = quarter_tone_scale(entry.pop("fundamental_hz", 440.0),
                                  note_duration_s=entry.pop("note_duration_s", 0.5))
        return SignalEntry(name, kind, replace(base, **entry))
    return SignalEntry(name, kind, TestSignalSpec(kind=kind, **entry))


def parse_config(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigurationError("config must be a JSON object")
    seed = int(doc.get("seed", 0))
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            conditions = _conditions(doc.get("network", {}), doc.get("sweep", {}), seed)
        return ExperimentConfig(
            profiles=[_profile(p) for p in doc.get("profiles", [])],
            conditions=conditions,
            signals=[_signal(s, i) for i, s in enumerate(doc.get("signals", []))],
            seed=seed,
            stream=StreamConfig(**doc.get("stream", {})),
            buffer=JitterBufferConfig(**doc.get("buffer", {})),
            output_dir=doc.get("output_dir"),
        )
    except (TypeError, KeyError) as exc:
        raise ConfigurationError(f"malformed config: {exc}") from exc


def load_config(path: str | os.PathLike) -> ExperimentConfig:
    with open(path, encoding="utf-8") as f:
        return parse_config(json.load(f))


def write_atomic(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def plot_tsv(rows) -> str:
    return "".join(f"{f!r}\t{db!r}\n" for f, db in rows)


def _dump(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def render_signal(entry: SignalEntry, stream: StreamConfig) -> PcmSignal:
    if entry.kind == "noise":
        return white_noise(entry.duration_s, stream, entry.rms_dbfs, entry.seed)
    return generate(entry.spec, stream)


def run_experiment(cfg: ExperimentConfig, out_dir: str | os.PathLike) -> list[dict]:
    """Run every profile x condition x signal combination and write reports."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    signals = [(entry, render_signal(entry, cfg.stream)) for entry in cfg.signals]
    rows = []
    n = 0
    for profile in cfg.profiles:
        for ci, cond in enumerate(cfg.conditions):
            for entry, sig in signals:
                run_id = f"{n:03d}_{profile.name}_{entry.name}_c{ci}"
                n += 1
                session = run_session(sig, profile, cond, cfg.stream, cfg.buffer)
                spectrum = spectral_compare(sig, session.received)
                pitch = None
                if entry.spec is not None and entry.spec.kind is SignalKind.MICROTONAL_SCALE:
                    pitch = pitch_deviation(session.received, entry.spec)

                session_doc = {**session.report(), "run_id": run_id, "signal": entry.name,
                               "playability": classify(session.measured_one_way_ms).value
                               if session.per_packet_ms.size else None}
                if entry.spec is not None:
                    session_doc["signal_spec"] = entry.spec.as_dict()
                write_atomic(out / f"{run_id}.session.json", _dump(session_doc))
                write_atomic(out / f"{run_id}.spectrum.json", _dump(spectrum.as_dict()))
                for which in ("sent", "received"):
                    write_atomic(out / f"{run_id}.spectrum_{which}.tsv", plot_tsv(spectrum.plot_rows(which)))
                write_atomic(out / f"{run_id}.trace.txt", session.trace.to_text())
                if pitch is not None:
                    write_atomic(out / f"{run_id}.pitch.json", _dump(pitch.as_dict()))

                stats = session.buffer_stats
                rows.append({
                    "run_id": run_id,
                    "profile": profile.name,
                    "signal": entry.name,
                    "uplink_bps": cond.uplink_bps,
                    "downlink_bps": cond.downlink_bps,
                    "loss_probability": cond.loss_probability,
                    "distance_m": cond.distance_m,
                    "jitter_ms": cond.jitter_ms,
                    "seed": cond.seed,
                    "analytic_total_ms": session.analytic_budget.total_ms,
                    "measured_one_way_ms": session.measured_one_way_ms,
                    "mean_one_way_ms": session.mean_one_way_ms,
                    "playability": session_doc["playability"],
                    "packets_sent": len(session.trace),
                    "packets_lost": session.trace.lost_count,
                    "concealed": stats.concealed,
                    "dropped_late": stats.dropped_late,
                    "full_band_preserved": spectrum.full_band_preserved,
                    "max_pitch_deviation_cents": pitch.max_abs_deviation_cents if pitch else None,
                    "notes_detected": pitch.detected_count if pitch else None,
                })
    write_atomic(out / "summary.tsv", summary_tsv(rows))
    return rows


def _cell(v) -> str:
    if v is None or (isinstance(v, float) and np.isnan(v)):
        return ""
    return repr(v) if isinstance(v, float) else str(v)


def summary_tsv(rows: list[dict]) -> str:
    lines = ["\t".join(SUMMARY_COLUMNS)]
    lines += ["\t".join(_cell(r[c]) for c in SUMMARY_COLUMNS) for r in rows]
    return "\n".join(lines) + "\n"


def default_experiment_config(seed: int = 1) -> dict:
    """Both path presets over the default network with loss disabled."""
    return {
        "seed": seed,
        "profiles": list(PRESETS),
        "network": {"preset": "wan-default", "loss_probability": 0.0},
        "signals": [
            {"kind": "noise", "name": "noise", "duration_s": 2.0},
            {"kind": "transient", "name": "transient", "duration_s": 0.5},
            {"kind": "sustained", "name": "sustained", "duration_s": 3.0,
             "harmonics": [1.0, 0.5, 0.3, 0.2]},
            {"kind": "microtonal_scale", "name": "panpipe"},
        ],
    }
