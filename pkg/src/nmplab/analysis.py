"""Test signals, octave-band spectral comparison, pitch accuracy and lag measurement."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sps

from .errors import DomainError, UnreliableMeasurementError
from .stream import PcmSignal, StreamConfig

FFT_WINDOW = 4096
FFT_HOP = 2048
FADE_S = 0.010
TRANSIENT_DECAY_S = 0.050
DETECTION_FLOOR_DBFS = -60.0
PRESERVATION_THRESHOLD_DB = -3.0

# Octave bands labelled by their lower edge, 31.25 Hz .. 16 kHz. The first
# band is stretched down to 20 Hz and the last one stops at 20 kHz so the ten
# bands tile 20 Hz - 20 kHz exactly.
BAND_LABELS_HZ = tuple(31.25 * 2 ** k for k in range(10))
BAND_EDGES_HZ = (20.0,) + BAND_LABELS_HZ[1:] + (20000.0,)

_POWER_FLOOR = 1e-20


class SignalKind(str, enum.Enum):
    TRANSIENT = "transient"
    SUSTAINED = "sustained"
    MICROTONAL_SCALE = "microtonal_scale"


@dataclass(frozen=True)
class TestSignalSpec:
    __test__ = False  # not a pytest class

    kind: SignalKind
    fundamental_hz: float = 440.0
    duration_s: float | None = None
    # relative amplitude of partial n+1 (index 0 is the fundamental)
    harmonics: tuple[float, ...] = (1.0,)
    cents_offsets: tuple[float, ...] = ()
    note_duration_s: float = 0.5
    amplitude: float = 0.5
    noise_floor_dbfs: float | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", SignalKind(self.kind))
        object.__setattr__(self, "harmonics", tuple(float(h) for h in self.harmonics))
        object.__setattr__(self, "cents_offsets", tuple(float(c) for c in self.cents_offsets))
        if self.duration_s is None and self.kind is not SignalKind.MICROTONAL_SCALE:
            default = 0.5 if self.kind is SignalKind.TRANSIENT else 3.0
            object.__setattr__(self, "duration_s", default)
        if not self.fundamental_hz > 0:
            raise DomainError(f"fundamental_hz must be positive, got {self.fundamental_hz}")
        if not 0 < self.amplitude <= 1:
            raise DomainError(f"amplitude must be in (0, 1], got {self.amplitude}")
        if self.kind is SignalKind.TRANSIENT:
            if not 0 < self.duration_s < 1.0:
                raise DomainError(f"a transient lasts under 1 s, got {self.duration_s}")
        elif self.kind is SignalKind.SUSTAINED:
            if not 3.0 <= self.duration_s <= 5.0:
                raise DomainError(f"a sustained note lasts 3-5 s, got {self.duration_s}")
        else:
            if not self.cents_offsets:
                raise DomainError("a scale needs at least one note")
            if not all(math.isfinite(c) for c in self.cents_offsets):
                raise DomainError("cent offsets must be finite")
            if not self.note_duration_s > 4 * FADE_S:
                raise DomainError(f"note_duration_s too short: {self.note_duration_s}")
            if self.duration_s is not None and not math.isclose(self.duration_s, self.total_duration_s):
                raise DomainError("duration_s of a scale is fixed by its notes")

    @property
    def total_duration_s(self) -> float:
        if self.kind is SignalKind.MICROTONAL_SCALE:
            return len(self.cents_offsets) * self.note_duration_s
        return self.duration_s

    def note_frequencies(self) -> list[float]:
        return [self.fundamental_hz * 2 ** (c / 1200) for c in self.cents_offsets]

    def note_bounds(self, sample_rate_hz: int) -> list[tuple[int, int]]:
        n = int(round(self.note_duration_s * sample_rate_hz))
        return [(i * n, (i + 1) * n) for i in range(len(self.cents_offsets))]

    def as_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "fundamental_hz": self.fundamental_hz,
            "duration_s": self.total_duration_s,
            "harmonics": list(self.harmonics),
            "cents_offsets": list(self.cents_offsets),
            "note_duration_s": self.note_duration_s,
            "amplitude": self.amplitude,
            "noise_floor_dbfs": self.noise_floor_dbfs,
            "seed": self.seed,
        }


# Panpipe stand-in: strong odd partials over a breathy floor.
PANPIPE_HARMONICS = (1.0, 0.05, 0.45, 0.03, 0.25, 0.02, 0.12)
PANPIPE_NOISE_DBFS = -40.0


def quarter_tone_scale(base_hz: float = 440.0, notes: int = 12, note_duration_s: float = 0.5,
                       seed: int = 0) -> TestSignalSpec:
    return TestSignalSpec(
        SignalKind.MICROTONAL_SCALE, base_hz,
        harmonics=PANPIPE_HARMONICS,
        cents_offsets=tuple(50.0 * i for i in range(notes)),
        note_duration_s=note_duration_s,
        noise_floor_dbfs=PANPIPE_NOISE_DBFS,
        seed=seed,
    )


def _fade(n: int, sample_rate: int) -> np.ndarray:
    env = np.ones(n)
    k = min(int(round(FADE_S * sample_rate)), n // 2)
    if k:
        ramp = np.linspace(0.0, 1.0, k, endpoint=False)
        env[:k] = ramp
        env[n - k:] = ramp[::-1]
    return env


def _tone(freq: float, harmonics: tuple[float, ...], n: int, sample_rate: int) -> np.ndarray:
    t = np.arange(n) / sample_rate
    out = np.zeros(n)
    for h, a in enumerate(harmonics, start=1):
        if a and h * freq < sample_rate / 2:
            out += a * np.sin(2 * np.pi * h * freq * t)
    peak = np.max(np.abs(out)) if n else 0.0
    return out / peak if peak > 0 else out


def generate(spec: TestSignalSpec, config: StreamConfig | None = None) -> PcmSignal:
    """Deterministic synthesis of one test signal, same content on every channel."""
    config = config or StreamConfig()
    fs = config.sample_rate_hz
    if spec.kind is SignalKind.MICROTONAL_SCALE:
        top = max(spec.note_frequencies())
    else:
        top = spec.fundamental_hz
    if top >= fs / 2:
        raise DomainError(f"fundamental {top:.2f} Hz is not below Nyquist ({fs / 2} Hz)")
    rng = np.random.default_rng(spec.seed)

    if spec.kind is SignalKind.TRANSIENT:
        n = int(round(spec.duration_s * fs))
        t = np.arange(n) / fs
        burst = rng.standard_normal(n) * np.exp(-t / TRANSIENT_DECAY_S)
        mono = spec.amplitude * burst / np.max(np.abs(burst))
    elif spec.kind is SignalKind.SUSTAINED:
        n = int(round(spec.duration_s * fs))
        mono = spec.amplitude * _tone(spec.fundamental_hz, spec.harmonics, n, fs) * _fade(n, fs)
    else:
        n_note = int(round(spec.note_duration_s * fs))
        notes = [_tone(f, spec.harmonics, n_note, fs) * _fade(n_note, fs) for f in spec.note_frequencies()]
        mono = spec.amplitude * np.concatenate(notes)
        n = mono.size

    if spec.noise_floor_dbfs is not None:
        mono = mono + 10 ** (spec.noise_floor_dbfs / 20) * rng.standard_normal(n)
    mono = np.clip(mono, -1.0, 1.0)
    return PcmSignal(np.repeat(mono[:, None], config.channels, axis=1), fs)


def white_noise(duration_s: float, config: StreamConfig | None = None, rms_dbfs: float = -20.0,
                seed: int = 0) -> PcmSignal:
    """Gaussian broadband noise, independent per channel."""
    config = config or StreamConfig()
    if not duration_s > 0:
        raise DomainError(f"duration must be positive, got {duration_s}")
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * config.sample_rate_hz))
    x = 10 ** (rms_dbfs / 20) * rng.standard_normal((n, config.channels))
    return PcmSignal(np.clip(x, -1.0, 1.0), config.sample_rate_hz)


# -- spectra ---------------------------------------------------------------

def _frames(x: np.ndarray) -> np.ndarray:
    if x.size < FFT_WINDOW:
        x = np.pad(x, (0, FFT_WINDOW - x.size))
    n_frames = 1 + (x.size - FFT_WINDOW) // FFT_HOP
    idx = np.arange(FFT_WINDOW)[None, :] + FFT_HOP * np.arange(n_frames)[:, None]
    return x[idx]


def power_spectrogram(samples: np.ndarray, sample_rate: int) -> tuple[np.ndarray, np.ndarray]:
    """One-sided power per bin and frame, scaled so a frame's bins sum to its mean square.

    Returns ``(freqs, power)`` with ``power`` shaped ``(frames, bins)``.
    """
    w = sps.get_window("hann", FFT_WINDOW)
    spec = np.fft.rfft(_frames(np.asarray(samples, dtype=float)) * w, axis=1)
    power = np.abs(spec) ** 2 / (FFT_WINDOW * np.sum(w ** 2))
    power[:, 1:-1] *= 2
    return np.fft.rfftfreq(FFT_WINDOW, 1 / sample_rate), power


def mean_power_spectrum(sig: PcmSignal) -> tuple[np.ndarray, np.ndarray]:
    """Power spectrum averaged over frames and channels."""
    acc = None
    for ch in range(sig.channels):
        freqs, p = power_spectrogram(sig.samples[:, ch], sig.sample_rate_hz)
        acc = p.mean(axis=0) if acc is None else acc + p.mean(axis=0)
    return freqs, acc / sig.channels


def band_powers(freqs: np.ndarray, power: np.ndarray) -> np.ndarray:
    out = np.empty(len(BAND_LABELS_HZ))
    for i, (lo, hi) in enumerate(zip(BAND_EDGES_HZ[:-1], BAND_EDGES_HZ[1:])):
        out[i] = power[(freqs >= lo) & (freqs < hi)].sum()
    return out


def to_db(power) -> np.ndarray:
    return 10 * np.log10(np.maximum(power, _POWER_FLOOR))


@dataclass
class SpectralReport:
    band_lower_hz: tuple[float, ...]
    band_upper_hz: tuple[float, ...]
    sent_db: np.ndarray
    received_db: np.ndarray
    delta_db: np.ndarray
    sent_peak_hz: np.ndarray
    received_peak_hz: np.ndarray
    threshold_db: float = PRESERVATION_THRESHOLD_DB
    freqs_hz: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)
    sent_spectrum_db: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)
    received_spectrum_db: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)

    @property
    def band_labels_hz(self) -> tuple[float, ...]:
        return BAND_LABELS_HZ

    @property
    def full_band_preserved(self) -> bool:
        return bool(np.all(self.delta_db >= self.threshold_db))

    def delta_at(self, label_hz: float) -> float:
        return float(self.delta_db[BAND_LABELS_HZ.index(label_hz)])

    def as_dict(self) -> dict:
        return {
            "bands": [
                {"label_hz": lab, "lower_hz": lo, "upper_hz": hi,
                 "sent_db": float(s), "received_db": float(r), "delta_db": float(d)}
                for lab, lo, hi, s, r, d in zip(BAND_LABELS_HZ, self.band_lower_hz, self.band_upper_hz,
                                                self.sent_db, self.received_db, self.delta_db)
            ],
            "threshold_db": self.threshold_db,
            "full_band_preserved": self.full_band_preserved,
            "sent_peak_hz": [float(f) for f in self.sent_peak_hz],
            "received_peak_hz": [float(f) for f in self.received_peak_hz],
        }

    def plot_rows(self, which: str = "received") -> list[tuple[float, float]]:
        """Two-column (frequency Hz, dB) data for one averaged spectrum."""
        db = self.received_spectrum_db if which == "received" else self.sent_spectrum_db
        return list(zip(self.freqs_hz.tolist(), db.tolist()))


def _frame_peaks(sig: PcmSignal) -> np.ndarray:
    freqs, p = power_spectrogram(sig.mono(), sig.sample_rate_hz)
    return freqs[np.argmax(p, axis=1)]


def spectral_compare(sent: PcmSignal, received: PcmSignal,
                     threshold_db: float = PRESERVATION_THRESHOLD_DB) -> SpectralReport:
    if sent.sample_rate_hz != received.sample_rate_hz:
        raise DomainError(f"sample rates differ: {sent.sample_rate_hz} vs {received.sample_rate_hz}")
    if received.frames < sent.frames:
        raise DomainError("received signal is shorter than the sent signal")
    received = PcmSignal(received.samples[: sent.frames], received.sample_rate_hz)
    freqs, p_sent = mean_power_spectrum(sent)
    _, p_recv = mean_power_spectrum(received)
    sent_db = to_db(band_powers(freqs, p_sent))
    recv_db = to_db(band_powers(freqs, p_recv))
    return SpectralReport(
        band_lower_hz=BAND_EDGES_HZ[:-1],
        band_upper_hz=BAND_EDGES_HZ[1:],
        sent_db=sent_db,
        received_db=recv_db,
        delta_db=recv_db - sent_db,
        sent_peak_hz=_frame_peaks(sent),
        received_peak_hz=_frame_peaks(received),
        threshold_db=threshold_db,
        freqs_hz=freqs,
        sent_spectrum_db=to_db(p_sent),
        received_spectrum_db=to_db(p_recv),
    )


# -- pitch -----------------------------------------------------------------

def cents(ratio: float) -> float:
    return 1200.0 * math.log2(ratio)


@dataclass(frozen=True)
class NotePitch:
    index: int
    intended_hz: float
    estimated_hz: float | None
    level_dbfs: float

    @property
    def detected(self) -> bool:
        return self.estimated_hz is not None

    @property
    def deviation_cents(self) -> float | None:
        if self.estimated_hz is None:
            return None
        return cents(self.estimated_hz / self.intended_hz)


@dataclass(frozen=True)
class PitchReport:
    notes: tuple[NotePitch, ...]

    @property
    def detected_count(self) -> int:
        return sum(n.detected for n in self.notes)

    @property
    def max_abs_deviation_cents(self) -> float:
        devs = [abs(n.deviation_cents) for n in self.notes if n.detected]
        return max(devs) if devs else math.nan

    def as_dict(self) -> dict:
        return {
            "notes": [
                {"index": n.index, "intended_hz": n.intended_hz, "estimated_hz": n.estimated_hz,
                 "deviation_cents": n.deviation_cents, "level_dbfs": n.level_dbfs,
                 "detected": n.detected}
                for n in self.notes
            ],
            "detected": self.detected_count,
            "max_abs_deviation_cents": None if math.isnan(self.max_abs_deviation_cents)
            else self.max_abs_deviation_cents,
        }


def estimate_peak(x: np.ndarray, sample_rate: int, lo_hz: float, hi_hz: float) -> tuple[float, float]:
    """Strongest sinusoid between ``lo_hz`` and ``hi_hz``: ``(frequency, amplitude)``.

    Hann window, 4x zero-padding, parabolic interpolation on log magnitude.
    """
    w = np.hanning(x.size)
    nfft = 1 << (int(math.ceil(math.log2(max(x.size, 2)))) + 2)
    mag = np.abs(np.fft.rfft(x * w, nfft)) * 2 / w.sum()
    freqs = np.fft.rfftfreq(nfft, 1 / sample_rate)
    band = np.flatnonzero((freqs >= lo_hz) & (freqs <= hi_hz))
    k = band[np.argmax(mag[band])]
    if 0 < k < mag.size - 1 and mag[k] > 0:
        a, b, c = np.log(np.maximum(mag[k - 1:k + 2], 1e-300))
        denom = a - 2 * b + c
        delta = 0.5 * (a - c) / denom if denom != 0 else 0.0
        peak_log = b - 0.25 * (a - c) * delta
        return (k + delta) * sample_rate / nfft, float(np.exp(peak_log))
    return freqs[k], float(mag[k])


def pitch_deviation(received: PcmSignal, spec: TestSignalSpec, offset_frames: int = 0,
                    floor_dbfs: float = DETECTION_FLOOR_DBFS) -> PitchReport:
    """Per-note pitch error of a received scale against the intended notes.

    ``offset_frames`` shifts the expected note grid (e.g. for a received signal
    on the sender's timeline).
    """
    if spec.kind is not SignalKind.MICROTONAL_SCALE:
        raise DomainError("pitch_deviation needs a microtonal scale spec")
    fs = received.sample_rate_hz
    mono = received.mono()
    notes = []
    for i, ((s, e), f) in enumerate(zip(spec.note_bounds(fs), spec.note_frequencies())):
        # analyse the steady middle of the note, away from the fades
        margin = (e - s) // 10
        seg = mono[offset_frames + s + margin: offset_frames + e - margin]
        if seg.size < 64:
            notes.append(NotePitch(i, f, None, -math.inf))
            continue
        est, amp = estimate_peak(seg, fs, f * 2 ** -0.5, min(f * 2 ** 0.5, fs / 2))
        level = 20 * math.log10(amp) if amp > 0 else -math.inf
        notes.append(NotePitch(i, f, est if level > floor_dbfs else None, level))
    return PitchReport(tuple(notes))


# -- latency ---------------------------------------------------------------

MIN_CORRELATION = 0.5


def measure_latency_xcorr(sent: PcmSignal, received: PcmSignal, sample_rate: int | None = None,
                          min_correlation: float = MIN_CORRELATION) -> float:
    """Lag of ``received`` behind ``sent`` in ms, from the normalized cross-correlation peak."""
    fs = sample_rate or sent.sample_rate_hz
    a = sent.mono()
    b = received.mono()
    norm = np.linalg.norm(a) * np.linalg.norm(b)
    if norm == 0:
        raise UnreliableMeasurementError("cannot correlate a silent signal")
    corr = sps.correlate(b, a, mode="full", method="fft") / norm
    lags = sps.correlation_lags(b.size, a.size, mode="full")
    k = int(np.argmax(corr))
    if corr[k] < min_correlation:
        raise UnreliableMeasurementError(
            f"correlation peak {corr[k]:.3f} is below {min_correlation}")
    return lags[k] * 1000.0 / fs
