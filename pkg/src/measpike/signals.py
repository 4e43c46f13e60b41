"""High-pass filtering and threshold spike detection for MEA recordings.

The acquisition chain this reproduces: raw 10 kHz voltage traces are
high-passed with a 2nd-order Butterworth biquad (200 Hz cutoff, bilinear
transform with frequency prewarping), then spikes are detected wherever the
absolute filtered voltage exceeds k times a trailing-window standard
deviation (k = 8 by default, 500 ms window).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .bundle import load_bundle, save_bundle
from .dataset import CANONICAL_FEATURE_NAMES, ClassLabel, FeatureTable, N_CHANNELS


@dataclass(frozen=True)
class BiquadCoefficients:
    """Normalized biquad (a0 = 1): y[n] = b0 x[n] + b1 x[n-1] + b2 x[n-2] - a1 y[n-1] - a2 y[n-2]."""

    b0: float
    b1: float
    b2: float
    a1: float
    a2: float

    def poles(self) -> np.ndarray:
        return np.roots([1.0, self.a1, self.a2])

    def numerator(self) -> np.ndarray:
        return np.array([self.b0, self.b1, self.b2])

    def denominator(self) -> np.ndarray:
        return np.array([1.0, self.a1, self.a2])


def design_highpass_butterworth(
    order: int = 2, fc_hz: float = 200.0, fs_hz: float = 10000.0
) -> BiquadCoefficients:
    """Design the 2nd-order high-pass Butterworth biquad.

    The analog prototype s^2 / (s^2 + sqrt(2) wc s + wc^2) is discretized by
    the bilinear transform with the cutoff prewarped, so the digital -3 dB
    point lands exactly on fc_hz. DC gain is 0 and Nyquist gain is 1.
    """
    if order != 2:
        raise ValueError(f"only order 2 is supported, got {order}")
    if not 0.0 < fc_hz < fs_hz / 2.0:
        raise ValueError(f"cutoff {fc_hz} Hz must lie in (0, Nyquist={fs_hz / 2.0} Hz)")
    c = math.tan(math.pi * fc_hz / fs_hz)
    norm = 1.0 + math.sqrt(2.0) * c + c * c
    b0 = 1.0 / norm
    return BiquadCoefficients(
        b0=b0,
        b1=-2.0 * b0,
        b2=b0,
        a1=2.0 * (c * c - 1.0) / norm,
        a2=(1.0 - math.sqrt(2.0) * c + c * c) / norm,
    )


def magnitude_response(coeffs: BiquadCoefficients, f_hz, fs_hz: float) -> np.ndarray:
    """|H(e^{j 2 pi f / fs})| evaluated from the coefficients."""
    w = 2.0 * np.pi * np.asarray(f_hz, dtype=np.float64) / fs_hz
    z = np.exp(-1j * w)
    num = coeffs.b0 + coeffs.b1 * z + coeffs.b2 * z * z
    den = 1.0 + coeffs.a1 * z + coeffs.a2 * z * z
    return np.abs(num / den)


def filter_trace(coeffs: BiquadCoefficients, trace: np.ndarray) -> np.ndarray:
    """Causal direct-form filtering with zero initial state."""
    trace = np.asarray(trace, dtype=np.float64)
    if trace.size == 0:
        raise ValueError("trace is empty")
    return lfilter(coeffs.numerator(), coeffs.denominator(), trace)


@dataclass(frozen=True)
class MultichannelRecording:
    """Raw or filtered voltage traces, one row per electrode, in microvolts."""

    fs_hz: float
    traces: np.ndarray  # (n_channels, n_samples)

    def __post_init__(self):
        traces = np.atleast_2d(np.asarray(self.traces, dtype=np.float64))
        if self.fs_hz <= 0:
            raise ValueError("fs_hz must be positive")
        object.__setattr__(self, "traces", traces)

    @property
    def n_channels(self) -> int:
        return self.traces.shape[0]

    @property
    def n_samples(self) -> int:
        return self.traces.shape[1]


def filter_recording(coeffs: BiquadCoefficients, rec: MultichannelRecording) -> MultichannelRecording:
    filtered = lfilter(coeffs.numerator(), coeffs.denominator(), rec.traces, axis=1)
    return MultichannelRecording(fs_hz=rec.fs_hz, traces=filtered)


@dataclass(frozen=True)
class ChannelSpikes:
    """Detected events for one channel: strictly increasing sample indices
    with the signed peak amplitude, plus a flag set when the requested window
    exceeded the trace and the whole-trace sigma was used instead."""

    indices: np.ndarray
    amplitudes: np.ndarray
    used_whole_trace_sigma: bool = False

    @property
    def n_events(self) -> int:
        return int(np.asarray(self.indices).size)


@dataclass(frozen=True)
class SpikeTrain:
    """Per-channel spike events for a recording."""

    channels: tuple[ChannelSpikes, ...]
    fs_hz: float


def _trailing_sigma(trace: np.ndarray, window: int) -> np.ndarray:
    """Population std over the trailing window (t-window, t], shorter at the start.

    Computed from running first and second moments; the brute-force
    equivalent recomputes np.std over each window.
    """
    x = trace
    c1 = np.cumsum(x)
    c2 = np.cumsum(x * x)
    s1 = c1.copy()
    s2 = c2.copy()
    if window < x.size:
        s1[window:] = c1[window:] - c1[:-window]
        s2[window:] = c2[window:] - c2[:-window]
    n = np.minimum(np.arange(1, x.size + 1), window)
    mean = s1 / n
    var = s2 / n - mean * mean
    np.maximum(var, 0.0, out=var)
    return np.sqrt(var)


def _merge_refractory(indices: np.ndarray, absvals: np.ndarray, gap: float) -> np.ndarray:
    """Greedy left-to-right merge: events closer than `gap` samples to the
    last kept event are merged, keeping the larger |amplitude| (earlier wins
    ties)."""
    kept: list[int] = []
    for t in indices.tolist():
        if kept and (t - kept[-1]) < gap:
            if absvals[t] > absvals[kept[-1]]:
                kept[-1] = t
        else:
            kept.append(t)
    return np.asarray(kept, dtype=np.int64)


def detect_spikes(
    trace: np.ndarray,
    fs_hz: float,
    k_sigma: float = 8.0,
    window_ms: float = 500.0,
    refractory_ms: float = 1.0,
    fixed_threshold_uv: float | None = None,
    both_polarities: bool = True,
) -> ChannelSpikes:
    """Detect threshold crossings on one (already filtered) trace.

    An event is emitted at each local peak of |x| (or of -x when
    both_polarities is False) that strictly exceeds k_sigma times the
    trailing-window population standard deviation. The window covers the
    samples (t - window, t]; it is shorter near the start of the trace, and
    the very first sample is never an event (a lone sample has sigma 0, so
    any nonzero value would trigger). Events closer than refractory_ms are
    merged, keeping the larger peak. Passing fixed_threshold_uv switches to
    a constant threshold in microvolts.
    """
    x = np.asarray(trace, dtype=np.float64)
    if x.size == 0:
        raise ValueError("trace is empty")
    window = int(round(window_ms * fs_hz / 1000.0))
    if window < 2:
        raise ValueError("window must cover at least 2 samples")
    whole_trace = window > x.size
    if whole_trace:
        sigma = np.full(x.size, x.std())
    else:
        sigma = _trailing_sigma(x, window)

    a = np.abs(x) if both_polarities else np.maximum(-x, 0.0)
    if fixed_threshold_uv is not None:
        threshold = np.full(x.size, float(fixed_threshold_uv))
    else:
        threshold = k_sigma * sigma

    rising = np.empty(x.size, dtype=bool)
    rising[0] = False  # first sample has no trailing context
    rising[1:] = a[1:] >= a[:-1]
    falling = np.empty(x.size, dtype=bool)
    falling[-1] = True
    falling[:-1] = a[:-1] > a[1:]
    candidates = np.flatnonzero(rising & falling & (a > threshold))

    gap = refractory_ms * fs_hz / 1000.0
    kept = _merge_refractory(candidates, a, gap)
    return ChannelSpikes(
        indices=kept,
        amplitudes=x[kept],
        used_whole_trace_sigma=whole_trace,
    )


def detect_spikes_recording(rec: MultichannelRecording, **kwargs) -> SpikeTrain:
    """Run detect_spikes independently on every channel."""
    channels = tuple(detect_spikes(tr, rec.fs_hz, **kwargs) for tr in rec.traces)
    return SpikeTrain(channels=channels, fs_hz=rec.fs_hz)


def recording_to_feature_rows(
    rec: MultichannelRecording,
    label: ClassLabel,
    dpi: int,
    coeffs: BiquadCoefficients | None = None,
) -> FeatureTable:
    """Convert a 60-channel recording to the canonical feature table.

    Row t holds the filtered voltage of each channel at sample t plus the
    time feature t; every row carries the given class label.
    """
    if rec.n_channels != N_CHANNELS:
        raise ValueError(f"expected {N_CHANNELS} channels, got {rec.n_channels}")
    if coeffs is None:
        coeffs = design_highpass_butterworth(fs_hz=rec.fs_hz)
    filtered = filter_recording(coeffs, rec)
    n = rec.n_samples
    feats = np.empty((n, N_CHANNELS + 1), dtype=np.float64)
    feats[:, :N_CHANNELS] = filtered.traces.T
    feats[:, N_CHANNELS] = np.arange(n, dtype=np.float64)
    labels = np.full(n, int(label), dtype=np.int64)
    return FeatureTable(feats, labels, dpi, CANONICAL_FEATURE_NAMES)


def save_recording(rec: MultichannelRecording, path) -> None:
    save_bundle(path, {"fs_hz": rec.fs_hz, "n_channels": rec.n_channels}, {"traces": rec.traces})


def load_recording(path) -> MultichannelRecording:
    meta, arrays = load_bundle(path)
    return MultichannelRecording(fs_hz=float(meta["fs_hz"]), traces=arrays["traces"])


def save_spike_train(train: SpikeTrain, path) -> None:
    """CSV export: channel,sample_index,amplitude_uV."""
    with open(path, "w") as fh:
        fh.write("channel,sample_index,amplitude_uV\n")
        for ch, spikes in enumerate(train.channels):
            for idx, amp in zip(spikes.indices.tolist(), spikes.amplitudes.tolist()):
                fh.write(f"{ch},{idx},{amp!r}\n")
