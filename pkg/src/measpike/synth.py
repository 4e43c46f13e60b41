"""Synthetic data at two levels: raw multichannel recordings that exercise
the filtering/detection chain, and labeled feature tables with a tunable
class-separation knob that exercise the classification pipeline."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import ClassLabel, FeatureTable, CANONICAL_FEATURE_NAMES, N_CHANNELS, validate_dpi
from .signals import MultichannelRecording


@dataclass(frozen=True)
class SynthRecordingConfig:
    fs_hz: float = 10000.0
    n_channels: int = N_CHANNELS
    duration_s: float = 1.0
    firing_rate_hz: float = 5.0
    spike_amplitude_uv: float = 60.0  # magnitude of the negative lobe
    spike_width_ms: float = 1.5
    noise_sd_uv: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ValueError("duration_s must be positive")
        if self.firing_rate_hz < 0 or not np.isfinite(self.firing_rate_hz):
            raise ValueError("firing_rate_hz must be finite and non-negative")


def biphasic_template(fs_hz: float, amplitude_uv: float, width_ms: float) -> np.ndarray:
    """Stylized extracellular action potential: a negative lobe followed by a
    smaller positive rebound, `width_ms` long in total."""
    n = max(int(round(width_ms * fs_hz / 1000.0)), 2)
    n_neg = max(n // 2, 1)
    n_pos = n - n_neg
    neg = -amplitude_uv * np.sin(np.linspace(0.0, np.pi, n_neg, endpoint=False))
    pos = 0.4 * amplitude_uv * np.sin(np.linspace(0.0, np.pi, n_pos, endpoint=False))
    return np.concatenate([neg, pos])


def synth_recording(cfg: SynthRecordingConfig, label: ClassLabel) -> MultichannelRecording:
    """Per channel: a Poisson spike train at the configured rate convolved
    with the biphasic template, plus white Gaussian noise.

    Channels use spawned substreams of (seed, label, channel), so traces are
    bit-reproducible and channels could be generated in parallel.
    """
    n = int(round(cfg.duration_s * cfg.fs_hz))
    template = biphasic_template(cfg.fs_hz, cfg.spike_amplitude_uv, cfg.spike_width_ms)
    p_spike = cfg.firing_rate_hz / cfg.fs_hz
    traces = np.empty((cfg.n_channels, n), dtype=np.float64)
    for ch in range(cfg.n_channels):
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, int(label), ch]))
        impulses = (rng.random(n) < p_spike).astype(np.float64)
        sig = np.convolve(impulses, template)[:n]
        if cfg.noise_sd_uv > 0:
            sig = sig + rng.normal(0.0, cfg.noise_sd_uv, n)
        traces[ch] = sig
    return MultichannelRecording(fs_hz=cfg.fs_hz, traces=traces)


@dataclass(frozen=True)
class SynthTableConfig:
    rows_per_class: int = 1000
    class_mean_shift: float = 0.0  # separation knob s
    covariance_scale: float = 1.0
    dpi_effect: float = 0.0  # magnitude of a shared per-dpi mean offset
    time_column_mode: str = "sequential"
    seed: int = 0
    n_channels: int = N_CHANNELS

    def __post_init__(self):
        if self.rows_per_class < 1:
            raise ValueError("rows_per_class must be positive")
        if self.class_mean_shift < 0:
            raise ValueError("class_mean_shift must be non-negative")
        if self.covariance_scale <= 0:
            raise ValueError("covariance_scale must be positive")
        if self.time_column_mode != "sequential":
            raise ValueError(f"unsupported time_column_mode {self.time_column_mode!r}")


def class_directions(cfg: SynthTableConfig) -> np.ndarray:
    """Unit mean-offset direction per class, fixed by the seed (shared across
    dpi so class geometry is stable over recording days)."""
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 101]))
    dirs = rng.normal(size=(3, cfg.n_channels))
    return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)


def class_means(cfg: SynthTableConfig, dpi: int) -> np.ndarray:
    """Channel-space mean per class at the given dpi."""
    means = cfg.class_mean_shift * class_directions(cfg)
    if cfg.dpi_effect != 0.0:
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 202, dpi]))
        offset = rng.normal(size=cfg.n_channels)
        offset *= cfg.dpi_effect / np.linalg.norm(offset)
        means = means + offset
    return means


def synth_feature_table(cfg: SynthTableConfig, dpi: int) -> FeatureTable:
    """Balanced 3-class table of Gaussian channel features plus a sequential
    time column.

    Channel features are drawn from isotropic class-conditional Gaussians
    whose means sit class_mean_shift apart along class-specific random
    directions. Rows are shuffled before the time column is assigned, so
    time = 0..n-1 carries no class information by construction.
    """
    validate_dpi(dpi)
    means = class_means(cfg, dpi)
    n = 3 * cfg.rows_per_class
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 303, dpi]))
    noise = rng.normal(size=(n, cfg.n_channels)) * np.sqrt(cfg.covariance_scale)
    labels = np.repeat(np.arange(3, dtype=np.int64), cfg.rows_per_class)
    perm = rng.permutation(n)
    labels = labels[perm]
    channels = noise + means[labels]
    feats = np.empty((n, cfg.n_channels + 1), dtype=np.float64)
    feats[:, : cfg.n_channels] = channels
    feats[:, cfg.n_channels] = np.arange(n, dtype=np.float64)
    names = CANONICAL_FEATURE_NAMES if cfg.n_channels == N_CHANNELS else ()
    return FeatureTable(feats, labels, dpi, names)
