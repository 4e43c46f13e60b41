import numpy as np
import pytest

from measpike.dataset import ClassLabel
from measpike.signals import (
    BiquadCoefficients,
    MultichannelRecording,
    design_highpass_butterworth,
    detect_spikes,
    detect_spikes_recording,
    filter_recording,
    filter_trace,
    load_recording,
    recording_to_feature_rows,
    save_recording,
    save_spike_train,
)


# ---------------------------------------------------------------------------
# independent oracles
# ---------------------------------------------------------------------------


def analytic_highpass_magnitude(f_hz, fc_hz, fs_hz):
    """Prewarped-bilinear magnitude of the order-2 Butterworth high-pass:
    |H| = v^2 / sqrt(1 + v^4) with v = tan(pi f / fs) / tan(pi fc / fs).
    Derived from the analog prototype, never from the coefficients."""
    v = np.tan(np.pi * np.asarray(f_hz, dtype=np.float64) / fs_hz) / np.tan(np.pi * fc_hz / fs_hz)
    return v * v / np.sqrt(1.0 + v ** 4)


def transfer_magnitude(coeffs, f_hz, fs_hz):
    """|H(e^{jw})| from a polynomial evaluation of the coefficients."""
    w = 2.0 * np.pi * np.asarray(f_hz, dtype=np.float64) / fs_hz
    z_inv = np.exp(-1j * w)
    num = coeffs.b0 + coeffs.b1 * z_inv + coeffs.b2 * z_inv ** 2
    den = 1.0 + coeffs.a1 * z_inv + coeffs.a2 * z_inv ** 2
    return np.abs(num / den)


def direct_form_one(coeffs, x):
    """Sample-by-sample direct-form-I recurrence with zero initial state."""
    y = np.empty(len(x))
    x1 = x2 = y1 = y2 = 0.0
    for i, xn in enumerate(x):
        yn = coeffs.b0 * xn + coeffs.b1 * x1 + coeffs.b2 * x2 - coeffs.a1 * y1 - coeffs.a2 * y2
        y[i] = yn
        x2, x1 = x1, xn
        y2, y1 = y1, yn
    return y


def brute_force_detect(trace, fs_hz, k_sigma=8.0, window_ms=500.0, refractory_ms=1.0):
    """O(N*W) reference detector: recompute the trailing-window population
    std at every sample with np.std, apply the same peak and merge rules."""
    x = np.asarray(trace, dtype=np.float64)
    n = x.size
    w = int(round(window_ms * fs_hz / 1000.0))
    a = np.abs(x)
    if w > n:
        sigma = np.full(n, x.std())
    else:
        sigma = np.empty(n)
        for t in range(min(w - 1, n)):
            sigma[t] = x[: t + 1].std()
        if n >= w:
            windows = np.lib.stride_tricks.sliding_window_view(x, w)
            sigma[w - 1:] = windows.std(axis=1)
    events = []
    for t in range(1, n):  # the first sample is never an event
        prev_ok = a[t] >= a[t - 1]
        next_ok = t == n - 1 or a[t] > a[t + 1]
        if prev_ok and next_ok and a[t] > k_sigma * sigma[t]:
            events.append(t)
    gap = refractory_ms * fs_hz / 1000.0
    kept = []
    for t in events:
        if kept and (t - kept[-1]) < gap:
            if a[t] > a[kept[-1]]:
                kept[-1] = t
        else:
            kept.append(t)
    return kept


# ---------------------------------------------------------------------------
# filter design
# ---------------------------------------------------------------------------


class TestButterworthDesign:
    def test_endpoint_gains(self):
        c = design_highpass_butterworth()
        assert transfer_magnitude(c, 0.0, 10000.0) < 1e-9
        assert abs(transfer_magnitude(c, 5000.0, 10000.0) - 1.0) < 1e-9

    def test_minus_3db_at_cutoff(self):
        c = design_highpass_butterworth(fc_hz=200.0, fs_hz=10000.0)
        assert abs(transfer_magnitude(c, 200.0, 10000.0) - 1.0 / np.sqrt(2.0)) < 1e-6

    def test_matches_analytic_magnitude_at_2khz(self):
        c = design_highpass_butterworth(fc_hz=200.0, fs_hz=10000.0)
        got = transfer_magnitude(c, 2000.0, 10000.0)
        want = analytic_highpass_magnitude(2000.0, 200.0, 10000.0)
        assert abs(got - want) / want < 1e-9

    def test_matches_analytic_magnitude_across_band(self):
        for fc, fs in ((200.0, 10000.0), (350.0, 20000.0), (50.0, 2000.0)):
            c = design_highpass_butterworth(fc_hz=fc, fs_hz=fs)
            freqs = np.logspace(np.log10(fs * 1e-4), np.log10(fs * 0.499), 20)
            got = transfer_magnitude(c, freqs, fs)
            want = analytic_highpass_magnitude(freqs, fc, fs)
            assert np.max(np.abs(got - want) / want) < 1e-9

    def test_poles_inside_unit_circle(self):
        for fc in (1.0, 200.0, 2000.0, 4900.0):
            c = design_highpass_butterworth(fc_hz=fc, fs_hz=10000.0)
            assert np.all(np.abs(c.poles()) < 1.0)

    def test_cutoff_at_or_above_nyquist_rejected(self):
        with pytest.raises(ValueError, match="Nyquist"):
            design_highpass_butterworth(fc_hz=5000.0, fs_hz=10000.0)

    def test_unsupported_order(self):
        with pytest.raises(ValueError, match="order"):
            design_highpass_butterworth(order=4)


class TestFilterTrace:
    def setup_method(self):
        self.coeffs = design_highpass_butterworth()

    def test_zero_in_zero_out(self):
        y = filter_trace(self.coeffs, np.zeros(100))
        assert np.array_equal(y, np.zeros(100))

    def test_dc_rejection_after_one_second(self):
        x = np.ones(10000)
        y = filter_trace(self.coeffs, x)
        assert np.all(np.abs(y[-100:]) < 1e-6)

    def test_length_preserved_and_causal(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=500)
        y = filter_trace(self.coeffs, x)
        assert y.shape == x.shape
        # causality: output up to t must not depend on x[t+1:]
        x2 = x.copy()
        x2[300:] = 0.0
        y2 = filter_trace(self.coeffs, x2)
        assert np.array_equal(y[:300], y2[:300])

    def test_linearity(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=2000)
        z = rng.normal(size=2000)
        alpha = 2.7
        lhs = filter_trace(self.coeffs, alpha * x + z)
        rhs = alpha * filter_trace(self.coeffs, x) + filter_trace(self.coeffs, z)
        scale = np.max(np.abs(lhs))
        assert np.max(np.abs(lhs - rhs)) / scale < 1e-12

    def test_scaling_homogeneity(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=1500)
        a = -3.25
        lhs = filter_trace(self.coeffs, a * x)
        rhs = a * filter_trace(self.coeffs, x)
        assert np.max(np.abs(lhs - rhs)) <= 1e-12 * np.max(np.abs(lhs))

    def test_matches_direct_form_recurrence(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=3000) * 10.0
        got = filter_trace(self.coeffs, x)
        want = direct_form_one(self.coeffs, x)
        assert np.max(np.abs(got - want)) < 1e-10 * max(np.max(np.abs(want)), 1.0)

    def test_empty_trace_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            filter_trace(self.coeffs, np.array([]))


# ---------------------------------------------------------------------------
# spike detection
# ---------------------------------------------------------------------------


def bump(n, at, width, amplitude):
    """Smooth negative-going excursion centered at `at`."""
    x = np.zeros(n)
    half = width // 2
    lobe = -amplitude * np.hanning(2 * half + 1)
    lo = at - half
    x[lo:lo + lobe.size] += lobe
    return x


class TestDetectSpikes:
    def test_flat_zero_no_events(self):
        out = detect_spikes(np.zeros(5000), 10000.0)
        assert out.n_events == 0

    def test_30uv_excursion_over_2p75uv_noise(self):
        # 8 * 2.75 = 22 uV threshold; a 30 uV excursion must fire exactly once
        rng = np.random.default_rng(42)
        fs = 10000.0
        x = rng.normal(0.0, 2.75, 10000)
        x += bump(10000, at=6000, width=20, amplitude=30.0)
        out = detect_spikes(x, fs, k_sigma=8.0, window_ms=500.0)
        assert out.n_events == 1
        peak = int(np.argmax(np.abs(x)))
        assert out.indices[0] == peak
        assert abs(out.indices[0] - 6000) <= 5
        assert abs(out.amplitudes[0]) > 22.0
        assert brute_force_detect(x, fs) == out.indices.tolist()

    def test_two_excursions_50ms_apart(self):
        rng = np.random.default_rng(7)
        fs = 10000.0
        x = rng.normal(0.0, 1.0, 8000)
        x += bump(8000, at=3000, width=16, amplitude=10.0)
        x += bump(8000, at=3500, width=16, amplitude=10.0)
        out = detect_spikes(x, fs, k_sigma=8.0, window_ms=500.0)
        assert out.n_events == 2
        assert all(abs(int(i) - at) <= 5 for i, at in zip(out.indices, (3000, 3500)))
        assert brute_force_detect(x, fs, window_ms=500.0) == out.indices.tolist()

    def test_refractory_merge_keeps_larger(self):
        fs = 10000.0
        x = np.zeros(2000)
        x[1000] = 5.0
        x[1005] = 7.0  # 0.5 ms later, larger
        out = detect_spikes(x, fs, k_sigma=8.0, window_ms=50.0, refractory_ms=1.0)
        assert out.indices.tolist() == [1005]
        assert out.amplitudes.tolist() == [7.0]

    def test_fixed_threshold_mode(self):
        x = np.zeros(3000)
        x[500] = 18.0
        x[800] = 25.0
        out = detect_spikes(x, 10000.0, window_ms=50.0, fixed_threshold_uv=22.0)
        assert out.indices.tolist() == [800]

    def test_window_longer_than_trace_falls_back(self):
        rng = np.random.default_rng(5)
        x = rng.normal(0.0, 1.0, 300)
        x[150] = 30.0
        out = detect_spikes(x, 10000.0, window_ms=500.0)  # 5000 samples > 300
        assert out.used_whole_trace_sigma
        assert 150 in out.indices.tolist()

    def test_matches_brute_force_on_random_traces(self):
        rng = np.random.default_rng(11)
        for _ in range(60):
            n = int(rng.integers(50, 1500))
            fs = 10000.0
            x = rng.normal(0.0, 1.0, n)
            for _ in range(int(rng.integers(0, 4))):
                at = int(rng.integers(10, n - 10))
                x[at] += rng.choice([-1.0, 1.0]) * rng.uniform(5.0, 20.0)
            k = float(rng.uniform(3.0, 8.0))
            window_ms = float(rng.uniform(2.0, 20.0))
            got = detect_spikes(x, fs, k_sigma=k, window_ms=window_ms)
            want = brute_force_detect(x, fs, k_sigma=k, window_ms=window_ms)
            assert got.indices.tolist() == want

    def test_short_window_rejected(self):
        with pytest.raises(ValueError, match="2 samples"):
            detect_spikes(np.zeros(100), 10000.0, window_ms=0.05)


class TestRecordingConversion:
    def make_recording(self, n_channels=60, n_samples=100, seed=0):
        rng = np.random.default_rng(seed)
        return MultichannelRecording(fs_hz=10000.0, traces=rng.normal(size=(n_channels, n_samples)))

    def test_row_count_and_time_column(self):
        rec = self.make_recording()
        table = recording_to_feature_rows(rec, ClassLabel.CONTROL, 0)
        assert table.n_rows == 100
        assert np.array_equal(table.features[:, 60], np.arange(100.0))
        assert np.all(table.labels == 0)

    def test_columns_equal_filtered_traces(self):
        rec = self.make_recording(seed=3)
        from measpike.signals import design_highpass_butterworth

        coeffs = design_highpass_butterworth(fs_hz=rec.fs_hz)
        table = recording_to_feature_rows(rec, ClassLabel.ZIKV, 7, coeffs=coeffs)
        filtered = filter_recording(coeffs, rec)
        for j in (0, 17, 59):
            assert np.array_equal(table.features[:, j], filtered.traces[j])

    def test_wrong_channel_count(self):
        rec = self.make_recording(n_channels=59)
        with pytest.raises(ValueError, match="60 channels"):
            recording_to_feature_rows(rec, ClassLabel.CONTROL, 0)

    def test_recording_round_trip(self, tmp_path):
        rec = self.make_recording(n_channels=4, n_samples=256, seed=9)
        path = tmp_path / "rec.msb"
        save_recording(rec, path)
        loaded = load_recording(path)
        assert loaded.fs_hz == rec.fs_hz
        assert np.array_equal(loaded.traces, rec.traces)

    def test_spike_train_csv(self, tmp_path):
        rec = self.make_recording(n_channels=2, n_samples=2000, seed=1)
        rec.traces[0, 700] = 40.0
        train = detect_spikes_recording(rec, k_sigma=8.0, window_ms=50.0)
        path = tmp_path / "spikes.csv"
        save_spike_train(train, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "channel,sample_index,amplitude_uV"
        assert any(line.startswith("0,700,") for line in lines[1:])
