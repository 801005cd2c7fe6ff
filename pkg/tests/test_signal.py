import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import signal as sps

from posthoc_bench.errors import (
    DegenerateReferenceError,
    InsufficientSamplesError,
    InvalidBandError,
    InvalidFactorError,
    InvalidOrderError,
    InvalidThresholdError,
)
from posthoc_bench.signal import (
    TimeSeriesMatrix,
    common_average_reference,
    decimate,
    design_butterworth_bandpass,
    epoch,
    filtfilt,
    hilbert_envelope,
    mark_artifacts,
    resample_rational,
)


def prototype_magnitude(f, low, high, order, fs):
    """Analog Butterworth bandpass magnitude evaluated at pre-warped frequencies."""
    warp = lambda hz: 2 * fs * np.tan(np.pi * np.asarray(hz, dtype=float) / fs)
    w, wl, wh = warp(f), warp(low), warp(high)
    x = (w**2 - wl * wh) / (w * (wh - wl))
    return 1.0 / np.sqrt(1.0 + x ** (2 * order))


def sine(freq, fs=120.0, seconds=20.0, amp=1.0):
    t = np.arange(int(seconds * fs)) / fs
    return t, amp * np.sin(2 * np.pi * freq * t)


def fit_sinusoid(t, y, freq):
    design = np.column_stack([np.sin(2 * np.pi * freq * t), np.cos(2 * np.pi * freq * t)])
    (a, b), *_ = np.linalg.lstsq(design, y, rcond=None)
    return np.hypot(a, b), np.arctan2(b, a)


class TestButterworth:
    def test_alpha_band_response(self):
        spec = design_butterworth_bandpass(8, 12, 5, 120)
        assert 0.99 <= abs(spec.response(10.0)[0]) <= 1.01
        assert abs(spec.response(40.0)[0]) < 0.01

    @pytest.mark.parametrize(
        "low, high, order, fs", [(8, 12, 5, 120), (0.7, 25, 5, 120), (0.2, 48, 5, 1000), (1, 40, 3, 250)]
    )
    def test_matches_prewarped_analog_prototype(self, low, high, order, fs):
        spec = design_butterworth_bandpass(low, high, order, fs)
        freqs = np.linspace(0.05, fs / 2 - 0.05, 400)
        np.testing.assert_allclose(
            np.abs(spec.response(freqs)), prototype_magnitude(freqs, low, high, order, fs), atol=1e-6
        )

    @pytest.mark.parametrize("low, high, fs", [(8, 12, 120), (0.2, 48, 1000), (0.7, 25, 120)])
    def test_minus_3db_at_band_edges(self, low, high, fs):
        spec = design_butterworth_bandpass(low, high, 5, fs)
        freqs = np.linspace(low / 4, min(high * 1.5, fs / 2 * 0.999), 200_001)
        mag = np.abs(spec.response(freqs))
        above = freqs[mag >= 1 / np.sqrt(2)]
        assert abs(above[0] - low) / low < 0.02
        assert abs(above[-1] - high) / high < 0.02

    def test_broadband_filter_at_1khz_is_stable(self):
        spec = design_butterworth_bandpass(0.2, 48, 5, 1000)
        assert spec.is_stable()
        assert np.all(np.abs(spec.poles()) < 1)

    @pytest.mark.parametrize("low, high", [(12, 8), (8, 60), (0, 12), (8, 70)])
    def test_invalid_band(self, low, high):
        with pytest.raises(InvalidBandError):
            design_butterworth_bandpass(low, high, 5, 120)

    def test_invalid_order(self):
        with pytest.raises(InvalidOrderError):
            design_butterworth_bandpass(8, 12, 0, 120)


class TestFiltfilt:
    spec = design_butterworth_bandpass(8, 12, 5, 120)

    def test_zero_in_zero_out(self):
        x = TimeSeriesMatrix(np.zeros((2, 500)), 120)
        assert np.all(filtfilt(self.spec, x).data == 0)

    def test_passband_sinusoid_amplitude_and_phase(self):
        t, y = sine(10)
        out = filtfilt(self.spec, TimeSeriesMatrix(y[None], 120)).data[0]
        mid = slice(len(t) // 4, 3 * len(t) // 4)
        amp, phase = fit_sinusoid(t[mid], out[mid], 10)
        assert 0.98 <= amp <= 1.02
        assert abs(phase) < 1e-3

    def test_stopband_sinusoid(self):
        t, y = sine(50)
        out = filtfilt(self.spec, TimeSeriesMatrix(y[None], 120)).data[0]
        mid = slice(len(t) // 4, 3 * len(t) // 4)
        amp, _ = fit_sinusoid(t[mid], out[mid], 50)
        expected = prototype_magnitude(50, 8, 12, 5, 120) ** 2
        assert amp < 1e-3
        assert amp == pytest.approx(expected, rel=0.05, abs=1e-9)

    def test_shape_preserved(self, random_recording):
        assert filtfilt(self.spec, random_recording).data.shape == random_recording.data.shape

    def test_too_short(self):
        with pytest.raises(InsufficientSamplesError):
            filtfilt(self.spec, TimeSeriesMatrix(np.ones((1, 30)), 120))

    @pytest.mark.parametrize("freq", [9.0, 10.0, 11.5, 13.0])
    def test_twice_equals_squared_response(self, freq):
        t, y = sine(freq, seconds=40)
        x = TimeSeriesMatrix(y[None], 120)
        once = filtfilt(self.spec, x)
        twice = filtfilt(self.spec, once).data[0]
        mid = slice(len(t) // 4, 3 * len(t) // 4)
        amp, _ = fit_sinusoid(t[mid], twice[mid], freq)
        expected = prototype_magnitude(freq, 8, 12, 5, 120) ** 4
        assert amp == pytest.approx(expected, rel=0.01)


class TestReferenceAndResampling:
    def test_identical_rows_vanish(self):
        x = TimeSeriesMatrix(np.tile(np.arange(10.0), (3, 1)), 120)
        assert np.all(common_average_reference(x).data == 0)

    def test_zero_mean_rows_unchanged(self):
        x = TimeSeriesMatrix(np.array([[1.0] * 5, [-1.0] * 5]), 120)
        np.testing.assert_array_equal(common_average_reference(x).data, x.data)

    def test_random_column_means(self, random_recording):
        car = common_average_reference(random_recording)
        assert np.abs(car.data.mean(axis=0)).max() <= 1e-12

    def test_idempotent(self, random_recording):
        once = common_average_reference(random_recording)
        np.testing.assert_allclose(common_average_reference(once).data, once.data, atol=1e-15)

    def test_single_channel(self):
        with pytest.raises(DegenerateReferenceError):
            common_average_reference(TimeSeriesMatrix(np.ones((1, 10)), 120))

    def test_decimate(self):
        x = TimeSeriesMatrix(np.arange(1200.0)[None], 1200)
        assert decimate(x, 1).data.tolist() == x.data.tolist()
        d = decimate(x, 10)
        assert d.n_samples == 120 and d.sample_rate_hz == 120
        np.testing.assert_array_equal(d.data[0], np.arange(0, 1200, 10))
        with pytest.raises(InvalidFactorError):
            decimate(x, 0)

    def test_rational_resampling_1000_to_120(self):
        t, y = sine(10, fs=1000, seconds=10)
        out = resample_rational(TimeSeriesMatrix(y[None], 1000), 3, 25)
        assert out.sample_rate_hz == pytest.approx(120)
        assert out.n_samples == 1200
        t_out = np.arange(out.n_samples) / 120
        mid = slice(200, 1000)
        amp, phase = fit_sinusoid(t_out[mid], out.data[0, mid], 10)
        assert amp == pytest.approx(1, abs=0.01)
        assert abs(phase) < 0.01


class TestHilbertEnvelope:
    def test_constant_amplitude(self):
        _, y = sine(10, seconds=10, amp=2.0)
        env = hilbert_envelope(y)[60:-60]
        np.testing.assert_allclose(env, 2.0, rtol=0.01)

    def test_amplitude_modulation(self):
        t = np.arange(1200) / 120
        mod = 1 + 0.5 * np.sin(2 * np.pi * t)
        env = hilbert_envelope(mod * np.sin(2 * np.pi * 10 * t))
        mid = slice(60, -60)
        assert np.max(np.abs(env[mid] - mod[mid]) / mod[mid]) < 0.02

    def test_zero(self):
        assert np.all(hilbert_envelope(np.zeros(64)) == 0)

    def test_matches_scipy(self, rng):
        for n in (64, 65):
            x = rng.standard_normal(n)
            np.testing.assert_allclose(hilbert_envelope(x), np.abs(sps.hilbert(x)), atol=1e-12)

    def test_too_short(self):
        with pytest.raises(InsufficientSamplesError):
            hilbert_envelope(np.array([]))

    @settings(max_examples=50, deadline=None)
    @given(
        st.lists(st.floats(-1e3, 1e3), min_size=8, max_size=200),
        st.floats(1e-3, 1e3),
    )
    def test_positive_homogeneity(self, values, c):
        x = np.array(values)
        env = hilbert_envelope(x)
        scaled = hilbert_envelope(c * x)
        assert np.all(env >= 0)
        np.testing.assert_allclose(scaled, c * env, rtol=1e-12, atol=1e-12 * c * (env.max() + 1e-300))


class TestEpochingAndArtifacts:
    def test_counts(self):
        assert len(epoch(TimeSeriesMatrix(np.zeros((2, 1200)), 120), 1.0)) == 10
        e = epoch(TimeSeriesMatrix(np.zeros((2, 125)), 120), 1.0)
        assert len(e) == 1 and e.epoch_length == 120
        assert len(epoch(TimeSeriesMatrix(np.zeros((2, 60)), 120), 1.0)) == 0

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 4), st.integers(1, 700), st.sampled_from([0.25, 0.5, 1.0, 2.0]))
    def test_concatenation_reproduces_prefix(self, n_ch, n_t, window):
        data = np.arange(n_ch * n_t, dtype=float).reshape(n_ch, n_t)
        eps = epoch(TimeSeriesMatrix(data, 120), window)
        used = len(eps) * eps.epoch_length
        np.testing.assert_array_equal(eps.concatenate(), data[:, :used])
        assert np.all(np.diff(eps.epoch_starts) == eps.epoch_length)

    def test_p2p_flag(self):
        data = np.zeros((2, 240))
        data[1, 10], data[1, 20] = -60e-6, 60e-6
        mask = mark_artifacts(TimeSeriesMatrix(data, 120), 1.0, 80e-6)
        assert mask.tolist() == [True, False]

    def test_threshold_must_be_positive(self):
        with pytest.raises(InvalidThresholdError):
            mark_artifacts(TimeSeriesMatrix(np.zeros((1, 240)), 120), 1.0, 0)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(1e-6, 5.0), st.floats(1e-6, 5.0))
    def test_monotone_in_threshold(self, t1, t2):
        data = np.random.default_rng(0).standard_normal((3, 1200))
        x = TimeSeriesMatrix(data, 120)
        lo, hi = sorted((t1, t2))
        assert mark_artifacts(x, 1.0, hi).sum() <= mark_artifacts(x, 1.0, lo).sum()
