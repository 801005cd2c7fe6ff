import numpy as np
import pytest
from scipy.signal import hilbert
from hypothesis import given, settings
from hypothesis import strategies as st

from posthoc_bench.errors import (
    DegenerateRankingError,
    InvalidBandError,
    InvalidRegularizationError,
    InvalidRequestError,
    InvalidSizeError,
    ShapeError,
)
from posthoc_bench.labeling import extract_labels
from posthoc_bench.signal import TimeSeriesMatrix
from posthoc_bench.source_space import (
    LeadField,
    apply_inverse,
    fast_ica,
    mne_inverse_operator,
    relative_source_power,
    synth_lead_field,
    synth_recording,
)


def normal_equation_sources(a, x, lam=1.0):
    """Minimizer of ||X - A S||^2 + lam ||S||^2 from (A^T A + lam I) S = A^T X."""
    return np.linalg.solve(a.T @ a + lam * np.eye(a.shape[1]), a.T @ x)


def split_target(x_with, x_without, pattern):
    """Separate ``x_with = alpha * x_without + pattern * s`` given a shared seed."""
    a = pattern / np.linalg.norm(pattern)
    proj = np.eye(a.size) - np.outer(a, a)
    lhs, rhs = (proj @ x_without).ravel(), (proj @ x_with).ravel()
    alpha = (lhs @ rhs) / (lhs @ lhs)
    rest = alpha * x_without
    return x_with - rest, rest


def match_components(estimated, truth):
    """Best |corr| for every true source, greedy over the correlation matrix."""
    k = truth.shape[0]
    corr = np.abs(np.corrcoef(np.vstack([truth, estimated]))[:k, k:])
    return corr.max(axis=1)


class TestMNE:
    def test_identity_lead_field(self):
        op = mne_inverse_operator(LeadField(np.eye(3)), 1.0)
        np.testing.assert_allclose(op.M, np.eye(3) / 2)

    def test_normal_equation_oracle(self, rng):
        a = rng.standard_normal((4, 10))
        x = rng.standard_normal((4, 50))
        op = mne_inverse_operator(LeadField(a), 1.0)
        assert np.abs(op.M @ x - normal_equation_sources(a, x)).max() <= 1e-10

    @settings(max_examples=20, deadline=None)
    @given(st.integers(2, 8), st.integers(1, 15), st.floats(1e-3, 1e3), st.integers(0, 10_000))
    def test_push_through_identity(self, n_c, n_s, lam, seed):
        a = np.random.default_rng(seed).standard_normal((n_c, n_s))
        op = mne_inverse_operator(LeadField(a), lam)
        other = np.linalg.solve(lam * np.eye(n_s) + a.T @ a, a.T)
        np.testing.assert_allclose(op.M, other, atol=1e-10 * max(1.0, np.abs(other).max()))

    def test_norm_shrinks_with_lambda(self, rng):
        lf = LeadField(rng.standard_normal((5, 8)))
        norms = [np.linalg.norm(mne_inverse_operator(lf, lam).M) for lam in (0.1, 1, 10, 100, 1e4)]
        assert all(a > b for a, b in zip(norms, norms[1:]))
        assert norms[-1] < 1e-3

    def test_invalid_lambda(self):
        with pytest.raises(InvalidRegularizationError):
            mne_inverse_operator(LeadField(np.eye(2)), 0)

    def test_apply(self, rng):
        op = mne_inverse_operator(LeadField(np.eye(3)), 1.0)
        x = TimeSeriesMatrix(rng.standard_normal((3, 20)), 120)
        np.testing.assert_allclose(apply_inverse(op, x).data, x.data / 2)
        assert np.all(apply_inverse(op, x.with_data(np.zeros((3, 20)))).data == 0)
        with pytest.raises(ShapeError):
            apply_inverse(op, TimeSeriesMatrix(np.zeros((2, 20)), 120))

    def test_planted_source_recovery(self, rng):
        q, _ = np.linalg.qr(rng.standard_normal((6, 4)))
        a = q * np.array([1.0, 1.2, 0.9, 1.1])
        s0 = rng.standard_normal((4, 500)) * np.array([[5.0], [1.0], [1.0], [1.0]])
        op = mne_inverse_operator(LeadField(a), 1e-6)
        s = apply_inverse(op, TimeSeriesMatrix(a @ s0, 120)).data
        top = np.argmax(s.var(axis=1))
        assert top == 0
        assert abs(np.corrcoef(s[top], s0[0])[0, 1]) >= 0.99


class TestFastICA:
    @pytest.mark.parametrize("seed", range(3))
    def test_uniform_sources(self, seed):
        r = np.random.default_rng(seed)
        s = r.uniform(-1, 1, (2, 50_000))
        x = r.standard_normal((2, 2)) @ s
        model = fast_ica(x, 2, seed=seed)
        assert model.converged
        assert match_components(model.Phi @ x, s).min() >= 0.95

    def test_white_independent_input_gives_signed_permutation(self, rng):
        s = rng.uniform(-np.sqrt(3), np.sqrt(3), (3, 100_000))
        phi = fast_ica(s, 3, seed=1).Phi
        assert np.allclose(np.sort(np.abs(phi), axis=1)[:, :-1], 0, atol=0.03)
        np.testing.assert_allclose(np.abs(phi).max(axis=1), 1, atol=0.03)

    def test_too_many_components(self, rng):
        with pytest.raises(InvalidRequestError):
            fast_ica(rng.standard_normal((3, 100)), 4)

    def test_deterministic(self, rng):
        x = rng.laplace(size=(3, 5000))
        assert np.array_equal(fast_ica(x, 3, seed=7).Phi, fast_ica(x, 3, seed=7).Phi)

    def test_pseudo_inverse(self, rng):
        x = rng.laplace(size=(5, 5000))
        model = fast_ica(x, 3, seed=0)
        assert model.Phi.shape == (3, 5) and model.mixing.shape == (5, 3)
        assert np.abs(model.Phi @ model.mixing - np.eye(3)).max() <= 1e-6

    def test_non_convergence_is_reported(self, rng):
        model = fast_ica(rng.laplace(size=(4, 2000)), 4, seed=0, max_iter=1)
        assert not model.converged and model.n_iterations == 1


class TestRelativePower:
    def test_rank_arithmetic(self):
        s = np.array([[1.0, -1.0], [2.0, -2.0], [3.0, -3.0]])
        np.testing.assert_allclose(relative_source_power(s), [0, 0.5, 1])

    def test_ties_by_index(self):
        s = np.tile([1.0, -1.0], (3, 1))
        np.testing.assert_allclose(relative_source_power(s), [0, 0.5, 1])

    def test_single_source(self):
        with pytest.raises(DegenerateRankingError):
            relative_source_power(np.ones((1, 5)))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 20), st.floats(1e-6, 1e6), st.integers(0, 10_000))
    def test_scale_invariant(self, n, c, seed):
        s = np.random.default_rng(seed).standard_normal((n, 50)) * np.arange(1, n + 1)[:, None]
        np.testing.assert_array_equal(relative_source_power(c * s), relative_source_power(s))

    def test_mne_sources_dominated_by_weak_ones(self):
        # the minimum-norm inverse of a smooth lead field spreads power unevenly:
        # most reconstructed sources carry little power, a few carry a lot
        lf = synth_lead_field(31, 2000, 0)
        x, _ = synth_recording(lf, 60, 120, (8, 12), 5, 0.0, 0)
        var = apply_inverse(mne_inverse_operator(lf), x).data.var(axis=1)
        normalized = (var - var.min()) / (var.max() - var.min())
        assert np.median(normalized) < 0.5
        assert np.mean(normalized < 0.5) > 0.5


class TestSynth:
    def test_lead_field_shape_and_norms(self):
        lf = synth_lead_field(31, 50, 3)
        assert lf.A.shape == (31, 50)
        np.testing.assert_allclose(np.linalg.norm(lf.A, axis=0), 1, atol=1e-12)

    def test_lead_field_deterministic(self):
        assert np.array_equal(synth_lead_field(31, 50, 3).A, synth_lead_field(31, 50, 3).A)

    @pytest.mark.parametrize("n_c, n_s", [(1, 5), (0, 5), (5, 0)])
    def test_lead_field_sizes(self, n_c, n_s):
        with pytest.raises(InvalidSizeError):
            synth_lead_field(n_c, n_s, 0)

    def test_sizes(self):
        lf = synth_lead_field(8, 10, 0)
        x, truth = synth_recording(lf, 600, 120, (8, 12), 2, 0.0, 0)
        assert x.n_samples == 72_000
        assert x.n_samples // 120 == 600
        assert truth.true_envelope.shape == (72_000,)

    def test_high_snr_pattern_dominates(self):
        lf = synth_lead_field(31, 50, 1)
        x, truth = synth_recording(lf, 120, 120, (8, 12), 4, 40.0, 1)
        centered = x.data - x.data.mean(axis=1, keepdims=True)
        pc1 = np.linalg.svd(centered, full_matrices=False)[0][:, 0]
        cos = abs(pc1 @ truth.true_pattern) / np.linalg.norm(truth.true_pattern)
        assert np.degrees(np.arccos(min(cos, 1.0))) <= 5.0

    def test_absent_target(self):
        lf = synth_lead_field(31, 50, 2)
        x, truth = synth_recording(lf, 120, 120, (8, 12), 4, -np.inf, 2)
        _, reference = synth_recording(lf, 120, 120, (8, 12), 4, 10.0, 2)
        assert np.all(truth.true_envelope == 0)
        z, _ = extract_labels(x, mne_inverse_operator(lf), (8, 12), 4)
        mid = slice(600, -600)
        corr = np.corrcoef(z[mid], reference.true_envelope[mid])[0, 1]
        assert abs(corr) < 0.1

    def test_target_spectrum_in_band(self):
        from posthoc_bench.source_space import band_limited_noise, slow_envelope

        r = np.random.default_rng(0)
        n, fs = 24_000, 120.0
        s = slow_envelope(n, fs, r) * band_limited_noise(n, fs, 8, 12, r)
        power = np.abs(np.fft.rfft(s)) ** 2
        freqs = np.fft.rfftfreq(n, 1 / fs)
        inside = power[(freqs >= 7) & (freqs <= 13)].sum()
        assert inside / power.sum() >= 0.95

    def test_invalid_band(self):
        with pytest.raises(InvalidBandError):
            synth_recording(synth_lead_field(4, 4, 0), 10, 120, (12, 8), 0, 0.0, 0)

    @pytest.mark.parametrize("snr_db", [-10.0, 0.0, 10.0])
    def test_snr_and_target_band(self, snr_db):
        lf = synth_lead_field(31, 50, 0)
        x_t, truth = synth_recording(lf, 120, 120, (8, 12), 3, snr_db, 0)
        x_0, _ = synth_recording(lf, 120, 120, (8, 12), 3, -np.inf, 0)
        target_part, rest = split_target(x_t.data, x_0.data, truth.true_pattern)
        ratio_db = 10 * np.log10(np.mean(target_part**2) / np.mean(rest**2))
        assert ratio_db == pytest.approx(snr_db, abs=1e-6)

        s_z = truth.true_pattern @ target_part / (truth.true_pattern @ truth.true_pattern)
        np.testing.assert_allclose(np.abs(hilbert(s_z)), truth.true_envelope, atol=1e-9 * s_z.std())
        power = np.abs(np.fft.rfft(s_z)) ** 2
        freqs = np.fft.rfftfreq(s_z.size, 1 / 120)
        assert power[(freqs >= 7) & (freqs <= 13)].sum() / power.sum() >= 0.95
