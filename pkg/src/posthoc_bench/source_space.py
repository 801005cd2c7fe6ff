"""Channel-to-source projections and synthetic ground-truth generators.

Two projections are provided: the anatomically constrained minimum-norm
inverse of a lead field, and a data-driven fastICA unmixing. Both expose
``matrix`` (sources x channels) and ``patterns`` (channels x sources) so the
labeling code can treat them alike.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateRankingError,
    InvalidBandError,
    InvalidIndexError,
    InvalidRegularizationError,
    InvalidRequestError,
    InvalidSizeError,
    ShapeError,
)
from .linalg import sym_eig
from .signal import TimeSeriesMatrix, analytic_signal, default_channel_labels

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LeadField:
    """Forward matrix ``A`` (channels x sources); columns are spatial patterns."""

    A: np.ndarray
    channel_labels: tuple[str, ...] = ()
    source_positions: np.ndarray | None = None

    def __post_init__(self):
        a = np.asarray(self.A, dtype=float)
        if a.ndim != 2 or a.shape[1] < 1:
            raise InvalidSizeError(f"lead field must be 2-D with >= 1 source, got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("lead field has non-finite entries")
        if np.any(np.all(a == 0, axis=0)):
            raise ValueError("lead field has an all-zero column")
        labels = tuple(self.channel_labels) or default_channel_labels(a.shape[0])
        if len(labels) != a.shape[0]:
            raise ShapeError(f"{len(labels)} labels for {a.shape[0]} channels")
        a.setflags(write=False)
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "channel_labels", labels)

    @property
    def n_channels(self) -> int:
        return self.A.shape[0]

    @property
    def n_sources(self) -> int:
        return self.A.shape[1]

    def average_referenced(self) -> LeadField:
        """Lead field matching common-average-referenced data."""
        return LeadField(self.A - self.A.mean(axis=0), self.channel_labels, self.source_positions)


@dataclass(frozen=True)
class InverseOperator:
    """Minimum-norm inverse ``M = A^T (lambda I + A A^T)^-1`` with identity source prior."""

    M: np.ndarray
    lam: float
    lead_field: LeadField
    source_prior_Q: str = "identity"
    kind: str = field(default="anatomical", init=False)

    @property
    def matrix(self) -> np.ndarray:
        return self.M

    @property
    def patterns(self) -> np.ndarray:
        return self.lead_field.A

    @property
    def n_sources(self) -> int:
        return self.M.shape[0]

    def apply(self, x: TimeSeriesMatrix) -> TimeSeriesMatrix:
        return apply_inverse(self, x)


@dataclass(frozen=True)
class UnmixingModel:
    """fastICA result: ``Phi`` (components x channels) and its pseudo-inverse patterns."""

    Phi: np.ndarray
    mixing: np.ndarray
    n_iterations: int
    converged: bool
    seed: int
    kind: str = field(default="data-driven", init=False)

    @property
    def matrix(self) -> np.ndarray:
        return self.Phi

    @property
    def patterns(self) -> np.ndarray:
        return self.mixing

    @property
    def n_sources(self) -> int:
        return self.Phi.shape[0]

    def apply(self, x: TimeSeriesMatrix) -> TimeSeriesMatrix:
        return _project(self.Phi, x)


@dataclass(frozen=True)
class SyntheticGroundTruth:
    target_source_index: int
    true_pattern: np.ndarray
    true_envelope: np.ndarray
    snr_db: float
    noise_sigma: float
    target_band: tuple[float, float]


def mne_inverse_operator(lead_field: LeadField, lam=1.0) -> InverseOperator:
    """Minimum-norm estimate operator. ``lam = 1`` gives the unscaled closed form."""
    if not lam > 0:
        raise InvalidRegularizationError(f"regularization must be positive, got {lam}")
    a = lead_field.A
    gram = a @ a.T + lam * np.eye(a.shape[0])
    m = np.linalg.solve(gram, a).T
    return InverseOperator(m, float(lam), lead_field)


def _project(matrix, x: TimeSeriesMatrix) -> TimeSeriesMatrix:
    if matrix.shape[1] != x.n_channels:
        raise ShapeError(
            f"projection expects {matrix.shape[1]} channels, recording has {x.n_channels}"
        )
    labels = tuple(f"S{i:04d}" for i in range(matrix.shape[0]))
    return TimeSeriesMatrix(matrix @ x.data, x.sample_rate_hz, labels)


def apply_inverse(op: InverseOperator, x: TimeSeriesMatrix) -> TimeSeriesMatrix:
    return _project(op.M, x)


def _sym_decorrelate(w):
    vals, vecs = np.linalg.eigh(w @ w.T)
    return (vecs / np.sqrt(vals)) @ vecs.T @ w


def fast_ica(x, n_components=None, seed=0, tol=1e-6, max_iter=1000) -> UnmixingModel:
    """Symmetric fastICA with the log-cosh contrast.

    Data are centered and PCA-whitened down to ``n_components`` dimensions,
    then all unmixing directions are updated in parallel with the fixed-point
    rule and re-orthogonalized each step. Convergence is declared when no
    direction changes by more than ``tol`` (``1 - |<w_new, w_old>|``).

    Parameters
    ----------
    x : TimeSeriesMatrix or ndarray
        Channels x samples.
    n_components : int, optional
        Defaults to the number of channels.
    seed : int
        Seeds the uniform random initial unmixing matrix.
    """
    data = x.data if isinstance(x, TimeSeriesMatrix) else np.asarray(x, dtype=float)
    n_channels, n_samples = data.shape
    n_components = n_channels if n_components is None else int(n_components)
    if not 1 <= n_components <= n_channels:
        raise InvalidRequestError(
            f"n_components must lie in [1, {n_channels}], got {n_components}"
        )
    centered = data - data.mean(axis=1, keepdims=True)
    cov = centered @ centered.T / n_samples
    pca = sym_eig((cov + cov.T) / 2)
    vals = pca.eigenvalues[:n_components]
    if vals[-1] <= 0:
        raise InvalidRequestError("data rank is below the requested number of components")
    whitener = pca.eigenvectors[:, :n_components].T / np.sqrt(vals)[:, None]
    white = whitener @ centered

    rng = np.random.default_rng(seed)
    w = _sym_decorrelate(rng.uniform(-1.0, 1.0, size=(n_components, n_components)))
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        g = np.tanh(w @ white)
        g_prime = 1.0 - g**2
        w_new = _sym_decorrelate(g @ white.T / n_samples - g_prime.mean(axis=1)[:, None] * w)
        change = np.max(np.abs(np.abs(np.einsum("ij,ij->i", w_new, w)) - 1.0))
        w = w_new
        if change < tol:
            converged = True
            break
    if not converged:
        logger.warning("fastICA did not converge within %d iterations", max_iter)
    phi = w @ whitener
    return UnmixingModel(phi, np.linalg.pinv(phi), it, converged, int(seed))


def relative_source_power(s) -> np.ndarray:
    """Rank-normalized source variance in [0, 1]; ties resolved by source index."""
    data = s.data if isinstance(s, TimeSeriesMatrix) else np.asarray(s, dtype=float)
    n_sources = data.shape[0]
    if n_sources < 2:
        raise DegenerateRankingError("relative power needs at least two sources")
    order = np.argsort(data.var(axis=1), kind="stable")
    ranks = np.empty(n_sources)
    ranks[order] = np.arange(n_sources)
    return ranks / (n_sources - 1)


def _channel_positions(n_channels):
    # Fibonacci lattice on the upper hemisphere of the unit sphere
    k = np.arange(n_channels) + 0.5
    z = 1.0 - k / n_channels
    r = np.sqrt(1.0 - z**2)
    phi = np.pi * (3.0 - np.sqrt(5.0)) * k
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def synth_lead_field(n_channels, n_sources, seed, smoothing=0.5) -> LeadField:
    """Random smooth pseudo-topographies with unit-norm columns.

    Channels sit on a hemisphere; each column is a random unit vector passed
    through a Gaussian adjacency kernel of width ``smoothing`` (chord length).
    """
    if n_channels < 2 or n_sources < 1:
        raise InvalidSizeError(
            f"need >= 2 channels and >= 1 source, got {n_channels} x {n_sources}"
        )
    rng = np.random.default_rng(seed)
    pos = _channel_positions(n_channels)
    dist2 = ((pos[:, None, :] - pos[None, :, :]) ** 2).sum(-1)
    kernel = np.exp(-dist2 / (2 * smoothing**2))
    raw = rng.standard_normal((n_channels, n_sources))
    raw /= np.linalg.norm(raw, axis=0)
    a = kernel @ raw
    a /= np.linalg.norm(a, axis=0)
    return LeadField(a)


def _band_mask(n_samples, sample_rate_hz, low_hz, high_hz):
    freqs = np.fft.rfftfreq(n_samples, 1.0 / sample_rate_hz)
    return freqs, (freqs >= low_hz) & (freqs <= high_hz)


def _unit_variance(rows):
    rows = rows - rows.mean(axis=-1, keepdims=True)
    return rows / rows.std(axis=-1, keepdims=True)


def pink_noise(n_rows, n_samples, sample_rate_hz, rng, exponent=1.0) -> np.ndarray:
    """Unit-variance noise with power spectrum ``1/f^exponent`` (zero DC)."""
    freqs = np.fft.rfftfreq(n_samples, 1.0 / sample_rate_hz)
    spectrum = rng.standard_normal((n_rows, freqs.size)) + 1j * rng.standard_normal(
        (n_rows, freqs.size)
    )
    gain = np.zeros_like(freqs)
    gain[1:] = freqs[1:] ** (-exponent / 2.0)
    return _unit_variance(np.fft.irfft(spectrum * gain, n=n_samples, axis=-1))


def band_limited_noise(n_samples, sample_rate_hz, low_hz, high_hz, rng) -> np.ndarray:
    """Unit-variance Gaussian noise with a flat spectrum restricted to [low, high] Hz."""
    freqs, mask = _band_mask(n_samples, sample_rate_hz, low_hz, high_hz)
    spectrum = (rng.standard_normal(freqs.size) + 1j * rng.standard_normal(freqs.size)) * mask
    return _unit_variance(np.fft.irfft(spectrum, n=n_samples))


def slow_envelope(n_samples, sample_rate_hz, rng, cutoff_hz=1.0) -> np.ndarray:
    """Rectified lowpass (<= ``cutoff_hz``) Gaussian noise, scaled to unit mean square."""
    lowest = sample_rate_hz / n_samples
    drive = band_limited_noise(n_samples, sample_rate_hz, lowest, cutoff_hz, rng)
    env = np.abs(drive)
    return env / np.sqrt(np.mean(env**2))


def synth_recording(
    lead_field: LeadField,
    duration_s,
    sample_rate_hz,
    target_band,
    target_source_index,
    snr_db,
    seed,
    *,
    noise_fraction=0.1,
    rms_v=3e-6,
    pink_exponent=1.0,
    envelope_cutoff_hz=1.0,
) -> tuple[TimeSeriesMatrix, SyntheticGroundTruth]:
    """Pseudo-EEG ``X = A S + E`` with one planted narrow-band target source.

    Background sources carry 1/f noise. The target is band-limited noise in
    ``target_band`` multiplied by a slow rectified envelope. Sensor noise
    power is ``noise_fraction`` of the background's sensor power; the target
    gain is then set so that the target's sensor power over the realized
    background-plus-noise power equals ``snr_db``. ``snr_db = -inf`` removes the target. The result is
    scaled to an average channel RMS of ``rms_v`` volts.
    """
    n_channels, n_sources = lead_field.A.shape
    if not 0 <= target_source_index < n_sources:
        raise InvalidIndexError(f"target index {target_source_index} outside [0, {n_sources})")
    low, high = target_band
    if not 0 < low < high < sample_rate_hz / 2:
        raise InvalidBandError(f"target band {target_band} invalid at {sample_rate_hz} Hz")
    n_samples = int(round(duration_s * sample_rate_hz))
    if n_samples < 4 * sample_rate_hz:
        raise InvalidSizeError("synthetic recordings must last at least 4 s")

    rng = np.random.default_rng(seed)
    sources = pink_noise(n_sources, n_samples, sample_rate_hz, rng, pink_exponent)
    carrier = band_limited_noise(n_samples, sample_rate_hz, low, high, rng)
    envelope = slow_envelope(n_samples, sample_rate_hz, rng, envelope_cutoff_hz)
    target = envelope * carrier
    sources[target_source_index] = 0.0

    a = lead_field.A
    background = a @ sources
    p_background = np.mean(background**2)
    sigma = np.sqrt(noise_fraction * p_background)
    rest = background + sigma * rng.standard_normal((n_channels, n_samples))
    pattern = a[:, target_source_index]
    p_target_unit = np.mean(np.outer(pattern, target) ** 2)
    if np.isneginf(snr_db):
        gain = 0.0
    else:
        gain = np.sqrt(10 ** (snr_db / 10) * np.mean(rest**2) / p_target_unit)

    x = rest + np.outer(pattern, gain * target)
    scale = rms_v / np.sqrt(np.mean(x**2))
    x *= scale
    truth = SyntheticGroundTruth(
        target_source_index=int(target_source_index),
        true_pattern=pattern.copy(),
        true_envelope=np.abs(analytic_signal(scale * gain * target)),
        snr_db=float(snr_db),
        noise_sigma=float(sigma * scale),
        target_band=(float(low), float(high)),
    )
    return TimeSeriesMatrix(x, sample_rate_hz, lead_field.channel_labels), truth
