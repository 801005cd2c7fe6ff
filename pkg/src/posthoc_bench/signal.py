"""Deterministic signal kernels: filtering, referencing, resampling, envelopes, epoching."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sps

from .errors import (
    DegenerateReferenceError,
    InsufficientSamplesError,
    InvalidBandError,
    InvalidFactorError,
    InvalidOrderError,
    InvalidThresholdError,
)


@dataclass(frozen=True)
class TimeSeriesMatrix:
    """Continuous multichannel recording, ``data`` is channels x samples (volts)."""

    data: np.ndarray
    sample_rate_hz: float
    channel_labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        data = np.atleast_2d(np.asarray(self.data, dtype=float))
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError(f"expected a non-empty 2-D array, got shape {data.shape}")
        if not self.sample_rate_hz > 0:
            raise ValueError("sample_rate_hz must be positive")
        if not np.all(np.isfinite(data)):
            raise ValueError("recording contains non-finite values")
        labels = tuple(self.channel_labels) or default_channel_labels(data.shape[0])
        if len(labels) != data.shape[0]:
            raise ValueError(f"{len(labels)} channel labels for {data.shape[0]} channels")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))
        object.__setattr__(self, "channel_labels", labels)

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate_hz

    def with_data(self, data, sample_rate_hz=None, channel_labels=None) -> TimeSeriesMatrix:
        return TimeSeriesMatrix(
            data,
            self.sample_rate_hz if sample_rate_hz is None else sample_rate_hz,
            self.channel_labels if channel_labels is None else channel_labels,
        )


def default_channel_labels(n: int) -> tuple[str, ...]:
    return tuple(f"Ch{i + 1:02d}" for i in range(n))


@dataclass(frozen=True)
class IIRFilterSpec:
    """Digital Butterworth bandpass realized as second-order sections.

    ``sos`` has one row ``[b0, b1, b2, a0, a1, a2]`` per section.
    """

    low_hz: float
    high_hz: float
    order: int
    sample_rate_hz: float
    sos: np.ndarray

    @property
    def padlen(self) -> int:
        return 3 * (2 * self.order)

    def poles(self) -> np.ndarray:
        return np.concatenate([np.roots(sec[3:]) for sec in self.sos])

    def is_stable(self) -> bool:
        return bool(np.all(np.abs(self.poles()) < 1.0))

    def response(self, freqs_hz) -> np.ndarray:
        """Complex frequency response at ``freqs_hz``."""
        _, h = sps.sosfreqz(self.sos, worN=np.atleast_1d(freqs_hz), fs=self.sample_rate_hz)
        return h


@dataclass(frozen=True)
class EpochSet:
    """Non-overlapping, chronologically ordered epochs of shape (N_e, N_c, L)."""

    epochs: np.ndarray
    window_s: float
    epoch_starts: np.ndarray
    sample_rate_hz: float
    channel_labels: tuple[str, ...] = ()

    def __post_init__(self):
        epochs = np.asarray(self.epochs, dtype=float)
        if epochs.ndim != 3:
            raise ValueError(f"epochs must be 3-D (N_e, N_c, L), got {epochs.shape}")
        starts = np.asarray(self.epoch_starts, dtype=np.int64)
        if starts.shape != (epochs.shape[0],):
            raise ValueError("one start index per epoch required")
        if np.any(np.diff(starts) < epochs.shape[2]):
            raise ValueError("epochs must be non-overlapping and chronologically ordered")
        epochs.setflags(write=False)
        starts.setflags(write=False)
        object.__setattr__(self, "epochs", epochs)
        object.__setattr__(self, "epoch_starts", starts)
        object.__setattr__(self, "channel_labels", tuple(self.channel_labels))

    def __len__(self) -> int:
        return self.epochs.shape[0]

    @property
    def n_channels(self) -> int:
        return self.epochs.shape[1]

    @property
    def epoch_length(self) -> int:
        return self.epochs.shape[2]

    def subset(self, index) -> EpochSet:
        """Epochs selected by an index array or boolean mask, order preserved."""
        index = np.asarray(index)
        if index.dtype == bool:
            index = np.flatnonzero(index)
        index = np.sort(index)
        return EpochSet(
            self.epochs[index],
            self.window_s,
            self.epoch_starts[index],
            self.sample_rate_hz,
            self.channel_labels,
        )

    def concatenate(self) -> np.ndarray:
        """Channels x (N_e * L) array of the epochs laid end to end."""
        n_e, n_c, length = self.epochs.shape
        return self.epochs.transpose(1, 0, 2).reshape(n_c, n_e * length)


def _check_band(low_hz, high_hz, sample_rate_hz):
    nyquist = sample_rate_hz / 2.0
    if not (0 < low_hz < high_hz < nyquist):
        raise InvalidBandError(
            f"band ({low_hz}, {high_hz}) Hz invalid for sample rate {sample_rate_hz} Hz "
            f"(need 0 < low < high < {nyquist})"
        )


def design_butterworth_bandpass(low_hz, high_hz, order, sample_rate_hz) -> IIRFilterSpec:
    """Butterworth bandpass via analog prototype, pre-warped bilinear transform, SOS output.

    ``order`` is the order of the analog lowpass prototype; the resulting
    digital bandpass has ``2 * order`` poles.
    """
    if int(order) != order or order < 1:
        raise InvalidOrderError(f"filter order must be a positive integer, got {order}")
    _check_band(low_hz, high_hz, sample_rate_hz)
    sos = sps.butter(
        int(order), [low_hz, high_hz], btype="bandpass", output="sos", fs=sample_rate_hz
    )
    return IIRFilterSpec(float(low_hz), float(high_hz), int(order), float(sample_rate_hz), sos)


def filtfilt(spec: IIRFilterSpec, x: TimeSeriesMatrix) -> TimeSeriesMatrix:
    """Zero-phase forward-backward filtering with odd-reflection edge padding."""
    if x.n_samples <= spec.padlen:
        raise InsufficientSamplesError(
            f"need more than {spec.padlen} samples for order-{spec.order} zero-phase "
            f"filtering, got {x.n_samples}"
        )
    if not np.isclose(x.sample_rate_hz, spec.sample_rate_hz):
        raise ValueError(
            f"filter designed for {spec.sample_rate_hz} Hz applied to {x.sample_rate_hz} Hz data"
        )
    y = sps.sosfiltfilt(spec.sos, x.data, axis=-1, padtype="odd", padlen=spec.padlen)
    return x.with_data(y)


def bandpass(x: TimeSeriesMatrix, low_hz, high_hz, order=5) -> TimeSeriesMatrix:
    return filtfilt(design_butterworth_bandpass(low_hz, high_hz, order, x.sample_rate_hz), x)


def common_average_reference(x: TimeSeriesMatrix) -> TimeSeriesMatrix:
    if x.n_channels < 2:
        raise DegenerateReferenceError("common average reference needs at least 2 channels")
    return x.with_data(x.data - x.data.mean(axis=0, keepdims=True))


def decimate(x: TimeSeriesMatrix, factor: int) -> TimeSeriesMatrix:
    """Keep every ``factor``-th sample. Anti-alias filtering is left to the caller."""
    if int(factor) != factor or factor < 1:
        raise InvalidFactorError(f"decimation factor must be a positive integer, got {factor}")
    factor = int(factor)
    return x.with_data(x.data[:, ::factor], sample_rate_hz=x.sample_rate_hz / factor)


def resample_rational(x: TimeSeriesMatrix, up: int, down: int) -> TimeSeriesMatrix:
    """Polyphase resampling by ``up/down`` with a linear-phase FIR anti-alias stage."""
    if up < 1 or down < 1:
        raise InvalidFactorError("resampling factors must be positive integers")
    y = sps.resample_poly(x.data, up, down, axis=-1)
    return x.with_data(y, sample_rate_hz=x.sample_rate_hz * up / down)


def analytic_signal(x) -> np.ndarray:
    """Analytic signal along the last axis by one-sided spectrum construction."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    spectrum = np.fft.fft(x, axis=-1)
    gain = np.zeros(n)
    gain[0] = 1.0
    if n % 2 == 0:
        gain[n // 2] = 1.0
        gain[1 : n // 2] = 2.0
    else:
        gain[1 : (n + 1) // 2] = 2.0
    return np.fft.ifft(spectrum * gain, axis=-1)


def hilbert_envelope(x) -> np.ndarray:
    """Instantaneous amplitude ``|analytic(x)|``; works row-wise on 2-D input."""
    x = np.asarray(x, dtype=float)
    if x.size == 0 or x.shape[-1] < 8:
        raise InsufficientSamplesError("envelope needs at least 8 samples")
    return np.abs(analytic_signal(x))


def epoch_length(window_s, sample_rate_hz) -> int:
    length = int(round(window_s * sample_rate_hz))
    if length < 1:
        raise ValueError(f"window of {window_s} s is shorter than one sample")
    return length


def epoch(x: TimeSeriesMatrix, window_s: float) -> EpochSet:
    """Cut ``x`` into ``floor(N_t / L)`` non-overlapping windows; the remainder is dropped."""
    length = epoch_length(window_s, x.sample_rate_hz)
    n_epochs = x.n_samples // length
    data = x.data[:, : n_epochs * length].reshape(x.n_channels, n_epochs, length)
    return EpochSet(
        data.transpose(1, 0, 2),
        float(window_s),
        np.arange(n_epochs) * length,
        x.sample_rate_hz,
        x.channel_labels,
    )


def peak_to_peak(epochs: EpochSet) -> np.ndarray:
    """Largest per-channel peak-to-peak amplitude of each epoch."""
    if len(epochs) == 0:
        return np.zeros(0)
    return np.ptp(epochs.epochs, axis=2).max(axis=1)


def mark_artifacts(x_detect: TimeSeriesMatrix, window_s: float, p2p_threshold: float) -> np.ndarray:
    """Boolean mask, True where any channel's peak-to-peak exceeds ``p2p_threshold``."""
    if not p2p_threshold > 0:
        raise InvalidThresholdError(f"peak-to-peak threshold must be positive, got {p2p_threshold}")
    return peak_to_peak(epoch(x_detect, window_s)) > p2p_threshold
