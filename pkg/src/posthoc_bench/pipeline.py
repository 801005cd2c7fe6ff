"""Recording preparation shared by the CLI, the sweep and the experiment scripts."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .labeling import (
    LabeledDataset,
    SourceDescriptor,
    build_dataset,
    nearest_quantile,
    select_target_source,
)
from .signal import (
    TimeSeriesMatrix,
    bandpass,
    common_average_reference,
    hilbert_envelope,
    mark_artifacts,
    resample_rational,
)
from .source_space import (
    LeadField,
    UnmixingModel,
    fast_ica,
    mne_inverse_operator,
    relative_source_power,
)

TARGET_RATE_HZ = 120.0
BROADBAND = (0.2, 48.0)
DETECTION_BAND = (0.7, 25.0)
FILTER_ORDER = 5


def preprocess(x: TimeSeriesMatrix, target_rate_hz=TARGET_RATE_HZ, reference=True) -> TimeSeriesMatrix:
    """Broadband 0.2-48 Hz filter, rational resampling to ``target_rate_hz``, common average."""
    y = bandpass(x, *BROADBAND, FILTER_ORDER)
    ratio = Fraction(target_rate_hz / x.sample_rate_hz).limit_denominator(10_000)
    if ratio != 1:
        y = resample_rational(y, ratio.numerator, ratio.denominator)
    return common_average_reference(y) if reference else y


def select_components(model: UnmixingModel, components) -> UnmixingModel:
    """Restrict an unmixing model to the listed component rows."""
    idx = np.asarray(components, dtype=int)
    return UnmixingModel(
        model.Phi[idx], model.mixing[:, idx], model.n_iterations, model.converged, model.seed
    )


def make_projection(x: TimeSeriesMatrix, kind, *, lead_field: LeadField | None = None,
                    mne_lambda=1.0, n_components=20, components=None, seed=0):
    """Anatomical (minimum-norm on ``lead_field``) or data-driven (fastICA on ``x``) projection."""
    if kind == "anatomical":
        if lead_field is None:
            raise ValueError("the anatomical projection needs a lead field")
        return mne_inverse_operator(lead_field, mne_lambda)
    if kind == "data-driven":
        model = fast_ica(x, min(n_components, x.n_channels), seed=seed)
        return model if components is None else select_components(model, components)
    raise ValueError(f"unknown projection kind {kind!r}")


@dataclass
class PreparedRecording:
    """A recording filtered to the target band, with artifact marks and source powers.

    ``datasets`` caches labeled datasets per source index.
    """

    band_data: TimeSeriesMatrix
    artifact_mask: np.ndarray
    projection: object
    band: tuple[float, float]
    window_s: float
    relative_power: np.ndarray
    recording_id: str = "rec0"
    datasets: dict = field(default_factory=dict, repr=False)

    @property
    def n_good(self) -> int:
        return int((~self.artifact_mask).sum())

    def source_band_data(self) -> np.ndarray:
        return self.projection.matrix @ self.band_data.data

    def select(self, *, index=None, quantile=None, seed=None) -> int:
        if quantile is not None and index is None and seed is None:
            return nearest_quantile(self.relative_power, quantile)
        return select_target_source(
            self.source_band_data(), index=index, quantile=quantile, seed=seed
        )

    def dataset(self, source_index, power=True) -> LabeledDataset:
        key = (int(source_index), power)
        if key not in self.datasets:
            s_z = self.projection.matrix[source_index] @ self.band_data.data
            z = hilbert_envelope(s_z)
            self.datasets[key] = build_dataset(
                self.band_data,
                z,
                self.window_s,
                self.artifact_mask,
                band=self.band,
                source=SourceDescriptor(
                    self.projection.kind, int(source_index), float(self.relative_power[source_index])
                ),
                ground_truth_pattern=self.projection.patterns[:, source_index],
                power=power,
            )
        return self.datasets[key]


def prepare_recording(
    x: TimeSeriesMatrix,
    projection,
    band=(8.0, 12.0),
    window_s=1.0,
    p2p_threshold_v=80e-6,
    recording_id="rec0",
    detect_artifacts=True,
) -> PreparedRecording:
    """Filter to the target band, mark artifacts in the detection band, rank sources.

    Relative source power is ranked on the band-passed source time courses.
    """
    band_data = bandpass(x, band[0], band[1], FILTER_ORDER)
    if detect_artifacts:
        detect = bandpass(x, *DETECTION_BAND, FILTER_ORDER)
        mask = mark_artifacts(detect, window_s, p2p_threshold_v)
    else:
        n_epochs = x.n_samples // int(round(window_s * x.sample_rate_hz))
        mask = np.zeros(n_epochs, dtype=bool)
    rel = relative_source_power(projection.matrix @ band_data.data)
    return PreparedRecording(
        band_data, mask, projection, tuple(band), float(window_s), rel, recording_id
    )
