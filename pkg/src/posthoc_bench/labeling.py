"""Post-hoc labeling: turn any recording plus a source projection into a labeled dataset.

The pipeline is: bandpass the recording, project it to source space, pick a
target source, take the Hilbert envelope of that source as the continuous
label, then epoch data and envelope together.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    DegenerateLabelsError,
    InvalidIndexError,
    InvalidNoiseError,
    ShapeError,
)
from .signal import (
    EpochSet,
    TimeSeriesMatrix,
    bandpass,
    epoch,
    hilbert_envelope,
)
from .source_space import relative_source_power


@dataclass(frozen=True)
class SourceDescriptor:
    projection: str
    source_index: int
    relative_power: float


@dataclass(frozen=True)
class LabeledDataset:
    """Band-passed epochs with one label per epoch.

    Artifactual epochs stay in ``epochs`` and are excluded through
    ``good_mask``. ``clean_labels`` holds the labels before noise injection
    when ``labels`` has been degraded.
    """

    epochs: EpochSet
    labels: np.ndarray
    good_mask: np.ndarray
    band: tuple[float, float]
    source: SourceDescriptor | None = None
    ground_truth_pattern: np.ndarray | None = None
    clean_labels: np.ndarray | None = None

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=float)
        mask = np.asarray(self.good_mask, dtype=bool)
        n = len(self.epochs)
        if labels.shape != (n,) or mask.shape != (n,):
            raise ShapeError(
                f"{labels.shape[0]} labels and {mask.shape[0]} mask entries for {n} epochs"
            )
        if self.clean_labels is not None:
            object.__setattr__(self, "clean_labels", np.asarray(self.clean_labels, dtype=float))
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "good_mask", mask)
        object.__setattr__(self, "band", tuple(float(b) for b in self.band))

    def __len__(self):
        return len(self.epochs)

    @property
    def n_good(self) -> int:
        return int(self.good_mask.sum())

    def good(self) -> LabeledDataset:
        """Only the good epochs, in chronological order."""
        return self.take(np.flatnonzero(self.good_mask))

    def take(self, index) -> LabeledDataset:
        index = np.sort(np.asarray(index, dtype=np.int64))
        return replace(
            self,
            epochs=self.epochs.subset(index),
            labels=self.labels[index],
            good_mask=self.good_mask[index],
            clean_labels=None if self.clean_labels is None else self.clean_labels[index],
        )

    def first_good(self, n_epochs) -> LabeledDataset:
        """The chronologically first ``n_epochs`` good epochs."""
        return self.take(np.flatnonzero(self.good_mask)[:n_epochs])

    def random_good(self, n_epochs, seed) -> LabeledDataset:
        good = np.flatnonzero(self.good_mask)
        rng = np.random.default_rng(seed)
        return self.take(rng.choice(good, size=min(n_epochs, good.size), replace=False))

    def with_labels(self, labels) -> LabeledDataset:
        clean = self.labels if self.clean_labels is None else self.clean_labels
        return replace(self, labels=labels, clean_labels=clean)


@dataclass(frozen=True)
class NoiseSpec:
    xi: float
    seed: int = 0
    literal: bool = False

    def __post_init__(self):
        if not 0 <= self.xi < 1:
            raise InvalidNoiseError(f"label noise xi must lie in [0, 1), got {self.xi}")


def nearest_quantile(relative_power, quantile) -> int:
    """Index whose relative power is nearest ``quantile``, lower index on ties."""
    if not 0 <= quantile <= 1:
        raise ValueError(f"quantile must lie in [0, 1], got {quantile}")
    dist = np.abs(np.asarray(relative_power) - quantile)
    # rank/(N-1) arithmetic makes exact ties round differently
    return int(np.flatnonzero(dist <= dist.min() + 1e-12)[0])


def select_target_source(s, *, index=None, quantile=None, seed=None) -> int:
    """Pick a source by explicit ``index``, relative-power ``quantile``, or at random.

    Exactly one criterion must be given. The quantile rule returns the source
    whose relative power is closest to ``quantile``, lower index on ties.
    """
    data = s.data if isinstance(s, TimeSeriesMatrix) else np.asarray(s)
    n_sources = data.shape[0]
    given = [c is not None for c in (index, quantile, seed)]
    if sum(given) != 1:
        raise ValueError("give exactly one of index, quantile, seed")
    if index is not None:
        if not 0 <= index < n_sources:
            raise InvalidIndexError(f"source index {index} outside [0, {n_sources})")
        return int(index)
    if quantile is not None:
        return nearest_quantile(relative_source_power(data), quantile)
    return int(np.random.default_rng(seed).integers(n_sources))


def source_time_course(x: TimeSeriesMatrix, projection, source_index) -> np.ndarray:
    matrix = projection.matrix
    if matrix.shape[1] != x.n_channels:
        raise ShapeError(
            f"projection expects {matrix.shape[1]} channels, recording has {x.n_channels}"
        )
    if not 0 <= source_index < matrix.shape[0]:
        raise InvalidIndexError(f"source index {source_index} outside [0, {matrix.shape[0]})")
    return matrix[source_index] @ x.data


def extract_labels(x: TimeSeriesMatrix, projection, band, source_index, order=5, prefiltered=False):
    """Continuous envelope label ``z`` and the band-limited target source ``s_z``.

    ``x`` is band-passed (zero-phase, order-``order`` Butterworth) unless
    ``prefiltered`` says it already is.
    """
    xb = x if prefiltered else bandpass(x, band[0], band[1], order)
    s_z = source_time_course(xb, projection, source_index)
    return hilbert_envelope(s_z), s_z


def epoch_labels(z, window_s, sample_rate_hz, power=True) -> np.ndarray:
    """Per-epoch label: mean of ``z**2`` (default) or of ``z`` over each window."""
    z = np.asarray(z, dtype=float)
    zs = epoch(TimeSeriesMatrix(z[None, :], sample_rate_hz), window_s).epochs[:, 0, :]
    return np.mean(zs**2 if power else zs, axis=1)


def build_dataset(
    x: TimeSeriesMatrix,
    z,
    window_s,
    artifact_mask=None,
    *,
    band,
    source=None,
    ground_truth_pattern=None,
    power=True,
) -> LabeledDataset:
    """Epoch band-passed data and its envelope into a :class:`LabeledDataset`.

    ``artifact_mask`` is True for artifactual epochs; those are kept but
    marked not-good.
    """
    z = np.asarray(z, dtype=float)
    if z.shape != (x.n_samples,):
        raise ShapeError(f"label length {z.shape} does not match {x.n_samples} samples")
    epochs = epoch(x, window_s)
    labels = epoch_labels(z, window_s, x.sample_rate_hz, power)
    if artifact_mask is None:
        good = np.ones(len(epochs), dtype=bool)
    else:
        artifact_mask = np.asarray(artifact_mask, dtype=bool)
        if artifact_mask.shape != (len(epochs),):
            raise ShapeError(
                f"artifact mask has {artifact_mask.shape[0]} entries for {len(epochs)} epochs"
            )
        good = ~artifact_mask
    return LabeledDataset(
        epochs,
        labels,
        good,
        band,
        source,
        None if ground_truth_pattern is None else np.asarray(ground_truth_pattern, dtype=float),
    )


def add_label_noise(z, spec: NoiseSpec) -> np.ndarray:
    """Degrade labels so that ``corr(z, z_n)`` is ``1 - xi`` in expectation.

    ``z_n = z + sqrt((1 - rho^2) / rho^2) * std(z) * eta`` with ``rho = 1 - xi``.
    ``spec.literal`` switches to the coefficient ``(1 - rho^2) / rho^2 * var(z)``
    without the square root, kept for comparison.
    """
    z = np.asarray(z, dtype=float)
    if z.size < 2:
        raise DegenerateLabelsError("label noise needs at least two epochs")
    var = z.var()
    if var == 0:
        raise DegenerateLabelsError("labels have zero variance")
    if spec.xi == 0:
        return z.copy()
    rho = 1.0 - spec.xi
    ratio = (1.0 - rho**2) / rho**2
    coef = ratio * var if spec.literal else np.sqrt(ratio * var)
    eta = np.random.default_rng(spec.seed).standard_normal(z.size)
    return z + coef * eta


def with_label_noise(dataset: LabeledDataset, spec: NoiseSpec) -> LabeledDataset:
    """Return ``dataset`` with noise injected into the labels of its good epochs."""
    noisy = dataset.labels.copy()
    good = dataset.good_mask
    noisy[good] = add_label_noise(dataset.labels[good], spec)
    return dataset.with_labels(noisy)
