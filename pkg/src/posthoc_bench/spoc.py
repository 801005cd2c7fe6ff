"""Source power comodulation (SPoC): training, prediction, and accuracy metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateLabelsError,
    InsufficientDataError,
    InvalidPatternError,
    ShapeError,
    UndefinedCorrelationError,
)
from .labeling import LabeledDataset
from .linalg import EigenSolution, covariance, generalized_eig, weighted_covariance
from .signal import EpochSet


@dataclass(frozen=True)
class SpocModel:
    """Strongest SPoC component: filter ``w``, pattern, eigenvalue and training covariance.

    ``spectrum`` keeps the full generalized eigendecomposition for diagnostics.
    """

    w: np.ndarray
    pattern: np.ndarray
    eigenvalue: float
    band: tuple[float, float]
    training_C: np.ndarray
    spectrum: EigenSolution | None = None


def spoc_train(dataset: LabeledDataset, shrinkage=1e-8, standardize_z=True, by_magnitude=False) -> SpocModel:
    """Fit a single SPoC filter on the good epochs of ``dataset``.

    The filter is the generalized eigenvector of ``(C_z, C)`` with the largest
    eigenvalue (largest ``|lambda|`` if ``by_magnitude``). Its pattern is
    ``C w / (w^T C w)``.
    """
    train = dataset.good() if not dataset.good_mask.all() else dataset
    if len(train) < 2:
        raise InsufficientDataError("SPoC needs at least two good epochs")
    z = train.labels
    if np.ptp(z) == 0 or not np.all(np.isfinite(z)):
        raise DegenerateLabelsError("labels are constant or non-finite")
    c = covariance(train.epochs)
    c_z = weighted_covariance(train.epochs, z, standardize_z)
    sol = generalized_eig(c_z, c, shrinkage)
    k = int(np.argmax(np.abs(sol.eigenvalues))) if by_magnitude else 0
    w = sol.eigenvectors[:, k]
    pattern = c @ w / (w @ c @ w)
    return SpocModel(w, pattern, float(sol.eigenvalues[k]), dataset.band, c, sol)


def filtered_power(w, epochs) -> np.ndarray:
    data = epochs.epochs if isinstance(epochs, EpochSet) else np.asarray(epochs, dtype=float)
    if data.ndim != 3 or data.shape[1] != w.shape[0]:
        raise ShapeError(f"filter has {w.shape[0]} channels, epochs have shape {data.shape}")
    return np.var(np.einsum("c,ect->et", w, data), axis=1)


def spoc_predict(model: SpocModel, epochs) -> np.ndarray:
    """Per-epoch band-power estimate ``var[w^T X(e)]``."""
    return filtered_power(model.w, epochs)


def correlation_metric(z_hat, z) -> float:
    """Pearson correlation between predicted and true per-epoch labels."""
    z_hat = np.asarray(z_hat, dtype=float)
    z = np.asarray(z, dtype=float)
    if z_hat.shape != z.shape or z.ndim != 1:
        raise ShapeError(f"shapes {z_hat.shape} and {z.shape} do not match")
    if z.size < 2:
        raise UndefinedCorrelationError("correlation needs at least two values")
    a = z_hat - z_hat.mean()
    b = z - z.mean()
    denom = np.sqrt((a @ a) * (b @ b))
    if denom == 0:
        raise UndefinedCorrelationError("correlation undefined for constant input")
    return float(np.clip((a @ b) / denom, -1.0, 1.0))


def pattern_angle(a_true, a_est) -> float:
    """Sign-folded angle in [0, pi/2] between two spatial patterns."""
    a_true = np.asarray(a_true, dtype=float)
    a_est = np.asarray(a_est, dtype=float)
    n1, n2 = np.linalg.norm(a_true), np.linalg.norm(a_est)
    if n1 == 0 or n2 == 0:
        raise InvalidPatternError("pattern vectors must be non-zero")
    alpha = float(np.arccos(np.clip(a_true @ a_est / (n1 * n2), -1.0, 1.0)))
    return alpha if alpha <= np.pi / 2 else np.pi - alpha
