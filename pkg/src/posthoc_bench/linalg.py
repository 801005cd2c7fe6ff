"""Covariance estimation, symmetric/generalized eigendecomposition and whitening."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoDataError, RankError, ShapeError, SymmetryError
from .signal import EpochSet

SYMMETRY_TOL = 1e-10


@dataclass(frozen=True)
class EigenSolution:
    """Eigenpairs sorted by descending eigenvalue; eigenvectors are columns.

    ``reduced_rank`` is set when the metric matrix had to be truncated to its
    numerical range before solving.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    reduced_rank: bool = False

    def __len__(self):
        return self.eigenvalues.shape[0]


def check_symmetric(m, name="matrix") -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"{name} must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    scale = np.abs(m).max() if m.size else 0.0
    if np.abs(m - m.T).max(initial=0.0) > SYMMETRY_TOL * scale:
        raise SymmetryError(f"{name} is not symmetric")
    return m


def _demeaned(epochs) -> np.ndarray:
    data = epochs.epochs if isinstance(epochs, EpochSet) else np.asarray(epochs, dtype=float)
    if data.ndim != 3 or data.shape[0] == 0:
        raise NoDataError("covariance needs at least one epoch")
    return data - data.mean(axis=2, keepdims=True)


def epoch_covariances(epochs) -> np.ndarray:
    """Per-epoch scatter matrices ``X(e) X(e)^T`` of channel-demeaned epochs."""
    data = _demeaned(epochs)
    return np.einsum("ect,edt->ecd", data, data)


def covariance(epochs) -> np.ndarray:
    """Average epoch scatter matrix, ``C = N^-1 sum_e X(e) X(e)^T``."""
    cov = epoch_covariances(epochs).mean(axis=0)
    return (cov + cov.T) / 2


def standardize(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    centered = z - z.mean()
    sd = centered.std()
    if sd == 0:
        return np.zeros_like(centered)
    return centered / sd


def weighted_covariance(epochs, z, standardize_z=True) -> np.ndarray:
    """Label-weighted scatter ``C_z = N^-1 sum_e z(e) X(e) X(e)^T``.

    With ``standardize_z`` the labels are centered and scaled to unit variance
    first; constant labels then yield the zero matrix.
    """
    covs = epoch_covariances(epochs)
    z = np.asarray(z, dtype=float)
    if z.shape != (covs.shape[0],):
        raise ShapeError(f"{z.shape[0] if z.ndim else 0} labels for {covs.shape[0]} epochs")
    if standardize_z:
        z = standardize(z)
    cz = np.einsum("e,ecd->cd", z, covs) / covs.shape[0]
    return (cz + cz.T) / 2


def _orient(vectors: np.ndarray) -> np.ndarray:
    # deterministic sign: the largest-magnitude entry of each column is positive
    idx = np.abs(vectors).argmax(axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def sym_eig(m) -> EigenSolution:
    """Eigendecomposition of a symmetric matrix, eigenvalues descending."""
    m = check_symmetric(m)
    vals, vecs = np.linalg.eigh(m)
    order = np.argsort(-vals, kind="stable")
    return EigenSolution(vals[order], _orient(vecs[:, order]))


def whiten(c, rank_tol=1e-10) -> np.ndarray:
    """Whitening transform ``P`` with ``P C P^T = I`` on the retained subspace.

    Full-rank input gives the symmetric inverse square root. Directions with
    eigenvalue below ``rank_tol * max eigenvalue`` are dropped, in which case
    ``P`` has fewer rows than columns.
    """
    sol = sym_eig(c)
    top = sol.eigenvalues[0] if len(sol) else 0.0
    if top <= 0:
        raise RankError("cannot whiten a matrix with no positive eigenvalues")
    keep = sol.eigenvalues > rank_tol * top
    vals, vecs = sol.eigenvalues[keep], sol.eigenvectors[:, keep]
    p = vecs.T / np.sqrt(vals)[:, None]
    if keep.all():
        p = vecs @ p
    return p


def shrink(c, shrinkage) -> np.ndarray:
    """Convex combination of ``C`` with its average-eigenvalue identity."""
    if not 0 <= shrinkage <= 1:
        raise ValueError(f"shrinkage must lie in [0, 1], got {shrinkage}")
    n = c.shape[0]
    return (1 - shrinkage) * c + shrinkage * (np.trace(c) / n) * np.eye(n)


def generalized_eig(c_z, c, shrinkage=1e-8, rank_tol=1e-10) -> EigenSolution:
    """Solve ``C_z w = lambda C w`` by whitening ``C`` and diagonalizing.

    Eigenvectors satisfy ``w^T C' w = 1`` where ``C'`` is the shrunk ``C``.
    If ``C'`` is rank deficient the problem is solved on its range and the
    result carries ``reduced_rank=True``.
    """
    c_z = check_symmetric(c_z, "C_z")
    c = check_symmetric(c, "C")
    if c_z.shape != c.shape:
        raise ShapeError(f"C_z {c_z.shape} and C {c.shape} differ in shape")
    c_reg = shrink(c, shrinkage)
    p = whiten(c_reg, rank_tol)
    inner = p @ c_z @ p.T
    sol = sym_eig((inner + inner.T) / 2)
    w = p.T @ sol.eigenvectors
    return EigenSolution(sol.eigenvalues, w, reduced_rank=p.shape[0] < c.shape[0])
