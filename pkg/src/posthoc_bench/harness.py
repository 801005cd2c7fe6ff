"""Chronological cross-validation, the three-parameter sweep, and marginalization."""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from itertools import product
from pathlib import Path

import numpy as np

from .errors import (
    InsufficientDataError,
    InvalidConfigError,
    InvalidDimensionError,
    UndefinedCorrelationError,
)
from .io import RESULTS_HEADER, format_float, parse_float
from .labeling import LabeledDataset, NoiseSpec, with_label_noise
from .spoc import correlation_metric, pattern_angle, spoc_predict, spoc_train

logger = logging.getLogger(__name__)


def chronological_folds(n_epochs, k) -> list[range]:
    """``k`` contiguous, ordered test ranges covering ``range(n_epochs)``.

    Sizes differ by at most one; the earliest folds take the remainder.
    """
    if k < 2:
        raise ValueError(f"need at least 2 folds, got {k}")
    if n_epochs < k:
        raise InsufficientDataError(f"{n_epochs} epochs cannot fill {k} folds")
    base, extra = divmod(n_epochs, k)
    folds, start = [], 0
    for i in range(k):
        stop = start + base + (1 if i < extra else 0)
        folds.append(range(start, stop))
        start = stop
    return folds


@dataclass(frozen=True)
class FoldResult:
    fold: int
    rho: float
    alpha_rad: float
    rho_clean: float
    n_train: int
    n_test: int


@dataclass(frozen=True)
class CVResult:
    mean_rho: float
    mean_alpha_rad: float
    pooled_rho: float
    folds: tuple[FoldResult, ...]


def _safe_corr(a, b):
    try:
        return correlation_metric(a, b)
    except UndefinedCorrelationError:
        return math.nan


def _nanmean(values):
    values = np.asarray(values, dtype=float)
    return float(np.nanmean(values)) if np.any(np.isfinite(values)) else math.nan


def run_cv(dataset: LabeledDataset, k=5, shrinkage=1e-8) -> CVResult:
    """Chronological k-fold evaluation of SPoC on the good epochs of ``dataset``.

    Each fold trains on all other folds and scores the held-out fold: ``rho``
    against the dataset labels, ``rho_clean`` against the pre-noise labels when
    present, and ``alpha`` against the ground-truth pattern when present.
    ``pooled_rho`` correlates the concatenated test predictions.
    """
    good = dataset.good()
    folds = chronological_folds(len(good), k)
    results, predictions = [], []
    for i, test_idx in enumerate(folds):
        test_idx = np.asarray(test_idx)
        train_idx = np.setdiff1d(np.arange(len(good)), test_idx)
        model = spoc_train(good.take(train_idx), shrinkage)
        test = good.take(test_idx)
        z_hat = spoc_predict(model, test.epochs)
        predictions.append(z_hat)
        alpha = math.nan
        if dataset.ground_truth_pattern is not None:
            alpha = pattern_angle(dataset.ground_truth_pattern, model.pattern)
        rho_clean = math.nan if test.clean_labels is None else _safe_corr(z_hat, test.clean_labels)
        results.append(
            FoldResult(i, _safe_corr(z_hat, test.labels), alpha, rho_clean, train_idx.size, test_idx.size)
        )
    return CVResult(
        mean_rho=_nanmean([r.rho for r in results]),
        mean_alpha_rad=_nanmean([r.alpha_rad for r in results]),
        pooled_rho=_safe_corr(np.concatenate(predictions), good.labels),
        folds=tuple(results),
    )


@dataclass
class SweepConfig:
    n_epochs_grid: list = field(default_factory=lambda: [50, 100, 250, 500, 750, 1000, 1500, 2000])
    xi_grid: list = field(default_factory=lambda: [0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95])
    source_power_quantiles: list = field(default_factory=lambda: [0.1, 0.25, 0.5, 0.75, 0.9, 1.0])
    evaluation_budget: int = 1300
    k_folds: int = 5
    seed: int = 0
    projection_kind: str = "anatomical"
    shrinkage: float = 1e-8
    band: tuple = (8.0, 12.0)
    window_s: float = 1.0
    p2p_uv: float = 80.0
    subsample: str = "first"
    n_ica_components: int = 20
    mne_lambda: float = 1.0
    n_jobs: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ("n_epochs_grid", "xi_grid", "source_power_quantiles"):
            if len(getattr(self, name)) == 0:
                raise InvalidConfigError(f"{name} must not be empty")
        if any(not 50 <= n <= 2000 or int(n) != n for n in self.n_epochs_grid):
            raise InvalidConfigError("n_epochs_grid entries must be integers in [50, 2000]")
        if any(not 0 <= xi < 1 for xi in self.xi_grid):
            raise InvalidConfigError("xi_grid entries must lie in [0, 1)")
        if any(not 0 <= q <= 1 for q in self.source_power_quantiles):
            raise InvalidConfigError("source_power_quantiles must lie in [0, 1]")
        if self.evaluation_budget < 1:
            raise InvalidConfigError("evaluation_budget must be >= 1")
        if self.k_folds < 2:
            raise InvalidConfigError("k_folds must be >= 2")
        if self.projection_kind not in ("anatomical", "data-driven"):
            raise InvalidConfigError(f"unknown projection_kind {self.projection_kind!r}")
        if self.subsample not in ("first", "random"):
            raise InvalidConfigError(f"unknown subsample mode {self.subsample!r}")


_LIST_FIELDS = {"n_epochs_grid": int, "xi_grid": float, "source_power_quantiles": float}


def parse_config(text) -> SweepConfig:
    """Parse ``key = value`` lines into a :class:`SweepConfig`; unknown keys are errors."""
    known = {f.name: f for f in fields(SweepConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (part.strip() for part in line.partition("="))
        if not sep:
            raise InvalidConfigError(f"line {lineno}: expected 'key = value'")
        if key not in known:
            raise InvalidConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            if key in _LIST_FIELDS:
                values[key] = [_LIST_FIELDS[key](v) for v in value.split(",") if v.strip()]
            elif key == "band":
                low, high = value.replace(":", ",").split(",")
                values[key] = (float(low), float(high))
            elif key in ("projection_kind", "subsample"):
                values[key] = value
            elif key in ("evaluation_budget", "k_folds", "seed", "n_ica_components", "n_jobs"):
                values[key] = int(value)
            else:
                values[key] = float(value)
        except ValueError as exc:
            raise InvalidConfigError(f"line {lineno}: bad value for {key}: {value!r}") from exc
    return SweepConfig(**values)


def load_config(path) -> SweepConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def format_config(config: SweepConfig) -> str:
    lines = []
    for f in fields(SweepConfig):
        value = getattr(config, f.name)
        if isinstance(value, (list, tuple)):
            value = ",".join(repr(v) if isinstance(v, float) else str(v) for v in value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ConfigPoint:
    config_id: int
    n_epochs: int
    xi: float
    rel_power: float


@dataclass(frozen=True)
class SweepResult:
    point: ConfigPoint
    mean_rho: float
    mean_alpha_rad: float
    fold_rho: tuple[float, ...]
    fold_alpha_rad: tuple[float, ...]
    seed: int
    recording_id: str = "rec0"
    pooled_rho: float = math.nan
    n_used: int = 0


def sample_configurations(config: SweepConfig) -> list[ConfigPoint]:
    """Seeded uniform draws from the grid product.

    Without replacement while the budget fits the grid, with replacement beyond.
    """
    grid = list(product(config.n_epochs_grid, config.xi_grid, config.source_power_quantiles))
    rng = np.random.default_rng(config.seed)
    budget = config.evaluation_budget
    picks = rng.choice(len(grid), size=budget, replace=budget > len(grid))
    return [
        ConfigPoint(i, int(grid[j][0]), float(grid[j][1]), float(grid[j][2]))
        for i, j in enumerate(picks)
    ]


def _point_seed(base_seed, config_id) -> int:
    return int(np.random.SeedSequence([base_seed, config_id]).generate_state(1)[0])


def evaluate_point(prepared, point: ConfigPoint, config: SweepConfig) -> SweepResult:
    """Select the source, subsample, inject label noise, and cross-validate one point."""
    source = prepared.select(quantile=point.rel_power)
    full = prepared.dataset(source)
    seed = _point_seed(config.seed, point.config_id)
    if config.subsample == "first":
        data = full.first_good(point.n_epochs)
    else:
        data = full.random_good(point.n_epochs, seed)
    if len(data) < point.n_epochs:
        logger.warning(
            "config %d: only %d good epochs available for n_epochs=%d",
            point.config_id, len(data), point.n_epochs,
        )
    data = with_label_noise(data, NoiseSpec(point.xi, seed))
    cv = run_cv(data, config.k_folds, config.shrinkage)
    return SweepResult(
        point,
        cv.mean_rho,
        cv.mean_alpha_rad,
        tuple(f.rho for f in cv.folds),
        tuple(f.alpha_rad for f in cv.folds),
        config.seed,
        prepared.recording_id,
        cv.pooled_rho,
        len(data),
    )


def result_rows(result: SweepResult) -> list[list[str]]:
    p = result.point
    return [
        [
            str(p.config_id),
            str(p.n_epochs),
            repr(p.xi),
            repr(p.rel_power),
            str(i),
            format_float(rho),
            format_float(alpha),
            str(result.seed),
        ]
        for i, (rho, alpha) in enumerate(zip(result.fold_rho, result.fold_alpha_rad))
    ]


def load_results(path, recording_id="rec0") -> list[SweepResult]:
    """Read a results CSV back into one :class:`SweepResult` per configuration."""
    groups: dict[int, list[dict]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != RESULTS_HEADER:
            raise InvalidConfigError(f"{path}: unexpected header {reader.fieldnames}")
        for row in reader:
            groups.setdefault(int(row["config_id"]), []).append(row)
    results = []
    for cid in sorted(groups):
        rows = sorted(groups[cid], key=lambda r: int(r["fold"]))
        first = rows[0]
        rho = tuple(parse_float(r["rho"]) for r in rows)
        alpha = tuple(parse_float(r["alpha_rad"]) for r in rows)
        point = ConfigPoint(cid, int(first["n_epochs"]), float(first["xi"]), float(first["rel_power"]))
        results.append(
            SweepResult(point, _nanmean(rho), _nanmean(alpha), rho, alpha, int(first["seed"]), recording_id)
        )
    return results


def run_sweep(config: SweepConfig, prepared, results_path=None) -> list[SweepResult]:
    """Evaluate sampled configurations on a prepared recording.

    Rows are appended to ``results_path`` in configuration order as results
    arrive. Configurations already complete in an existing file are skipped,
    which makes interrupted sweeps resumable.
    """
    config.validate()
    points = sample_configurations(config)
    done: dict[int, SweepResult] = {}
    if results_path is not None and Path(results_path).exists() and Path(results_path).stat().st_size:
        done = {
            r.point.config_id: r
            for r in load_results(results_path, prepared.recording_id)
            if len(r.fold_rho) == config.k_folds
        }
        _rewrite_complete(results_path, done)
    todo = [p for p in points if p.config_id not in done]

    sink = None
    if results_path is not None:
        new_file = not Path(results_path).exists() or Path(results_path).stat().st_size == 0
        sink = open(results_path, "a", newline="", encoding="utf-8")
        writer = csv.writer(sink, lineterminator="\n")
        if new_file:
            writer.writerow(RESULTS_HEADER)
            sink.flush()
    try:
        if config.n_jobs > 1:
            pool = ThreadPoolExecutor(config.n_jobs)
            stream = pool.map(lambda p: evaluate_point(prepared, p, config), todo)
        else:
            pool = None
            stream = (evaluate_point(prepared, p, config) for p in todo)
        for result in stream:
            done[result.point.config_id] = result
            if sink is not None:
                writer.writerows(result_rows(result))
                sink.flush()
        if pool is not None:
            pool.shutdown()
    finally:
        if sink is not None:
            sink.close()
    return [done[p.config_id] for p in points]


def _rewrite_complete(path, done):
    # drop partially written configurations before resuming
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULTS_HEADER)
        for cid in sorted(done):
            writer.writerows(result_rows(done[cid]))


DIMENSIONS = {
    "n_epochs": lambda p: p.n_epochs,
    "xi": lambda p: p.xi,
    "rel_power": lambda p: p.rel_power,
}


@dataclass(frozen=True)
class Marginal:
    value: float
    count: int
    rho_mean: float
    rho_std: float
    alpha_mean: float
    alpha_std: float


def marginalize(results, dimension) -> list[Marginal]:
    """Mean and standard deviation of both metrics per grid value of ``dimension``."""
    if dimension not in DIMENSIONS:
        raise InvalidDimensionError(f"unknown dimension {dimension!r}; use one of {sorted(DIMENSIONS)}")
    if not results:
        raise InsufficientDataError("nothing to marginalize")
    key = DIMENSIONS[dimension]
    groups: dict[float, list[SweepResult]] = {}
    for r in results:
        groups.setdefault(key(r.point), []).append(r)
    out = []
    for value in sorted(groups):
        rho = np.array([r.mean_rho for r in groups[value]])
        alpha = np.array([r.mean_alpha_rad for r in groups[value]])
        out.append(
            Marginal(value, len(rho), _nanmean(rho), _nanstd(rho), _nanmean(alpha), _nanstd(alpha))
        )
    return out


def _nanstd(values):
    values = np.asarray(values, dtype=float)
    return float(np.nanstd(values)) if np.any(np.isfinite(values)) else math.nan


MARGINAL_HEADER = ["value", "count", "rho_mean", "rho_std", "alpha_mean_rad", "alpha_std_rad"]


def marginal_rows(marginals) -> list[list[str]]:
    return [
        [repr(float(m.value)), str(m.count)]
        + [format_float(v) for v in (m.rho_mean, m.rho_std, m.alpha_mean, m.alpha_std)]
        for m in marginals
    ]
