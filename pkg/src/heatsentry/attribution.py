"""Root-cause attribution by sparse input-bias optimization.

For each sample in a detected window, find the smallest additive bias that,
applied to the input, makes the autoencoder reconstruct it as normal. Features
needing large bias are the candidate root causes: the anomaly lives in them.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import backend
from .autoencoder import AEModel, empty_cond, reconstruct, _as_matrix
from .data import TimeSeriesFrame, format_instant
from .errors import NumericError, ValidationError
from .preprocess import conditioning_matrix, transform

DEFAULT_TOP_K = 3


@dataclass(frozen=True)
class ArcanaConfig:
    alpha: float = 0.8
    max_iters: int = 500
    step_size: float = 0.01
    convergence_tol: float = 1e-6

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValidationError("alpha must lie in [0, 1]")
        if self.max_iters < 1:
            raise ValidationError("max_iters must be >= 1")
        if self.step_size <= 0 or self.convergence_tol <= 0:
            raise ValidationError("step_size and convergence_tol must be positive")


def optimize_bias(model: AEModel, x, cond=None,
                  config: ArcanaConfig = ArcanaConfig()) -> np.ndarray:
    """Minimize (1-a)*0.5*||x_corr - AE(x_corr)||^2 + a*||x_corr - x||_1.

    x_corr = x + x_bias, initialized to the reconstruction error, descended
    with per-sample step halving; accepted steps strictly decrease the loss.
    """
    xm = np.ascontiguousarray(_as_matrix(x), dtype=np.float64)
    cm = empty_cond(xm.shape[0]) if cond is None else np.ascontiguousarray(
        _as_matrix(cond), dtype=np.float64
    )
    in_w, out_w, act, dec_idx = model.plan()
    bias, loss, _ = backend.arcana_descent(
        model.params, xm, cm, in_w, out_w, act, dec_idx,
        config.alpha, config.step_size, config.max_iters, config.convergence_tol,
    )
    if not np.all(np.isfinite(loss)):
        raise NumericError("bias optimization produced a non-finite loss")
    return bias[0] if np.asarray(x).ndim == 1 else bias


@dataclass
class ImportanceRanking:
    """Features sorted by normalized mean absolute bias, descending."""

    feature_names: list[str]
    importances: np.ndarray
    degenerate: bool = False

    def top(self, k: int = DEFAULT_TOP_K) -> list[tuple[str, float]]:
        k = min(k, len(self.feature_names))
        return [(self.feature_names[i], float(self.importances[i])) for i in range(k)]

    def to_dict(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "importances": [float(v) for v in self.importances],
            "degenerate": bool(self.degenerate),
        }


def aggregate_importances(bias_vectors, feature_names: list[str]) -> ImportanceRanking:
    """Mean |bias| per feature, normalized to sum 1; ties break by name."""
    b = np.atleast_2d(np.asarray(bias_vectors, dtype=np.float64))
    if b.shape[0] < 1 or b.size == 0:
        raise ValidationError("need at least one bias vector")
    if b.shape[1] != len(feature_names):
        raise ValidationError("bias width does not match feature names")
    raw = np.abs(b).mean(axis=0)
    total = raw.sum()
    degenerate = bool(total <= 0.0)
    if degenerate:
        warnings.warn(
            "all-zero bias vectors: attribution is degenerate, importances uniform",
            RuntimeWarning,
        )
        weights = np.full(len(feature_names), 1.0 / len(feature_names))
    else:
        weights = raw / total
    order = sorted(range(len(feature_names)), key=lambda i: (-weights[i], feature_names[i]))
    return ImportanceRanking(
        feature_names=[feature_names[i] for i in order],
        importances=weights[order],
        degenerate=degenerate,
    )


@dataclass
class FeatureSeries:
    name: str
    importance: float
    actual: np.ndarray
    reconstructed: np.ndarray


@dataclass
class AttributionReport:
    window_start: np.datetime64
    window_end: np.datetime64
    timestamps: np.ndarray
    ranking: ImportanceRanking
    series: list[FeatureSeries]

    def to_dict(self) -> dict:
        return {
            "window_start": format_instant(self.window_start),
            "window_end": format_instant(self.window_end),
            "n_samples": int(self.timestamps.shape[0]),
            "ranking": self.ranking.to_dict(),
            "top": [
                {"feature": s.name, "importance": s.importance} for s in self.series
            ],
        }


def attribution_report(model: AEModel, frame: TimeSeriesFrame, window,
                       config: ArcanaConfig = ArcanaConfig(),
                       top_k: int = DEFAULT_TOP_K) -> AttributionReport:
    """Rank root-cause candidates over a window and pair the top features'
    actual series with their reconstructions in original units."""
    if model.preprocessor is None:
        raise ValidationError("model carries no fitted preprocessor")
    start = np.datetime64(window[0], "s")
    end = np.datetime64(window[1], "s")
    if frame.n_samples == 0:
        raise ValidationError("frame is empty")
    if start < frame.timestamps[0] or end > frame.timestamps[-1] + np.timedelta64(600, "s"):
        raise ValidationError(
            f"window [{format_instant(start)}, {format_instant(end)}) outside frame range"
        )
    sub = frame.slice(start, end)
    if sub.n_samples == 0:
        raise ValidationError("window selects no samples")

    state = model.preprocessor
    x, _ = transform(sub, state)
    cond = conditioning_matrix(sub.timestamps, state.conditioning)
    bias = optimize_bias(model, x, cond, config)
    ranking = aggregate_importances(bias, state.kept_features)

    recon = reconstruct(model, x, cond)
    series = []
    for name, importance in ranking.top(top_k):
        j = state.kept_features.index(name)
        series.append(
            FeatureSeries(
                name=name,
                importance=importance,
                actual=sub.column(name),
                reconstructed=recon[:, j] * state.train_stds[j] + state.train_means[j],
            )
        )
    return AttributionReport(
        window_start=start,
        window_end=end,
        timestamps=sub.timestamps,
        ranking=ranking,
        series=series,
    )
