"""Anomaly scores, the 99th-percentile flag threshold, and the criticality counter.

A point's anomaly score condenses its reconstruction-error vector r = x - x~
either to sqrt(mean(r^2)) or to the Mahalanobis distance of r under the
training-error distribution. Points whose score strictly exceeds t_AE (the
99th percentile of training scores) raise flags; the criticality counter turns
flag runs into eventwise detections.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass

import numpy as np

from . import backend
from .autoencoder import AEModel, empty_cond, reconstruct
from .data import Disturbance
from .errors import NumericError, ValidationError

SCORE_TYPES = ("rmse", "mahalanobis")
TIKHONOV_SCALE = 1e-6
THRESHOLD_PERCENTILE = 99.0
MIN_FIT_ROWS = 100
SETTLE_HOURS = 4.0


@dataclass
class ScoreModel:
    score_type: str
    t_ae: float
    training_error_mean: np.ndarray | None = None
    covariance_inverse: np.ndarray | None = None
    regularization: float | None = None

    def to_dict(self) -> dict:
        doc = {"score_type": self.score_type, "t_ae": self.t_ae}
        if self.score_type == "mahalanobis":
            cov = np.ascontiguousarray(self.covariance_inverse, dtype="<f8")
            doc["training_error_mean"] = [float(v) for v in self.training_error_mean]
            doc["covariance_inverse"] = {
                "shape": list(cov.shape),
                "dtype": "<f8",
                "order": "row-major",
                "base64": base64.b64encode(cov.tobytes()).decode("ascii"),
            }
            doc["regularization"] = self.regularization
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ScoreModel":
        if doc["score_type"] == "rmse":
            return cls(score_type="rmse", t_ae=float(doc["t_ae"]))
        spec = doc["covariance_inverse"]
        cov = np.frombuffer(base64.b64decode(spec["base64"]), dtype="<f8").reshape(
            spec["shape"]
        )
        return cls(
            score_type="mahalanobis",
            t_ae=float(doc["t_ae"]),
            training_error_mean=np.asarray(doc["training_error_mean"], dtype=np.float64),
            covariance_inverse=cov.astype(np.float64),
            regularization=doc.get("regularization"),
        )


def rmse_scores(residuals: np.ndarray) -> np.ndarray:
    r = np.atleast_2d(residuals)
    return np.sqrt((r * r).mean(axis=1))


def mahalanobis_scores(residuals: np.ndarray, mean: np.ndarray, cov_inverse: np.ndarray) -> np.ndarray:
    d = np.atleast_2d(residuals) - mean
    q = ((d @ cov_inverse) * d).sum(axis=1)
    return np.sqrt(np.maximum(q, 0.0))


def fit_score_model(model: AEModel, matrix: np.ndarray, cond=None,
                    score_type: str = "mahalanobis") -> ScoreModel:
    """Fit score statistics and t_AE on the model's masked training rows.

    The error covariance uses the population (1/N) convention and a Tikhonov
    ridge of 1e-6 * trace / d before inversion.
    """
    if score_type not in SCORE_TYPES:
        raise ValidationError(f"unknown score_type {score_type!r}")
    x = np.asarray(matrix, dtype=np.float64)
    if x.shape[0] < MIN_FIT_ROWS:
        raise ValidationError(f"need at least {MIN_FIT_ROWS} rows to fit, got {x.shape[0]}")
    with np.errstate(over="ignore", invalid="ignore"):
        residuals = x - reconstruct(model, x, cond)
    if not np.all(np.isfinite(residuals)):
        raise NumericError("non-finite reconstruction errors in training rows")

    if score_type == "rmse":
        scores = rmse_scores(residuals)
        return ScoreModel(score_type="rmse", t_ae=float(np.percentile(scores, THRESHOLD_PERCENTILE)))

    mean = residuals.mean(axis=0)
    centered = residuals - mean
    cov = (centered.T @ centered) / centered.shape[0]
    lam = TIKHONOV_SCALE * float(np.trace(cov)) / cov.shape[0]
    cov = cov + lam * np.eye(cov.shape[0])
    try:
        inv = np.linalg.inv(cov)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"training-error covariance not invertible: {exc}") from exc
    if not np.all(np.isfinite(inv)):
        raise NumericError("training-error covariance inverse is not finite")
    inv = (inv + inv.T) / 2.0
    scores = mahalanobis_scores(residuals, mean, inv)
    return ScoreModel(
        score_type="mahalanobis",
        t_ae=float(np.percentile(scores, THRESHOLD_PERCENTILE)),
        training_error_mean=mean,
        covariance_inverse=inv,
        regularization=lam,
    )


def score_points(score_model: ScoreModel, model: AEModel, matrix: np.ndarray,
                 cond=None) -> tuple[np.ndarray, np.ndarray]:
    """Per-row anomaly scores and flags; a flag needs score strictly > t_AE."""
    x = np.asarray(matrix, dtype=np.float64)
    residuals = x - reconstruct(model, x, cond)
    if score_model.score_type == "rmse":
        scores = rmse_scores(residuals)
    else:
        scores = mahalanobis_scores(
            residuals, score_model.training_error_mean, score_model.covariance_inverse
        )
    return scores, scores > score_model.t_ae


@dataclass
class CriticalitySeries:
    """Counter trace: +1 on a flag, -1 (floor 0) otherwise, held when frozen.

    Data gaps need no special casing: absent rows simply contribute no step,
    so the counter carries over unchanged across them.
    """

    counter: np.ndarray
    flags: np.ndarray
    maintenance_mask: np.ndarray
    timestamps: np.ndarray | None = None
    scores: np.ndarray | None = None

    @property
    def c_max(self) -> int:
        return int(self.counter.max()) if self.counter.size else 0

    def first_crossing(self, c_thr: int) -> int | None:
        hits = np.nonzero(self.counter >= c_thr)[0]
        return int(hits[0]) if hits.size else None


@dataclass(frozen=True)
class Detection:
    detected: bool
    c_max: int
    index: int | None = None
    t_detect: np.datetime64 | None = None


@dataclass(frozen=True)
class DetectionConfig:
    c_thr: int = 17
    samples_per_hour: float = 6.0

    def __post_init__(self):
        if self.c_thr < 1:
            raise ValidationError("c_thr must be >= 1")
        if self.samples_per_hour <= 0:
            raise ValidationError("samples_per_hour must be positive")

    @property
    def detection_delay_hours(self) -> float:
        # minimum time for the counter to climb from 0 to c_thr
        return self.c_thr / self.samples_per_hour


def run_criticality(flags: np.ndarray, maintenance_mask=None, timestamps=None,
                    scores=None) -> CriticalitySeries:
    flags = np.asarray(flags, dtype=bool)
    if maintenance_mask is None:
        frozen = np.zeros(flags.shape[0], dtype=bool)
    else:
        frozen = np.asarray(maintenance_mask, dtype=bool)
    if frozen.shape[0] != flags.shape[0]:
        raise ValidationError("flags and maintenance_mask lengths differ")
    counter = backend.run_counter(flags, frozen)
    return CriticalitySeries(
        counter=counter,
        flags=flags,
        maintenance_mask=frozen,
        timestamps=None if timestamps is None else np.asarray(timestamps, dtype="datetime64[s]"),
        scores=None if scores is None else np.asarray(scores, dtype=np.float64),
    )


def detect_event(series: CriticalitySeries, c_thr: int) -> Detection:
    if c_thr < 1:
        raise ValidationError("c_thr must be >= 1")
    idx = series.first_crossing(c_thr)
    if idx is None:
        return Detection(detected=False, c_max=series.c_max)
    t_detect = None if series.timestamps is None else series.timestamps[idx]
    return Detection(detected=True, c_max=series.c_max, index=idx, t_detect=t_detect)


def build_maintenance_mask(timestamps: np.ndarray, disturbances: list[Disturbance],
                           substation_id: str | None = None,
                           settle_hours: float = SETTLE_HOURS) -> np.ndarray:
    """True where the counter must hold: [task, task + settle) for each task."""
    ts = np.asarray(timestamps, dtype="datetime64[s]")
    frozen = np.zeros(ts.shape[0], dtype=bool)
    settle = np.timedelta64(int(settle_hours * 3600), "s")
    for d in disturbances:
        if d.kind != "task":
            continue
        if substation_id is not None and d.substation_id != substation_id:
            continue
        frozen |= (ts >= d.timestamp) & (ts < d.timestamp + settle)
    return frozen


TRACE_COLUMNS = ["timestamp", "score", "flag", "criticality"]


def write_trace(path, series: CriticalitySeries) -> None:
    """Criticality trace CSV: timestamp,score,flag,criticality."""
    import csv

    from .data import format_instant

    if series.timestamps is None:
        raise ValidationError("trace export needs timestamps")
    scores = series.scores
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for i in range(series.counter.shape[0]):
            writer.writerow(
                [
                    format_instant(series.timestamps[i]),
                    repr(float(scores[i])) if scores is not None else "",
                    int(series.flags[i]),
                    int(series.counter[i]),
                ]
            )


def load_trace(path) -> CriticalitySeries:
    import csv

    from .data import parse_instant
    from .errors import ParseError

    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != TRACE_COLUMNS:
        raise ParseError(f"expected header {','.join(TRACE_COLUMNS)}", path=str(path))
    ts, scores, flags, counter = [], [], [], []
    for i, row in enumerate(rows[1:]):
        if len(row) != 4:
            raise ParseError("expected 4 cells", row=i + 1, path=str(path))
        try:
            ts.append(parse_instant(row[0]))
            scores.append(float(row[1]) if row[1] else np.nan)
            flags.append(bool(int(row[2])))
            counter.append(int(row[3]))
        except ValueError as exc:
            raise ParseError(str(exc), row=i + 1, path=str(path)) from exc
    return CriticalitySeries(
        counter=np.asarray(counter, dtype=np.int64),
        flags=np.asarray(flags, dtype=bool),
        maintenance_mask=np.zeros(len(flags), dtype=bool),
        timestamps=np.asarray(ts, dtype="datetime64[s]"),
        scores=np.asarray(scores, dtype=np.float64),
    )
