"""Training-data masking, feature selection, standardization and calendar encoding.

The training mask removes anything that might not be normal behaviour:
annotated anomaly periods, a 48 h guard before unannotated reports, and a 4 h
settling period after every maintenance action. Surviving rows feed the
mean/std statistics used for imputation and scaling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import TimeSeriesFrame, Disturbance, IncidentReport
from .errors import SchemaError, TrainingError, ValidationError

CONDITIONING_MODES = ("none", "hour_dow", "hour_dow_doy")

HOURS = np.timedelta64(3600, "s")
DAY_SECONDS = 86400.0
WEEK_SECONDS = 7 * 86400.0
YEAR_SECONDS = 365.25 * 86400.0
# 1970-01-01 was a Thursday; shift so week fractions start on Monday.
EPOCH_WEEKDAY = 3

MISSING_FRACTION_LIMIT = 0.8
MIN_TRAIN_ROWS = 2016  # 14 days at 10-minute sampling
STD_FLOOR = 1e-12


def conditioning_dim(conditioning: str) -> int:
    if conditioning not in CONDITIONING_MODES:
        raise ValidationError(f"unknown conditioning mode {conditioning!r}")
    return {"none": 0, "hour_dow": 4, "hour_dow_doy": 6}[conditioning]


@dataclass(frozen=True)
class Exclusion:
    """Half-open interval removed from training, with the rule that removed it."""

    start: np.datetime64
    end: np.datetime64
    reason: str


@dataclass
class TrainingMask:
    mask: np.ndarray
    exclusions: list[Exclusion] = field(default_factory=list)

    @property
    def n_selected(self) -> int:
        return int(self.mask.sum())


def build_training_mask(
    frame: TimeSeriesFrame,
    disturbances: list[Disturbance],
    reports: list[IncidentReport],
    pre_report_hours: float = 48.0,
    settle_hours: float = 4.0,
    no_task_fix_hours: float = 24.0,
) -> TrainingMask:
    """Mark rows usable as normal behaviour.

    Exclusion rules, each producing a half-open interval:

    * report with an annotated anomaly_start: ``[anomaly_start, next task + settle)``
    * report without annotation: ``[report - pre_report, next task + settle)``
    * either case with no task logged after the report: the interval ends at
      ``report + no_task_fix`` instead (the fault is assumed fixed by then)
    * every maintenance task: ``[task, task + settle)``

    Overlaps merge via the union; the per-rule intervals are kept as provenance.
    """
    for d in disturbances:
        if d.substation_id != frame.substation_id:
            raise ValidationError(f"disturbance for {d.substation_id} on frame {frame.substation_id}")
    for r in reports:
        if r.substation_id != frame.substation_id:
            raise ValidationError(f"report for {r.substation_id} on frame {frame.substation_id}")

    settle = np.timedelta64(int(settle_hours * 3600), "s")
    pre = np.timedelta64(int(pre_report_hours * 3600), "s")
    fix = np.timedelta64(int(no_task_fix_hours * 3600), "s")

    task_times = np.sort(
        np.array([d.timestamp for d in disturbances if d.kind == "task"], dtype="datetime64[s]")
    )

    exclusions: list[Exclusion] = []
    for report in reports:
        after = task_times[task_times >= report.report_time]
        if after.size:
            end = after[0] + settle
        else:
            end = report.report_time + fix
        if report.anomaly_start is not None:
            exclusions.append(Exclusion(report.anomaly_start, end, "annotated_anomaly"))
        else:
            exclusions.append(Exclusion(report.report_time - pre, end, "pre_report"))
    for t in task_times:
        exclusions.append(Exclusion(t, t + settle, "maintenance_settling"))

    mask = np.ones(frame.n_samples, dtype=bool)
    for exc in exclusions:
        mask &= ~((frame.timestamps >= exc.start) & (frame.timestamps < exc.end))
    return TrainingMask(mask, exclusions)


@dataclass
class PreprocessorState:
    """Fitted feature selection and scaling; immutable once fitted."""

    kept_features: list[str]
    train_means: np.ndarray
    train_stds: np.ndarray
    conditioning: str
    dropped: dict[str, str] = field(default_factory=dict)

    @property
    def n_features(self) -> int:
        return len(self.kept_features)

    def to_dict(self) -> dict:
        return {
            "kept_features": list(self.kept_features),
            "train_means": [float(v) for v in self.train_means],
            "train_stds": [float(v) for v in self.train_stds],
            "conditioning": self.conditioning,
            "dropped": dict(self.dropped),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PreprocessorState":
        return cls(
            kept_features=list(doc["kept_features"]),
            train_means=np.asarray(doc["train_means"], dtype=np.float64),
            train_stds=np.asarray(doc["train_stds"], dtype=np.float64),
            conditioning=doc["conditioning"],
            dropped=dict(doc.get("dropped", {})),
        )


def fit_preprocessor(
    frame: TimeSeriesFrame,
    mask: TrainingMask,
    conditioning: str = "none",
    min_rows: int = MIN_TRAIN_ROWS,
) -> PreprocessorState:
    """Fit feature selection and scaling statistics on the masked training rows.

    Constant features are dropped first (exact equality over non-missing
    values), then features missing in more than 80% of the masked rows. The
    statistics use the population (1/N) convention and ignore missing cells.
    """
    conditioning_dim(conditioning)
    if mask.mask.shape[0] != frame.n_samples:
        raise ValidationError("mask length does not match frame")
    rows = frame.values[mask.mask]
    n = rows.shape[0]
    if n < min_rows:
        raise ValidationError(f"mask selects {n} rows, need at least {min_rows}")

    dropped: dict[str, str] = {}
    survivors: list[int] = []
    for j, name in enumerate(frame.feature_names):
        col = rows[:, j]
        finite = col[~np.isnan(col)]
        if finite.size and finite.min() == finite.max():
            dropped[name] = "constant"
        else:
            survivors.append(j)
    kept: list[int] = []
    for j in survivors:
        col = rows[:, j]
        missing_frac = float(np.isnan(col).mean())
        if missing_frac > MISSING_FRACTION_LIMIT:
            dropped[frame.feature_names[j]] = "missing"
        else:
            kept.append(j)

    if not kept:
        raise TrainingError(
            f"{frame.substation_id}: no usable features left after dropping {len(dropped)}"
        )

    means = np.empty(len(kept))
    stds = np.empty(len(kept))
    for i, j in enumerate(kept):
        col = rows[:, j]
        finite = col[~np.isnan(col)]
        means[i] = finite.mean()
        stds[i] = max(float(finite.std()), STD_FLOOR)

    return PreprocessorState(
        kept_features=[frame.feature_names[j] for j in kept],
        train_means=means,
        train_stds=stds,
        conditioning=conditioning,
        dropped=dropped,
    )


def transform(frame: TimeSeriesFrame, state: PreprocessorState) -> tuple[np.ndarray, np.ndarray]:
    """Standardize the kept features; returns (matrix, imputed-cell flags).

    Missing cells are imputed with the training mean, i.e. 0 after scaling.
    """
    cols = []
    for name in state.kept_features:
        if name not in frame.feature_names:
            raise SchemaError(f"feature {name!r} missing from frame {frame.substation_id}")
        cols.append(frame.feature_names.index(name))
    x = frame.values[:, cols].copy()
    imputed = np.isnan(x)
    x = (x - state.train_means) / state.train_stds
    x[imputed] = 0.0
    return x, imputed


def encode_calendar(timestamps: np.ndarray, conditioning: str) -> np.ndarray:
    """Cyclic sine/cosine encoding of hour-of-day, day-of-week and optionally year phase.

    Year phase is the elapsed time modulo 365.25 days, which keeps the encoding
    continuous across leap years.
    """
    k = conditioning_dim(conditioning)
    if k == 0:
        raise ValidationError("encode_calendar requires conditioning != 'none'")
    secs = np.asarray(timestamps, dtype="datetime64[s]").astype(np.int64).astype(np.float64)
    hour_frac = np.mod(secs, DAY_SECONDS) / DAY_SECONDS
    week_frac = np.mod(secs + EPOCH_WEEKDAY * DAY_SECONDS, WEEK_SECONDS) / WEEK_SECONDS
    cols = [
        np.sin(2 * np.pi * hour_frac),
        np.cos(2 * np.pi * hour_frac),
        np.sin(2 * np.pi * week_frac),
        np.cos(2 * np.pi * week_frac),
    ]
    if k == 6:
        year_frac = np.mod(secs, YEAR_SECONDS) / YEAR_SECONDS
        cols.append(np.sin(2 * np.pi * year_frac))
        cols.append(np.cos(2 * np.pi * year_frac))
    return np.column_stack(cols)


def conditioning_matrix(timestamps: np.ndarray, conditioning: str) -> np.ndarray:
    """Like encode_calendar but returns an (n, 0) matrix for 'none'."""
    if conditioning_dim(conditioning) == 0:
        return np.zeros((len(timestamps), 0))
    return encode_calendar(timestamps, conditioning)
