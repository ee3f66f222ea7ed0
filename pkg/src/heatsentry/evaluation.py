"""Eventwise metrics (Accuracy, Reliability, Earliness, lead time) and C_thr search.

An anomaly event counts as detected when its criticality trace reaches the
threshold. Reliability is the eventwise F-score with beta = 0.5, weighting
precision twice as heavily as recall; Accuracy is the mean fraction of
unflagged points over normal events; Earliness rewards detections that precede
the customer report by up to the actionable window W.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import StratificationError, UndefinedMetricError, ValidationError
from .scoring import CriticalitySeries

DEFAULT_WINDOW_HOURS = 24.0
DEFAULT_BETA = 0.5
GRID_MIN, GRID_MAX = 1, 100
N_FOLDS = 5
LABELS = ("anomaly", "normal")


def earliness(t_detect, t_report, window_hours: float = DEFAULT_WINDOW_HOURS) -> float:
    """Clamped lead of detection over the report, in units of the window W."""
    if window_hours <= 0:
        raise ValidationError("window_hours must be positive")
    if t_detect is None:
        return 0.0
    lead = (np.datetime64(t_report, "s") - np.datetime64(t_detect, "s")) / np.timedelta64(1, "h")
    return float(max(0.0, min(1.0, lead / window_hours)))


def pointwise_accuracy(flags) -> float:
    """Fraction of unflagged samples in a normal event's test window."""
    flags = np.asarray(flags, dtype=bool)
    if flags.size == 0:
        raise UndefinedMetricError("no scored samples in window")
    return float(1.0 - flags.mean())


def f_beta(precision: float, recall: float, beta: float = DEFAULT_BETA) -> float:
    if not (0.0 <= precision <= 1.0 and 0.0 <= recall <= 1.0):
        raise ValidationError("precision and recall must lie in [0, 1]")
    if precision == 0.0 and recall == 0.0:
        return 0.0
    b2 = beta * beta
    return (1.0 + b2) * precision * recall / (b2 * precision + recall)


def reliability_from_counts(tp: int, fp: int, fn: int, beta: float = DEFAULT_BETA) -> float:
    b2 = beta * beta
    den = (1.0 + b2) * tp + fp + b2 * fn
    return (1.0 + b2) * tp / den if den > 0 else 0.0


@dataclass(frozen=True)
class EventOutcome:
    event_id: str
    label: str
    detected: bool
    t_detect: np.datetime64 | None = None
    t_report: np.datetime64 | None = None
    earliness: float | None = None
    pointwise_accuracy: float | None = None
    lead_hours: float | None = None

    def __post_init__(self):
        if self.label not in LABELS:
            raise ValidationError(f"unknown label {self.label!r}")

    @property
    def outcome(self) -> str:
        if self.label == "anomaly":
            return "TP" if self.detected else "FN"
        return "FP" if self.detected else "TN"


def build_outcome(event_id: str, label: str, detected: bool, t_detect=None,
                  t_report=None, flags=None,
                  window_hours: float = DEFAULT_WINDOW_HOURS) -> EventOutcome:
    """Derive the per-event metric fields from a detection and its flags."""
    if label == "anomaly":
        if t_report is None:
            raise ValidationError(f"{event_id}: anomaly event without report time")
        e = earliness(t_detect if detected else None, t_report, window_hours)
        lead = None
        if detected and t_detect is not None:
            lead = float(
                (np.datetime64(t_report, "s") - np.datetime64(t_detect, "s"))
                / np.timedelta64(1, "h")
            )
        return EventOutcome(event_id, label, detected, t_detect, t_report,
                            earliness=e, lead_hours=lead)
    acc = pointwise_accuracy(flags) if flags is not None else None
    return EventOutcome(event_id, label, detected, t_detect, None,
                        pointwise_accuracy=acc)


@dataclass
class MetricsReport:
    """Aggregate metrics; fields are None when their event class is absent."""

    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0
    precision: float | None = None
    recall: float | None = None
    reliability: float | None = None
    accuracy: float | None = None
    mean_earliness: float | None = None
    mean_lead_hours: float | None = None
    window_hours: float = DEFAULT_WINDOW_HOURS
    n_events: int = 0

    def to_dict(self) -> dict:
        return {
            "counts": {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn},
            "precision": self.precision,
            "recall": self.recall,
            "reliability": self.reliability,
            "accuracy": self.accuracy,
            "mean_earliness": self.mean_earliness,
            "mean_lead_hours": self.mean_lead_hours,
            "window_hours": self.window_hours,
            "n_events": self.n_events,
        }


def evaluate_events(outcomes: list[EventOutcome],
                    window_hours: float = DEFAULT_WINDOW_HOURS) -> MetricsReport:
    """Aggregate outcomes; mean earliness counts undetected anomalies as 0,
    mean lead time averages detected anomalies only."""
    if not outcomes:
        raise ValidationError("no outcomes to evaluate")
    report = MetricsReport(window_hours=window_hours, n_events=len(outcomes))
    for o in outcomes:
        setattr(report, o.outcome.lower(), getattr(report, o.outcome.lower()) + 1)
    anomalies = [o for o in outcomes if o.label == "anomaly"]
    normals = [o for o in outcomes if o.label == "normal"]
    if report.tp + report.fp > 0:
        report.precision = report.tp / (report.tp + report.fp)
    if report.tp + report.fn > 0:
        report.recall = report.tp / (report.tp + report.fn)
    if anomalies and normals:
        report.reliability = reliability_from_counts(report.tp, report.fp, report.fn)
    if normals:
        known = [o.pointwise_accuracy for o in normals if o.pointwise_accuracy is not None]
        report.accuracy = float(np.mean(known)) if known else None
    if anomalies:
        report.mean_earliness = float(np.mean([o.earliness or 0.0 for o in anomalies]))
        leads = [o.lead_hours for o in anomalies if o.detected and o.lead_hours is not None]
        if leads:
            report.mean_lead_hours = float(np.mean(leads))
    return report


def format_text_table(report: MetricsReport) -> str:
    """Single-row results table with columns A, R, Precision, Recall, E, L."""

    def cell(v, scale=1.0):
        return "  n/a" if v is None else f"{v * scale:5.2f}"

    lines = [
        "  A      R      Prec   Rec    E      L(h)",
        "  " + "  ".join(
            cell(v) for v in (
                report.accuracy, report.reliability, report.precision,
                report.recall, report.mean_earliness, report.mean_lead_hours,
            )
        ),
        f"  events={report.n_events} TP={report.tp} FP={report.fp} "
        f"FN={report.fn} TN={report.tn} W={report.window_hours:g}h",
    ]
    return "\n".join(lines)


def confusion_rows(report: MetricsReport) -> list[list[str]]:
    return [
        ["", "detected", "not_detected"],
        ["anomaly", str(report.tp), str(report.fn)],
        ["normal", str(report.fp), str(report.tn)],
    ]


@dataclass
class ThresholdSearch:
    c_thr: int
    grid: np.ndarray = field(repr=False)
    mean_reliability: np.ndarray = field(repr=False)


def _trace_c_max(trace) -> int:
    if isinstance(trace, CriticalitySeries):
        return trace.c_max
    if np.isscalar(trace) or isinstance(trace, (int, np.integer)):
        return int(trace)
    arr = np.asarray(trace)
    return int(arr.max()) if arr.size else 0


def select_threshold(traces, labels, seed: int = 0, n_folds: int = N_FOLDS,
                     grid=None, beta: float = DEFAULT_BETA) -> ThresholdSearch:
    """Stratified cross-validated grid search for the criticality threshold.

    Folds are built by seeded shuffling within each label followed by
    round-robin assignment; candidates maximize the mean fold reliability and
    ties resolve to the larger threshold (fewer false alarms). Events are
    keyed by their trace maxima before shuffling, so the result does not
    depend on the order events are passed in.
    """
    if len(traces) != len(labels):
        raise ValidationError("traces and labels lengths differ")
    for lab in labels:
        if lab not in LABELS:
            raise ValidationError(f"unknown label {lab!r}")
    c_max = np.array([_trace_c_max(t) for t in traces], dtype=np.int64)
    lab_arr = np.array(labels)
    grid = np.arange(GRID_MIN, GRID_MAX + 1) if grid is None else np.asarray(grid, dtype=np.int64)

    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    fold_of = np.empty(len(labels), dtype=np.int64)
    for lab in LABELS:
        members = np.nonzero(lab_arr == lab)[0]
        if members.size < n_folds:
            raise StratificationError(
                f"need at least {n_folds} {lab} events for {n_folds}-fold "
                f"stratification, got {members.size}"
            )
        members = members[np.argsort(c_max[members], kind="stable")]
        order = rng.permutation(members.size)
        for pos, member in enumerate(members[order]):
            fold_of[member] = pos % n_folds

    is_anomaly = lab_arr == "anomaly"
    scores = np.zeros(grid.shape[0])
    for gi, c in enumerate(grid):
        detected = c_max >= c
        fold_scores = np.empty(n_folds)
        for k in range(n_folds):
            in_fold = fold_of == k
            tp = int(np.sum(in_fold & is_anomaly & detected))
            fp = int(np.sum(in_fold & ~is_anomaly & detected))
            fn = int(np.sum(in_fold & is_anomaly & ~detected))
            fold_scores[k] = reliability_from_counts(tp, fp, fn, beta)
        scores[gi] = fold_scores.mean()

    best = 0
    for gi in range(grid.shape[0]):
        if scores[gi] >= scores[best]:
            best = gi
    return ThresholdSearch(c_thr=int(grid[best]), grid=grid, mean_reliability=scores)


def validate_window(window_hours: float, c_thr: int, samples_per_hour: float,
                    test_span_hours: float) -> list[str]:
    """Warnings when the earliness window cannot be fully used."""
    if window_hours <= 0:
        raise ValidationError("window_hours must be positive")
    if c_thr < 1 or samples_per_hour <= 0 or test_span_hours <= 0:
        raise ValidationError("c_thr, samples_per_hour and test_span_hours must be positive")
    warnings_out = []
    d_detect = c_thr / samples_per_hour
    if window_hours > test_span_hours:
        warnings_out.append(
            f"window {window_hours:g} h exceeds the test span {test_span_hours:g} h"
        )
    if window_hours > test_span_hours - d_detect:
        max_e = (test_span_hours - d_detect) / window_hours
        warnings_out.append(
            f"earliness 1 unreachable: window {window_hours:g} h > test span minus "
            f"detection delay {test_span_hours - d_detect:g} h (max E = {max_e:.3f})"
        )
    return warnings_out
