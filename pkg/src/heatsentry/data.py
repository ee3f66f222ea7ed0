"""Loading, validation and slicing of substation time series and service records.

All artifacts live on a fixed 10-minute grid. Timestamps are timezone-naive
``numpy.datetime64[s]`` instants; the grid origin is the Unix epoch, so a
timestamp is on-grid iff its epoch seconds are a multiple of 600. Gaps are
preserved as absent rows, never filled. Intervals are half-open ``[start, end)``
throughout.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError, ValidationError

GRID_SECONDS = 600
GRID_STEP = np.timedelta64(GRID_SECONDS, "s")
TEST_WINDOW = np.timedelta64(7, "D")
MIN_TRAIN_SPAN = np.timedelta64(14, "D")

DISTURBANCE_KINDS = ("fault", "task")


def parse_instant(text: str) -> np.datetime64:
    """Parse an ISO-8601 timestamp into a second-resolution instant."""
    try:
        value = np.datetime64(text.strip(), "s")
    except ValueError as exc:
        raise ParseError(f"malformed timestamp {text!r}") from exc
    if np.isnat(value):
        raise ParseError(f"malformed timestamp {text!r}")
    return value


def format_instant(value: np.datetime64) -> str:
    return np.datetime_as_string(value.astype("datetime64[s]"), unit="s")


def epoch_seconds(timestamps: np.ndarray) -> np.ndarray:
    return timestamps.astype("datetime64[s]").astype(np.int64)


def snap_to_grid(value: np.datetime64) -> np.datetime64:
    # half-sample ties snap to the later grid point
    secs = int(value.astype("datetime64[s]").astype(np.int64))
    snapped = ((secs + GRID_SECONDS // 2) // GRID_SECONDS) * GRID_SECONDS
    return np.datetime64(snapped, "s")


@dataclass
class TimeSeriesFrame:
    """Timestamp-indexed feature matrix for one substation.

    ``values`` is an (n_samples, n_features) float64 matrix; missing cells are
    NaN. Frames are treated as immutable after construction and safe to share.
    """

    substation_id: str
    timestamps: np.ndarray
    feature_names: list[str]
    values: np.ndarray

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype="datetime64[s]")
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValidationError("values must be a 2-D matrix")
        if self.values.shape[0] != self.timestamps.shape[0]:
            raise ValidationError(
                f"{self.values.shape[0]} value rows for {self.timestamps.shape[0]} timestamps"
            )
        if self.values.shape[1] != len(self.feature_names):
            raise ValidationError(
                f"{self.values.shape[1]} value columns for {len(self.feature_names)} feature names"
            )
        if len(set(self.feature_names)) != len(self.feature_names):
            raise ValidationError("duplicate feature names")
        secs = epoch_seconds(self.timestamps)
        off = np.nonzero(secs % GRID_SECONDS != 0)[0]
        if off.size:
            raise ValidationError(
                f"timestamp {format_instant(self.timestamps[off[0]])} is off the 10-minute grid"
            )
        if secs.size > 1:
            diffs = np.diff(secs)
            bad = np.nonzero(diffs <= 0)[0]
            if bad.size:
                i = int(bad[0]) + 1
                if diffs[bad[0]] == 0:
                    raise ValidationError(
                        f"duplicate timestamp {format_instant(self.timestamps[i])}"
                    )
                raise ValidationError(
                    f"non-monotone timestamp {format_instant(self.timestamps[i])}"
                )

    @property
    def n_samples(self) -> int:
        return self.timestamps.shape[0]

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def column(self, name: str) -> np.ndarray:
        try:
            idx = self.feature_names.index(name)
        except ValueError:
            raise ValidationError(f"no feature named {name!r}") from None
        return self.values[:, idx]

    def slice(self, start: np.datetime64, end: np.datetime64) -> "TimeSeriesFrame":
        """Rows with start <= t < end. An empty result is legal."""
        start = np.datetime64(start, "s")
        end = np.datetime64(end, "s")
        if not start < end:
            raise ValidationError("slice start must precede end")
        sel = (self.timestamps >= start) & (self.timestamps < end)
        return TimeSeriesFrame(
            substation_id=self.substation_id,
            timestamps=self.timestamps[sel],
            feature_names=list(self.feature_names),
            values=self.values[sel],
        )


@dataclass(frozen=True)
class Disturbance:
    """A logged incident report ('fault') or maintenance action ('task')."""

    substation_id: str
    timestamp: np.datetime64
    kind: str

    def __post_init__(self):
        if self.kind not in DISTURBANCE_KINDS:
            raise ValidationError(f"unknown disturbance kind {self.kind!r}")


@dataclass(frozen=True)
class IncidentReport:
    """Customer incident report with optional fault metadata."""

    substation_id: str
    report_time: np.datetime64
    problem_category: str
    fault_label: str | None = None
    monitoring_potential: float | None = None
    anomaly_start: np.datetime64 | None = None
    anomaly_end: np.datetime64 | None = None

    def __post_init__(self):
        if self.monitoring_potential is not None and not (
            1.0 <= self.monitoring_potential <= 5.0
        ):
            raise ValidationError(
                f"monitoring_potential {self.monitoring_potential} outside [1, 5]"
            )
        if self.anomaly_start is not None and self.anomaly_end is not None:
            if not self.anomaly_start < self.anomaly_end:
                raise ValidationError("anomaly_start must precede anomaly_end")

    @property
    def monitoring_class(self) -> str | None:
        """'high' iff the rating is at least 2.5, 'low' below, None if unrated."""
        if self.monitoring_potential is None:
            return None
        return "high" if self.monitoring_potential >= 2.5 else "low"


@dataclass(frozen=True)
class EventSpec:
    """One benchmark unit: a train window plus a fixed 7-day test window."""

    event_id: str
    substation_id: str
    label: str
    train_start: np.datetime64
    train_end: np.datetime64
    test_start: np.datetime64
    test_end: np.datetime64
    report_time: np.datetime64 | None = None

    def __post_init__(self):
        if self.label not in ("anomaly", "normal"):
            raise ValidationError(f"unknown event label {self.label!r}")
        if not self.train_end <= self.test_start:
            raise ValidationError(f"{self.event_id}: train window overlaps test window")
        if self.test_end - self.test_start != TEST_WINDOW:
            raise ValidationError(f"{self.event_id}: test window must span exactly 7 days")
        if self.train_end - self.train_start < MIN_TRAIN_SPAN:
            raise ValidationError(f"{self.event_id}: train window shorter than 14 days")
        if self.label == "anomaly":
            if self.report_time is None:
                raise ValidationError(f"{self.event_id}: anomaly event without report_time")
            if self.report_time != self.test_end:
                raise ValidationError(f"{self.event_id}: test_end must equal report_time")
        elif self.report_time is not None:
            raise ValidationError(f"{self.event_id}: normal event with report_time")


@dataclass(frozen=True)
class CompletenessStat:
    substation_id: str
    expected_samples: int
    present_samples: int

    @property
    def completeness(self) -> float:
        if self.expected_samples == 0:
            return 0.0
        return self.present_samples / self.expected_samples


# ---------------------------------------------------------------------------
# CSV loading


def _read_rows(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", path=str(path)) from None
        rows = [row for row in reader if row]
    return [h.strip() for h in header], rows


def load_timeseries(path, substation_id: str | None = None, snap: bool = False) -> TimeSeriesFrame:
    """Load one substation time-series CSV (header ``timestamp,<feature>,...``).

    Row numbers in errors are 1-based over data rows (header excluded). Empty
    cells become NaN. Off-grid timestamps are rejected unless ``snap`` rounds
    them to the nearest grid point.
    """
    path = str(path)
    header, rows = _read_rows(path)
    if not header or header[0] != "timestamp":
        raise ParseError("first column must be 'timestamp'", path=path)
    names = header[1:]
    if not names:
        raise ParseError("no feature columns", path=path)
    if substation_id is None:
        import os

        substation_id = os.path.splitext(os.path.basename(path))[0]

    n = len(rows)
    stamps = np.empty(n, dtype="datetime64[s]")
    values = np.full((n, len(names)), np.nan)
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} cells, found {len(row)}", row=i + 1, path=path)
        try:
            t = parse_instant(row[0])
        except ParseError as exc:
            raise ParseError(str(exc), row=i + 1, path=path) from None
        if int(t.astype(np.int64)) % GRID_SECONDS != 0:
            if snap:
                t = snap_to_grid(t)
            else:
                raise ParseError(
                    f"timestamp {row[0].strip()} is off the 10-minute grid", row=i + 1, path=path
                )
        stamps[i] = t
        for j, cell in enumerate(row[1:]):
            cell = cell.strip()
            if cell == "":
                continue
            try:
                values[i, j] = float(cell)
            except ValueError:
                raise ParseError(f"non-numeric value {cell!r}", row=i + 1, path=path) from None

    secs = stamps.astype(np.int64)
    if n > 1:
        diffs = np.diff(secs)
        bad = np.nonzero(diffs <= 0)[0]
        if bad.size:
            i = int(bad[0]) + 1
            kind = "duplicate" if diffs[bad[0]] == 0 else "non-monotone"
            raise ValidationError(f"{path}: row {i + 1}: {kind} timestamp {format_instant(stamps[i])}")

    return TimeSeriesFrame(substation_id, stamps, names, values)


def write_timeseries(frame: TimeSeriesFrame, path) -> None:
    """Write a frame in canonical form (ISO seconds, shortest-repr floats, NaN empty)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp"] + list(frame.feature_names))
        for i in range(frame.n_samples):
            cells = [format_instant(frame.timestamps[i])]
            for v in frame.values[i]:
                cells.append("" if math.isnan(v) else repr(float(v)))
            writer.writerow(cells)


def load_disturbances(path) -> list[Disturbance]:
    path = str(path)
    header, rows = _read_rows(path)
    if header != ["substation_id", "timestamp", "kind"]:
        raise ParseError("expected header substation_id,timestamp,kind", path=path)
    out = []
    for i, row in enumerate(rows):
        if len(row) != 3:
            raise ParseError(f"expected 3 cells, found {len(row)}", row=i + 1, path=path)
        kind = row[2].strip()
        if kind not in DISTURBANCE_KINDS:
            raise ValidationError(f"{path}: row {i + 1}: unknown disturbance kind {kind!r}")
        try:
            out.append(Disturbance(row[0].strip(), parse_instant(row[1]), kind))
        except ParseError as exc:
            raise ParseError(str(exc), row=i + 1, path=path) from None
    out.sort(key=lambda d: (d.substation_id, d.timestamp))
    return out


def write_disturbances(disturbances: list[Disturbance], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["substation_id", "timestamp", "kind"])
        for d in disturbances:
            writer.writerow([d.substation_id, format_instant(d.timestamp), d.kind])


REPORT_COLUMNS = [
    "substation_id",
    "report_time",
    "problem_category",
    "fault_label",
    "monitoring_potential",
    "anomaly_start",
    "anomaly_end",
]


def load_reports(path) -> list[IncidentReport]:
    path = str(path)
    header, rows = _read_rows(path)
    if header != REPORT_COLUMNS:
        raise ParseError(f"expected header {','.join(REPORT_COLUMNS)}", path=path)
    out = []
    for i, row in enumerate(rows):
        if len(row) != len(REPORT_COLUMNS):
            raise ParseError(
                f"expected {len(REPORT_COLUMNS)} cells, found {len(row)}", row=i + 1, path=path
            )
        cells = [c.strip() for c in row]
        try:
            report = IncidentReport(
                substation_id=cells[0],
                report_time=parse_instant(cells[1]),
                problem_category=cells[2],
                fault_label=cells[3] or None,
                monitoring_potential=float(cells[4]) if cells[4] else None,
                anomaly_start=parse_instant(cells[5]) if cells[5] else None,
                anomaly_end=parse_instant(cells[6]) if cells[6] else None,
            )
        except ParseError as exc:
            raise ParseError(str(exc), row=i + 1, path=path) from None
        except ValueError:
            raise ParseError(f"non-numeric monitoring_potential {cells[4]!r}", row=i + 1, path=path) from None
        except ValidationError as exc:
            raise ValidationError(f"{path}: row {i + 1}: {exc}") from None
        out.append(report)
    out.sort(key=lambda r: (r.substation_id, r.report_time))
    return out


def write_reports(reports: list[IncidentReport], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS)
        for r in reports:
            writer.writerow(
                [
                    r.substation_id,
                    format_instant(r.report_time),
                    r.problem_category,
                    r.fault_label or "",
                    repr(float(r.monitoring_potential)) if r.monitoring_potential is not None else "",
                    format_instant(r.anomaly_start) if r.anomaly_start is not None else "",
                    format_instant(r.anomaly_end) if r.anomaly_end is not None else "",
                ]
            )


MANIFEST_COLUMNS = [
    "event_id",
    "substation_id",
    "label",
    "train_start",
    "train_end",
    "test_start",
    "test_end",
    "report_time",
]


def load_manifest(path) -> list[EventSpec]:
    path = str(path)
    header, rows = _read_rows(path)
    if header != MANIFEST_COLUMNS:
        raise ParseError(f"expected header {','.join(MANIFEST_COLUMNS)}", path=path)
    events = []
    for i, row in enumerate(rows):
        if len(row) != len(MANIFEST_COLUMNS):
            raise ParseError(
                f"expected {len(MANIFEST_COLUMNS)} cells, found {len(row)}", row=i + 1, path=path
            )
        cells = [c.strip() for c in row]
        try:
            events.append(
                EventSpec(
                    event_id=cells[0],
                    substation_id=cells[1],
                    label=cells[2],
                    train_start=parse_instant(cells[3]),
                    train_end=parse_instant(cells[4]),
                    test_start=parse_instant(cells[5]),
                    test_end=parse_instant(cells[6]),
                    report_time=parse_instant(cells[7]) if cells[7] else None,
                )
            )
        except ParseError as exc:
            raise ParseError(str(exc), row=i + 1, path=path) from None
        except ValidationError as exc:
            raise ValidationError(f"{path}: row {i + 1}: {exc}") from None
    return events


def write_manifest(events: list[EventSpec], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_COLUMNS)
        for e in events:
            writer.writerow(
                [
                    e.event_id,
                    e.substation_id,
                    e.label,
                    format_instant(e.train_start),
                    format_instant(e.train_end),
                    format_instant(e.test_start),
                    format_instant(e.test_end),
                    format_instant(e.report_time) if e.report_time is not None else "",
                ]
            )


def completeness(
    frame: TimeSeriesFrame,
    start: np.datetime64,
    end: np.datetime64,
    required: list[str] | None = None,
) -> CompletenessStat:
    """Fraction of expected 10-minute samples where all required features are present.

    A timestamp counts as present only if every required feature (default: all
    of the frame's features) has a non-missing value there.
    """
    start = np.datetime64(start, "s")
    end = np.datetime64(end, "s")
    if not start < end:
        raise ValidationError("completeness span must be nonempty")
    expected = int((end - start) // GRID_STEP)
    sub = frame.slice(start, end)
    if required is None:
        vals = sub.values
    else:
        cols = [sub.feature_names.index(name) for name in required]
        vals = sub.values[:, cols] if cols else sub.values[:, :0]
    if vals.shape[1] == 0:
        present = sub.n_samples
    else:
        present = int(np.all(~np.isnan(vals), axis=1).sum())
    return CompletenessStat(frame.substation_id, expected, present)
