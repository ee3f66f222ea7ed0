"""Seeded generator of substation-like series with injectable fault signatures.

Signals are sums of daily/weekly/seasonal sinusoids plus AR(1) noise and
linear couplings to earlier signals, rich enough that an undercomplete
autoencoder has real structure to learn. Fault injections reproduce the shapes
of common substation failures: an abrupt setpoint drop, intermittently zeroed
flow, and a slow storage-temperature decay. Everything is deterministic per
seed, and the generator emits the same CSV artifacts the loaders consume,
plus a ground-truth table.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import (
    GRID_SECONDS,
    Disturbance,
    EventSpec,
    IncidentReport,
    TimeSeriesFrame,
    format_instant,
    parse_instant,
)
from .errors import SchemaError, ValidationError

FAULT_TYPES = ("setpoint_step_drop", "intermittent_zero_flow", "storage_temp_decay")
ZERO_FLOW_DEFAULT_RATE = 0.3
DAY = np.timedelta64(86400, "s")
TEST_DAYS = 7
_SIGNAL_STREAM = 17
_FAULT_STREAM = 1000


@dataclass(frozen=True)
class SignalSpec:
    name: str
    base: float
    daily_amp: float = 0.0
    weekly_amp: float = 0.0
    seasonal_amp: float = 0.0
    noise_std: float = 0.0
    ar_coeff: float = 0.0
    couple_to: str | None = None
    couple_gain: float = 0.0

    def __post_init__(self):
        if self.noise_std < 0:
            raise ValidationError(f"{self.name}: noise_std must be non-negative")
        if not 0.0 <= self.ar_coeff < 1.0:
            raise ValidationError(f"{self.name}: ar_coeff must lie in [0, 1)")


@dataclass(frozen=True)
class FaultInjection:
    feature: str
    fault_type: str
    start: np.datetime64
    duration: np.timedelta64
    magnitude: float

    def __post_init__(self):
        object.__setattr__(self, "start", np.datetime64(self.start, "s"))
        object.__setattr__(self, "duration", np.timedelta64(self.duration).astype("timedelta64[s]"))
        if self.fault_type not in FAULT_TYPES:
            raise ValidationError(f"unknown fault_type {self.fault_type!r}")
        if self.duration < np.timedelta64(0, "s"):
            raise ValidationError("duration must be non-negative")
        if self.fault_type == "setpoint_step_drop" and self.magnitude > 0:
            raise ValidationError("setpoint_step_drop magnitude must be <= 0 (a drop)")
        if self.fault_type == "intermittent_zero_flow" and not 0.0 <= self.magnitude <= 1.0:
            raise ValidationError("intermittent_zero_flow magnitude is a zeroing rate in [0, 1]")
        if self.fault_type == "storage_temp_decay" and self.magnitude > 0:
            raise ValidationError("storage_temp_decay magnitude must be <= 0 (a decay)")

    @property
    def end(self) -> np.datetime64:
        return self.start + self.duration


def default_signals() -> tuple[SignalSpec, ...]:
    return (
        SignalSpec("outdoor_temp", base=8.0, daily_amp=4.0, seasonal_amp=0.8,
                   noise_std=1.0, ar_coeff=0.95),
        SignalSpec("supply_temp_primary", base=80.0, daily_amp=5.0, weekly_amp=1.5,
                   seasonal_amp=0.3, noise_std=0.8, ar_coeff=0.8,
                   couple_to="outdoor_temp", couple_gain=-0.6),
        SignalSpec("return_temp_primary", base=45.0, daily_amp=2.0, noise_std=0.6,
                   ar_coeff=0.7, couple_to="supply_temp_primary", couple_gain=0.5),
        SignalSpec("flow_primary", base=2.5, daily_amp=0.9, weekly_amp=0.3,
                   noise_std=0.12, ar_coeff=0.7),
        SignalSpec("heat_power", base=55.0, daily_amp=4.0, noise_std=1.5,
                   ar_coeff=0.6, couple_to="flow_primary", couple_gain=12.0),
        SignalSpec("dhw_setpoint", base=65.0, noise_std=0.05),
        SignalSpec("dhw_supply_temp", base=63.0, daily_amp=0.8, noise_std=0.4,
                   ar_coeff=0.5, couple_to="dhw_setpoint", couple_gain=0.9),
        SignalSpec("storage_temp_upper", base=70.0, daily_amp=1.2, noise_std=0.5,
                   ar_coeff=0.9),
    )


@dataclass(frozen=True)
class SynthConfig:
    substation_id: str = "SYN-001"
    start: np.datetime64 = np.datetime64("2030-01-01T00:00:00", "s")
    n_days: int = 100
    seed: int = 0
    signals: tuple[SignalSpec, ...] = field(default_factory=default_signals)
    faults: tuple[FaultInjection, ...] = ()
    n_normal_events: int = 0
    report_delay_hours: float = 24.0
    train_days: int = 28
    gap_days: int = 7

    def __post_init__(self):
        object.__setattr__(self, "start", np.datetime64(self.start, "s"))
        object.__setattr__(self, "signals", tuple(self.signals))
        object.__setattr__(self, "faults", tuple(self.faults))
        if self.n_days < 1:
            raise ValidationError("n_days must be >= 1")
        if not self.signals:
            raise ValidationError("at least one signal spec required")
        if self.report_delay_hours < 0:
            raise ValidationError("report_delay_hours must be non-negative")
        if self.train_days < 14:
            raise ValidationError("train_days must be >= 14")
        if self.gap_days < 0:
            raise ValidationError("gap_days must be non-negative")
        names = [s.name for s in self.signals]
        if len(set(names)) != len(names):
            raise ValidationError("signal names must be unique")
        seen: set[str] = set()
        for s in self.signals:
            if s.couple_to is not None and s.couple_to not in seen:
                raise ValidationError(
                    f"{s.name}: couple_to {s.couple_to!r} must name an earlier signal"
                )
            seen.add(s.name)
        series_end = self.start + np.timedelta64(self.n_days, "D")
        for f in self.faults:
            if f.feature not in names:
                raise ValidationError(f"fault feature {f.feature!r} is not a signal")
            if f.duration <= np.timedelta64(0, "s"):
                raise ValidationError("fault duration must be positive")
            if f.start < self.start or f.end > series_end:
                raise ValidationError("fault window outside the series span")
        for i, a in enumerate(self.faults):
            for b in self.faults[i + 1 :]:
                if a.fault_type == b.fault_type and a.start < b.end and b.start < a.end:
                    raise ValidationError(
                        f"overlapping {a.fault_type} injections at "
                        f"{format_instant(a.start)} and {format_instant(b.start)}"
                    )

    @property
    def series_end(self) -> np.datetime64:
        return self.start + np.timedelta64(self.n_days, "D")


@dataclass
class SynthResult:
    frame: TimeSeriesFrame
    events: list[EventSpec]
    disturbances: list[Disturbance]
    reports: list[IncidentReport]
    ground_truth: list[dict]


def _clean_values(config: SynthConfig, timestamps: np.ndarray) -> np.ndarray:
    n = timestamps.shape[0]
    secs = timestamps.astype(np.int64).astype(np.float64)
    day_frac = secs / 86400.0
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, _SIGNAL_STREAM]))
    values = np.empty((n, len(config.signals)))
    by_name: dict[str, int] = {}
    for j, s in enumerate(config.signals):
        phases = rng.uniform(0.0, 2.0 * np.pi, 3)
        col = np.full(n, s.base)
        col += s.daily_amp * np.sin(2.0 * np.pi * day_frac + phases[0])
        col += s.weekly_amp * np.sin(2.0 * np.pi * day_frac / 7.0 + phases[1])
        col += s.seasonal_amp * np.sin(2.0 * np.pi * day_frac / 365.25 + phases[2])
        shocks = rng.standard_normal(n)
        if s.noise_std > 0:
            noise = np.empty(n)
            scale = s.noise_std * np.sqrt(1.0 - s.ar_coeff**2)
            prev = shocks[0] * s.noise_std
            noise[0] = prev
            for i in range(1, n):
                prev = s.ar_coeff * prev + scale * shocks[i]
                noise[i] = prev
            col += noise
        if s.couple_to is not None:
            src = config.signals[by_name[s.couple_to]]
            col += s.couple_gain * (values[:, by_name[s.couple_to]] - src.base)
        values[:, j] = col
        by_name[s.name] = j
    return values


def inject(frame: TimeSeriesFrame, injection: FaultInjection, seed: int = 0) -> TimeSeriesFrame:
    """Apply one fault signature; samples outside its window are untouched."""
    if injection.feature not in frame.feature_names:
        raise SchemaError(f"unknown feature {injection.feature!r}")
    if frame.n_samples == 0:
        raise ValidationError("cannot inject into an empty frame")
    step = np.timedelta64(GRID_SECONDS, "s")
    if injection.start < frame.timestamps[0] or injection.end > frame.timestamps[-1] + step:
        raise ValidationError("injection window outside the frame")
    j = frame.feature_names.index(injection.feature)
    mask = (frame.timestamps >= injection.start) & (frame.timestamps < injection.end)
    values = frame.values.copy()
    idx = np.nonzero(mask)[0]
    if idx.size:
        if injection.fault_type == "setpoint_step_drop":
            values[idx, j] += injection.magnitude
        elif injection.fault_type == "intermittent_zero_flow":
            rng = np.random.default_rng(np.random.SeedSequence([seed]))
            zero = rng.random(idx.size) < injection.magnitude
            values[idx[zero], j] = 0.0
        else:
            frac = (frame.timestamps[idx] - injection.start) / injection.duration
            values[idx, j] += injection.magnitude * frac.astype(np.float64)
    return TimeSeriesFrame(
        substation_id=frame.substation_id,
        timestamps=frame.timestamps.copy(),
        feature_names=list(frame.feature_names),
        values=values,
    )


_CATEGORY = {
    "setpoint_step_drop": "setpoint fault",
    "intermittent_zero_flow": "flow fault",
    "storage_temp_decay": "storage fault",
}


def _normal_test_ends(config: SynthConfig) -> list[np.datetime64]:
    if config.n_normal_events == 0:
        return []
    lead = np.timedelta64(config.train_days + config.gap_days + TEST_DAYS, "D")
    span = lead  # full footprint of one event
    candidates = []
    buffer = np.timedelta64(2, "D")
    for day in range(config.n_days + 1):
        test_end = config.start + np.timedelta64(day, "D")
        if test_end - span < config.start or test_end > config.series_end:
            continue
        clear = True
        for f in config.faults:
            if test_end - span < f.end + buffer and f.start < test_end:
                clear = False
                break
        if clear:
            candidates.append(test_end)
    if len(candidates) < config.n_normal_events:
        raise ValidationError(
            f"only {len(candidates)} fault-free spots for "
            f"{config.n_normal_events} normal events"
        )
    picks = np.linspace(0, len(candidates) - 1, config.n_normal_events)
    return [candidates[int(round(p))] for p in picks]


def generate(config: SynthConfig) -> SynthResult:
    """Generate the frame, inject faults, and derive events/reports/truth."""
    n = config.n_days * (86400 // GRID_SECONDS)
    timestamps = config.start + np.arange(n) * np.timedelta64(GRID_SECONDS, "s")
    values = _clean_values(config, timestamps)
    frame = TimeSeriesFrame(
        substation_id=config.substation_id,
        timestamps=timestamps,
        feature_names=[s.name for s in config.signals],
        values=values,
    )

    events: list[EventSpec] = []
    disturbances: list[Disturbance] = []
    reports: list[IncidentReport] = []
    truth: list[dict] = []
    delay = np.timedelta64(int(config.report_delay_hours * 3600), "s")

    for i, fault in enumerate(config.faults):
        frame = inject(frame, fault, seed=config.seed * 100003 + _FAULT_STREAM + i)
        report_time = fault.start + delay
        test_start = report_time - np.timedelta64(TEST_DAYS, "D")
        train_end = test_start - np.timedelta64(config.gap_days, "D")
        train_start = train_end - np.timedelta64(config.train_days, "D")
        if train_start < config.start:
            raise ValidationError(
                f"fault at {format_instant(fault.start)} leaves no room for training data"
            )
        if report_time > config.series_end:
            raise ValidationError(
                f"report for fault at {format_instant(fault.start)} falls past the series end"
            )
        event_id = f"ev-fault-{i + 1}"
        events.append(
            EventSpec(
                event_id=event_id,
                substation_id=config.substation_id,
                label="anomaly",
                train_start=train_start,
                train_end=train_end,
                test_start=test_start,
                test_end=report_time,
                report_time=report_time,
            )
        )
        disturbances.append(Disturbance(config.substation_id, report_time, "fault"))
        disturbances.append(Disturbance(config.substation_id, fault.end, "task"))
        reports.append(
            IncidentReport(
                substation_id=config.substation_id,
                report_time=report_time,
                problem_category=_CATEGORY[fault.fault_type],
                fault_label=fault.fault_type,
                monitoring_potential=4.0,
                anomaly_start=fault.start,
                anomaly_end=fault.end,
            )
        )
        truth.append(
            {
                "event_id": event_id,
                "substation_id": config.substation_id,
                "feature": fault.feature,
                "type": fault.fault_type,
                "start": format_instant(fault.start),
                "end": format_instant(fault.end),
                "magnitude": repr(fault.magnitude),
            }
        )

    for k, test_end in enumerate(_normal_test_ends(config)):
        test_start = test_end - np.timedelta64(TEST_DAYS, "D")
        train_end = test_start - np.timedelta64(config.gap_days, "D")
        events.append(
            EventSpec(
                event_id=f"ev-normal-{k + 1}",
                substation_id=config.substation_id,
                label="normal",
                train_start=train_end - np.timedelta64(config.train_days, "D"),
                train_end=train_end,
                test_start=test_start,
                test_end=test_end,
            )
        )

    return SynthResult(
        frame=frame,
        events=events,
        disturbances=sorted(disturbances, key=lambda d: (d.timestamp, d.kind)),
        reports=reports,
        ground_truth=truth,
    )


GROUND_TRUTH_COLUMNS = ["event_id", "substation_id", "feature", "type", "start", "end", "magnitude"]


def write_ground_truth(path, truth: list[dict]) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(GROUND_TRUTH_COLUMNS)
        for row in truth:
            writer.writerow([row[c] for c in GROUND_TRUTH_COLUMNS])


_CONFIG_KEYS = {
    "substation_id", "start", "n_days", "seed", "signals", "faults",
    "n_normal_events", "report_delay_hours", "train_days", "gap_days",
}


def config_from_dict(doc: dict) -> SynthConfig:
    """Build a SynthConfig from a JSON-style dict.

    ``signals`` entries mirror SignalSpec fields; ``faults`` entries use
    ``{feature, type, start, duration_hours, magnitude}``.
    """
    unknown = set(doc) - _CONFIG_KEYS
    if unknown:
        raise ValidationError(f"unknown synth config keys: {sorted(unknown)}")
    kwargs: dict = {}
    for key in ("substation_id", "n_days", "seed", "n_normal_events",
                "report_delay_hours", "train_days", "gap_days"):
        if key in doc:
            kwargs[key] = doc[key]
    if "start" in doc:
        kwargs["start"] = parse_instant(doc["start"])
    if "signals" in doc:
        kwargs["signals"] = tuple(SignalSpec(**spec) for spec in doc["signals"])
    if "faults" in doc:
        faults = []
        for item in doc["faults"]:
            extra = set(item) - {"feature", "type", "start", "duration_hours", "magnitude"}
            if extra:
                raise ValidationError(f"unknown fault keys: {sorted(extra)}")
            faults.append(
                FaultInjection(
                    feature=item["feature"],
                    fault_type=item["type"],
                    start=parse_instant(item["start"]),
                    duration=np.timedelta64(int(float(item["duration_hours"]) * 3600), "s"),
                    magnitude=float(item["magnitude"]),
                )
            )
        kwargs["faults"] = tuple(faults)
    return SynthConfig(**kwargs)
