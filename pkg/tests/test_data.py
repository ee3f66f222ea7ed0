"""CSV loaders/writers, grid validation, typed records, completeness."""

import numpy as np
import pytest

from conftest import T0, grid, make_frame
from heatsentry.data import (
    Disturbance,
    EventSpec,
    IncidentReport,
    TimeSeriesFrame,
    completeness,
    format_instant,
    load_disturbances,
    load_manifest,
    load_reports,
    load_timeseries,
    parse_instant,
    snap_to_grid,
    write_disturbances,
    write_manifest,
    write_reports,
    write_timeseries,
)
from heatsentry.errors import ParseError, ValidationError


def test_instant_round_trip():
    t = parse_instant("2030-03-27T01:50:00")
    assert format_instant(t) == "2030-03-27T01:50:00"
    assert parse_instant("2030-03-27 01:50:00") == t  # space separator accepted


def test_parse_instant_rejects_junk():
    with pytest.raises(ParseError):
        parse_instant("not-a-time")


def test_snap_to_grid():
    assert snap_to_grid(parse_instant("2030-01-01T00:04:59")) == parse_instant("2030-01-01T00:00:00")
    assert snap_to_grid(parse_instant("2030-01-01T00:05:00")) == parse_instant("2030-01-01T00:10:00")


def test_timeseries_round_trip(tmp_path):
    frame = make_frame(n=200, seed=3)
    values = frame.values.copy()
    values[5, 2] = np.nan  # missing cell survives the trip as an empty field
    frame = TimeSeriesFrame(frame.substation_id, frame.timestamps, frame.feature_names, values)
    path = tmp_path / "TST-1.csv"
    write_timeseries(frame, path)
    back = load_timeseries(path)
    assert back.substation_id == "TST-1"
    assert back.feature_names == frame.feature_names
    assert np.array_equal(back.timestamps, frame.timestamps)
    assert np.array_equal(np.isnan(back.values), np.isnan(values))
    assert np.array_equal(back.values[~np.isnan(values)], values[~np.isnan(values)])


def test_off_grid_row_names_file_and_row(tmp_path):
    path = tmp_path / "SUB-9.csv"
    path.write_text(
        "timestamp,a\n2030-01-01T00:00:00,1.0\n2030-01-01T00:07:00,2.0\n"
    )
    with pytest.raises(ParseError) as err:
        load_timeseries(path)
    assert "row 2" in str(err.value)
    assert "SUB-9.csv" in str(err.value)


def test_off_grid_row_snaps_when_asked(tmp_path):
    path = tmp_path / "SUB-9.csv"
    path.write_text(
        "timestamp,a\n2030-01-01T00:00:00,1.0\n2030-01-01T00:07:00,2.0\n"
    )
    frame = load_timeseries(path, snap=True)
    assert frame.timestamps[1] == parse_instant("2030-01-01T00:10:00")


def test_duplicate_and_nonmonotone_timestamps(tmp_path):
    dup = tmp_path / "d.csv"
    dup.write_text("timestamp,a\n2030-01-01T00:00:00,1\n2030-01-01T00:00:00,2\n")
    with pytest.raises(ValidationError, match="duplicate"):
        load_timeseries(dup)
    rev = tmp_path / "r.csv"
    rev.write_text("timestamp,a\n2030-01-01T00:10:00,1\n2030-01-01T00:00:00,2\n")
    with pytest.raises(ValidationError, match="non-monotone"):
        load_timeseries(rev)


def test_non_numeric_cell_names_row(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("timestamp,a\n2030-01-01T00:00:00,1.0\n2030-01-01T00:10:00,oops\n")
    with pytest.raises(ParseError, match="row 2"):
        load_timeseries(path)


def test_empty_cells_become_nan(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("timestamp,a,b\n2030-01-01T00:00:00,,3.5\n")
    frame = load_timeseries(path)
    assert np.isnan(frame.values[0, 0]) and frame.values[0, 1] == 3.5


def test_frame_rejects_duplicate_feature_names():
    with pytest.raises(ValidationError, match="duplicate feature"):
        TimeSeriesFrame("X", grid(2), ["a", "a"], np.zeros((2, 2)))


def test_frame_slice_half_open():
    frame = make_frame(n=20)
    sub = frame.slice(frame.timestamps[5], frame.timestamps[10])
    assert sub.n_samples == 5
    assert sub.timestamps[0] == frame.timestamps[5]
    with pytest.raises(ValidationError):
        frame.slice(frame.timestamps[10], frame.timestamps[10])


def test_disturbances_round_trip_and_kinds(tmp_path):
    items = [
        Disturbance("S-1", parse_instant("2030-01-02T00:00:00"), "task"),
        Disturbance("S-1", parse_instant("2030-01-01T00:00:00"), "fault"),
    ]
    path = tmp_path / "disturbances.csv"
    write_disturbances(items, path)
    back = load_disturbances(path)
    assert [d.kind for d in back] == ["fault", "task"]  # sorted by time
    with pytest.raises(ValidationError):
        Disturbance("S-1", T0, "outage")
    bad = tmp_path / "bad.csv"
    bad.write_text("substation_id,timestamp,kind\nS-1,2030-01-01T00:00:00,outage\n")
    with pytest.raises(ValidationError, match="row 1"):
        load_disturbances(bad)


def test_reports_round_trip(tmp_path):
    reports = [
        IncidentReport(
            substation_id="S-1",
            report_time=parse_instant("2030-02-01T08:00:00"),
            problem_category="no hot water",
            fault_label="valve stuck",
            monitoring_potential=3.5,
            anomaly_start=parse_instant("2030-01-30T00:00:00"),
            anomaly_end=parse_instant("2030-02-01T08:00:00"),
        ),
        IncidentReport("S-2", parse_instant("2030-02-02T00:00:00"), "noise"),
    ]
    path = tmp_path / "reports.csv"
    write_reports(reports, path)
    back = load_reports(path)
    assert back[0].fault_label == "valve stuck"
    assert back[0].monitoring_potential == 3.5
    assert back[1].anomaly_start is None and back[1].monitoring_potential is None


def test_monitoring_class_boundary():
    mk = lambda p: IncidentReport("S", T0, "x", monitoring_potential=p)
    assert mk(2.5).monitoring_class == "high"
    assert mk(2.4999).monitoring_class == "low"
    assert IncidentReport("S", T0, "x").monitoring_class is None
    with pytest.raises(ValidationError):
        mk(5.5)
    with pytest.raises(ValidationError):
        mk(0.5)


def test_report_anomaly_interval_ordering():
    with pytest.raises(ValidationError):
        IncidentReport("S", T0, "x", anomaly_start=T0 + np.timedelta64(1, "D"), anomaly_end=T0)


def _event(**kw):
    base = dict(
        event_id="ev-1",
        substation_id="S-1",
        label="anomaly",
        train_start=T0,
        train_end=T0 + np.timedelta64(28, "D"),
        test_start=T0 + np.timedelta64(35, "D"),
        test_end=T0 + np.timedelta64(42, "D"),
        report_time=T0 + np.timedelta64(42, "D"),
    )
    base.update(kw)
    return EventSpec(**base)


def test_event_spec_invariants():
    _event()  # valid
    with pytest.raises(ValidationError, match="7 days"):
        _event(test_end=T0 + np.timedelta64(41, "D"), report_time=T0 + np.timedelta64(41, "D"))
    with pytest.raises(ValidationError, match="14 days"):
        _event(train_end=T0 + np.timedelta64(13, "D"))
    with pytest.raises(ValidationError, match="report_time"):
        _event(report_time=None)
    with pytest.raises(ValidationError, match="test_end must equal report_time"):
        _event(report_time=T0 + np.timedelta64(41, "D"))
    with pytest.raises(ValidationError, match="normal event with report_time"):
        _event(label="normal")
    with pytest.raises(ValidationError, match="overlaps"):
        _event(train_end=T0 + np.timedelta64(36, "D"))
    _event(label="normal", report_time=None)  # valid normal event


def test_manifest_round_trip(tmp_path):
    events = [_event(), _event(event_id="ev-2", label="normal", report_time=None)]
    path = tmp_path / "events.csv"
    write_manifest(events, path)
    back = load_manifest(path)
    assert [e.event_id for e in back] == ["ev-1", "ev-2"]
    assert back[0].report_time == events[0].report_time
    assert back[1].report_time is None


def test_completeness_counts_full_feature_rows():
    # 10 expected samples; one row missing entirely, one row has a NaN cell
    ts = grid(8)
    ts = np.concatenate([ts[:4], ts[5:]])  # drop one timestamp
    values = np.ones((7, 2))
    values[2, 1] = np.nan
    frame = TimeSeriesFrame("S", ts, ["a", "b"], values)
    stat = completeness(frame, T0, T0 + 10 * np.timedelta64(600, "s"))
    assert stat.expected_samples == 10
    assert stat.present_samples == 6
    assert stat.completeness == pytest.approx(0.6)
    only_a = completeness(frame, T0, T0 + 10 * np.timedelta64(600, "s"), required=["a"])
    assert only_a.present_samples == 7
