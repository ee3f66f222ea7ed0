"""Synthetic series generator, fault injection, and artifact round trips."""

import numpy as np
import pytest

from heatsentry.data import (
    load_disturbances,
    load_manifest,
    load_reports,
    load_timeseries,
    write_disturbances,
    write_manifest,
    write_reports,
    write_timeseries,
)
from heatsentry.errors import SchemaError, ValidationError
from heatsentry.synth import (
    FaultInjection,
    SignalSpec,
    SynthConfig,
    config_from_dict,
    default_signals,
    generate,
    inject,
    write_ground_truth,
)

T0 = np.datetime64("2030-01-01T00:00:00", "s")
DAY = np.timedelta64(1, "D")
HOUR = np.timedelta64(3600, "s")


def _fault(day=60, duration_days=5, magnitude=-55.0, feature="dhw_setpoint",
           fault_type="setpoint_step_drop"):
    return FaultInjection(
        feature=feature,
        fault_type=fault_type,
        start=T0 + day * DAY,
        duration=duration_days * DAY,
        magnitude=magnitude,
    )


def test_generate_is_deterministic_per_seed():
    config = SynthConfig(n_days=70, seed=5, faults=(_fault(),), n_normal_events=2)
    a = generate(config)
    b = generate(config)
    assert np.array_equal(a.frame.values, b.frame.values)
    assert np.array_equal(a.frame.timestamps, b.frame.timestamps)
    assert a.events == b.events
    assert a.disturbances == b.disturbances
    other = generate(SynthConfig(n_days=70, seed=6, faults=(_fault(),), n_normal_events=2))
    assert not np.array_equal(a.frame.values, other.frame.values)
    assert np.array_equal(a.frame.timestamps, other.frame.timestamps)


def test_generated_series_shape_and_grid():
    result = generate(SynthConfig(n_days=10, seed=1))
    frame = result.frame
    assert frame.n_samples == 10 * 144
    steps = np.diff(frame.timestamps).astype("timedelta64[s]").astype(int)
    assert np.all(steps == 600)
    assert frame.feature_names == [s.name for s in default_signals()]
    assert np.all(np.isfinite(frame.values))
    assert not result.events and not result.reports


def test_setpoint_step_drop_shifts_only_window():
    base = generate(SynthConfig(n_days=70, seed=2)).frame
    fault = _fault(day=60, duration_days=5, magnitude=-55.0)
    hit = inject(base, fault, seed=9)
    j = base.feature_names.index("dhw_setpoint")
    inside = (base.timestamps >= fault.start) & (base.timestamps < fault.end)
    assert np.allclose(hit.values[inside, j], base.values[inside, j] - 55.0)
    assert np.array_equal(hit.values[~inside], base.values[~inside])
    other = [k for k in range(base.n_features) if k != j]
    assert np.array_equal(hit.values[:, other], base.values[:, other])


def test_zero_flow_rate_matches_seeded_band():
    base = generate(SynthConfig(n_days=70, seed=3)).frame
    fault = FaultInjection(
        feature="flow_primary",
        fault_type="intermittent_zero_flow",
        start=T0 + 60 * DAY,
        duration=np.timedelta64(1000, "m"),  # exactly 100 grid samples
        magnitude=0.3,
    )
    hit = inject(base, fault, seed=4)
    j = base.feature_names.index("flow_primary")
    inside = (base.timestamps >= fault.start) & (base.timestamps < fault.end)
    assert inside.sum() == 100
    zeros = int((hit.values[inside, j] == 0.0).sum())
    # binomial(100, 0.3): +/- 3 sigma around 30
    assert 16 <= zeros <= 44
    untouched = hit.values[inside, j] != 0.0
    assert np.array_equal(hit.values[inside, j][untouched],
                          base.values[inside, j][untouched])
    # the injection draws from its own seed, not the series seed
    again = inject(base, fault, seed=4)
    assert np.array_equal(again.values, hit.values)
    moved = inject(base, fault, seed=5)
    assert not np.array_equal(moved.values, hit.values)


def test_storage_decay_ramps_downward():
    base = generate(SynthConfig(n_days=70, seed=4)).frame
    fault = FaultInjection(
        feature="storage_temp_upper",
        fault_type="storage_temp_decay",
        start=T0 + 60 * DAY,
        duration=2 * DAY,
        magnitude=-10.0,
    )
    hit = inject(base, fault, seed=0)
    j = base.feature_names.index("storage_temp_upper")
    inside = np.nonzero((base.timestamps >= fault.start) & (base.timestamps < fault.end))[0]
    offsets = hit.values[inside, j] - base.values[inside, j]
    assert offsets[0] == 0.0  # ramp starts at zero deviation
    assert offsets[-1] == pytest.approx(-10.0 * (len(inside) - 1) / len(inside) / 2 * 2)
    assert np.all(np.diff(offsets) < 0)


def test_inject_zero_magnitude_and_zero_duration_are_noops():
    base = generate(SynthConfig(n_days=30, seed=5)).frame
    flat = inject(base, _fault(day=20, duration_days=2, magnitude=0.0), seed=1)
    assert np.array_equal(flat.values, base.values)
    empty = FaultInjection("dhw_setpoint", "setpoint_step_drop",
                           T0 + 20 * DAY, np.timedelta64(0, "s"), -5.0)
    assert np.array_equal(inject(base, empty, seed=1).values, base.values)


def test_inject_rejects_bad_targets():
    base = generate(SynthConfig(n_days=30, seed=6)).frame
    with pytest.raises(SchemaError):
        inject(base, _fault(day=20, feature="no_such_signal"), seed=0)
    with pytest.raises(ValidationError):
        inject(base, _fault(day=29, duration_days=5), seed=0)  # spills past end


def test_fault_injection_validation():
    with pytest.raises(ValidationError):
        _fault(magnitude=+5.0)  # a drop cannot be positive
    with pytest.raises(ValidationError):
        _fault(fault_type="intermittent_zero_flow", magnitude=1.5)  # rate in [0,1]
    with pytest.raises(ValidationError):
        _fault(fault_type="storage_temp_decay", magnitude=2.0)
    with pytest.raises(ValidationError):
        _fault(fault_type="melted_core")


def test_config_rejects_bad_layouts():
    with pytest.raises(ValidationError):
        SynthConfig(n_days=70, faults=(_fault(day=69, duration_days=5),))
    with pytest.raises(ValidationError):  # same-type overlap
        SynthConfig(n_days=90, faults=(_fault(day=60), _fault(day=62)))
    # different fault types may overlap in time
    SynthConfig(
        n_days=90,
        faults=(
            _fault(day=60),
            FaultInjection("flow_primary", "intermittent_zero_flow",
                           T0 + 61 * DAY, 2 * DAY, 0.3),
        ),
    )
    with pytest.raises(ValidationError):  # fault too early: no training room
        generate(SynthConfig(n_days=70, faults=(_fault(day=10),)))
    with pytest.raises(ValidationError):  # report lands past the series end
        generate(SynthConfig(n_days=66, faults=(_fault(day=65, duration_days=1),),
                             report_delay_hours=48.0))
    with pytest.raises(ValidationError):
        SynthConfig(signals=(
            SignalSpec("a", base=1.0, couple_to="missing", couple_gain=1.0),
        ))
    with pytest.raises(ValidationError):
        SynthConfig(train_days=7)


def test_normal_events_avoid_fault_neighborhood():
    config = SynthConfig(n_days=100, seed=7, faults=(_fault(day=85, duration_days=10),),
                         n_normal_events=5)
    result = generate(config)
    normals = [e for e in result.events if e.label == "normal"]
    assert len(normals) == 5
    fault = config.faults[0]
    for e in normals:
        assert e.test_end <= fault.start  # footprint must clear the fault window
        assert e.train_start >= config.start
        assert e.report_time is None
    anomalies = [e for e in result.events if e.label == "anomaly"]
    assert len(anomalies) == 1
    assert anomalies[0].report_time == fault.start + 24 * HOUR
    with pytest.raises(ValidationError):
        generate(SynthConfig(n_days=60, seed=7, faults=(_fault(day=45, duration_days=10),),
                             n_normal_events=5))


def test_artifacts_round_trip_through_loaders(tmp_path):
    config = SynthConfig(substation_id="SYN-rt", n_days=70, seed=8,
                         faults=(_fault(day=60, duration_days=5),), n_normal_events=2)
    result = generate(config)
    ts_path = tmp_path / "SYN-rt.csv"
    write_timeseries(result.frame, ts_path)
    write_disturbances(result.disturbances, tmp_path / "disturbances.csv")
    write_reports(result.reports, tmp_path / "reports.csv")
    write_manifest(result.events, tmp_path / "events.csv")
    write_ground_truth(tmp_path / "ground_truth.csv", result.ground_truth)

    frame = load_timeseries(ts_path)
    assert frame.substation_id == "SYN-rt"
    assert np.allclose(frame.values, result.frame.values)
    assert load_disturbances(tmp_path / "disturbances.csv") == result.disturbances
    reports = load_reports(tmp_path / "reports.csv")
    assert len(reports) == 1 and reports[0].fault_label == "setpoint_step_drop"
    assert reports[0].monitoring_class == "high"
    assert load_manifest(tmp_path / "events.csv") == result.events
    truth_text = (tmp_path / "ground_truth.csv").read_text()
    assert truth_text.splitlines()[0] == "event_id,substation_id,feature,type,start,end,magnitude"
    assert "ev-fault-1" in truth_text and "dhw_setpoint" in truth_text


def test_config_from_dict_round_trip():
    doc = {
        "substation_id": "SYN-cfg",
        "start": "2030-01-01 00:00:00",
        "n_days": 75,
        "seed": 11,
        "n_normal_events": 1,
        "report_delay_hours": 12.0,
        "signals": [
            {"name": "a", "base": 10.0, "daily_amp": 1.0, "noise_std": 0.1, "ar_coeff": 0.5},
            {"name": "b", "base": 5.0, "couple_to": "a", "couple_gain": 0.3},
        ],
        "faults": [
            {"feature": "a", "type": "setpoint_step_drop",
             "start": "2030-03-05 00:00:00", "duration_hours": 48, "magnitude": -4},
        ],
    }
    config = config_from_dict(doc)
    assert config.substation_id == "SYN-cfg"
    assert config.n_days == 75
    assert config.signals[1].couple_to == "a"
    assert config.faults[0].duration == np.timedelta64(48 * 3600, "s")
    assert config.faults[0].magnitude == -4.0
    result = generate(config)
    assert result.frame.feature_names == ["a", "b"]
    assert result.events[0].report_time == config.faults[0].start + 12 * HOUR

    with pytest.raises(ValidationError):
        config_from_dict({"n_days": 10, "bogus": 1})
    with pytest.raises(ValidationError):
        config_from_dict({"faults": [{"feature": "a", "type": "setpoint_step_drop",
                                      "start": "2030-03-05 00:00:00",
                                      "duration_hours": 1, "magnitude": -1,
                                      "surprise": True}]})
