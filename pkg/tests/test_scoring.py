"""Anomaly scores, threshold, criticality counter, detection, trace round trip."""

import numpy as np
import pytest

from conftest import T0, grid
from heatsentry.data import Disturbance
from heatsentry.errors import NumericError, ValidationError
from heatsentry.scoring import (
    CriticalitySeries,
    ScoreModel,
    build_maintenance_mask,
    detect_event,
    fit_score_model,
    load_trace,
    mahalanobis_scores,
    rmse_scores,
    run_criticality,
    score_points,
    write_trace,
)


def test_rmse_hand_values():
    assert rmse_scores(np.array([[1.0, 1.0, 1.0, 1.0]]))[0] == pytest.approx(1.0)
    assert rmse_scores(np.array([[3.0, 4.0, 0.0, 0.0]]))[0] == pytest.approx(2.5)


def test_mahalanobis_identity_covariance_is_euclidean():
    residuals = np.array([[3.0, 4.0], [0.0, 0.0], [-1.0, 1.0]])
    scores = mahalanobis_scores(residuals, np.zeros(2), np.eye(2))
    want = np.linalg.norm(residuals, axis=1)
    assert np.all(np.abs(scores - want) < 1e-12)


def _toy_fit(trained_setup, score_type):
    s = trained_setup
    return fit_score_model(s["model"], s["x"], s["cond"], score_type)


def test_fit_score_model_threshold_is_99th_percentile(trained_setup):
    sm = _toy_fit(trained_setup, "mahalanobis")
    scores, flags = score_points(sm, trained_setup["model"], trained_setup["x"],
                                 trained_setup["cond"])
    assert sm.t_ae == pytest.approx(float(np.percentile(scores, 99.0)), abs=1e-12)
    # strict > with linear interpolation: exactly 1% of distinct scores flagged
    n = scores.shape[0]
    assert flags.sum() == int(np.ceil(0.01 * (n - 1)))


def test_training_flag_rate_in_band(trained_setup):
    for score_type in ("rmse", "mahalanobis"):
        sm = _toy_fit(trained_setup, score_type)
        _, flags = score_points(sm, trained_setup["model"], trained_setup["x"],
                                trained_setup["cond"])
        rate = flags.mean()
        assert 0.005 <= rate <= 0.015


def test_flags_are_strictly_greater_than_threshold():
    # 101 distinct scores: p99 lands exactly on the 100th order statistic
    scores = np.arange(1.0, 102.0)
    t = float(np.percentile(scores, 99.0))
    assert t == pytest.approx(100.0)
    assert (scores > t).sum() == 1  # the == point is not flagged


def test_fit_needs_rows_and_handles_rank_deficiency(trained_setup):
    model = trained_setup["model"]
    with pytest.raises(ValidationError, match="100"):
        fit_score_model(model, trained_setup["x"][:50], trained_setup["cond"][:50])
    # rank-3 residual structure in d=10: plain inversion would blow up
    rng = np.random.default_rng(0)
    base = rng.normal(size=(500, 3)) @ rng.normal(size=(3, 10))
    sm = ScoreModel(
        score_type="mahalanobis",
        t_ae=0.0,
        training_error_mean=base.mean(axis=0),
        covariance_inverse=np.eye(10),
        regularization=0.0,
    )
    centered = base - base.mean(axis=0)
    cov = centered.T @ centered / base.shape[0]
    assert np.linalg.matrix_rank(cov) == 3
    lam = 1e-6 * np.trace(cov) / 10
    inv = np.linalg.inv(cov + lam * np.eye(10))
    scores = mahalanobis_scores(base, sm.training_error_mean, inv)
    assert np.all(np.isfinite(scores))


def test_fit_score_model_on_low_rank_data_succeeds():
    # single-feature scores stay finite even when residual covariance is singular
    from heatsentry.autoencoder import AEConfig, init_model

    config = AEConfig(hidden_units=(4,), latent_fraction=0.5, seed=0)
    model = init_model(config, n_features=10)
    rng = np.random.default_rng(4)
    x = rng.normal(size=(300, 3)) @ rng.normal(size=(3, 10))  # rank 3 inputs
    sm = fit_score_model(model, x, None, "mahalanobis")
    assert np.all(np.isfinite(sm.covariance_inverse))
    assert np.allclose(sm.covariance_inverse, sm.covariance_inverse.T)
    scores, _ = score_points(sm, model, x)
    assert np.all(np.isfinite(scores))
    assert sm.regularization > 0


def test_score_model_round_trip(trained_setup):
    sm = _toy_fit(trained_setup, "mahalanobis")
    back = ScoreModel.from_dict(sm.to_dict())
    assert back.score_type == sm.score_type
    assert back.t_ae == sm.t_ae
    assert np.array_equal(back.training_error_mean, sm.training_error_mean)
    assert np.array_equal(back.covariance_inverse, sm.covariance_inverse)
    assert back.regularization == sm.regularization


def _counter_oracle(flags, frozen):
    c, out = 0, []
    for f, z in zip(flags, frozen):
        if not z:
            c = c + 1 if f else max(0, c - 1)
        out.append(c)
    return np.array(out, dtype=np.int64)


def test_counter_matches_brute_force_state_machine():
    rng = np.random.default_rng(np.random.SeedSequence([8, 1]))
    for _ in range(200):
        n = int(rng.integers(1, 500))
        flags = rng.random(n) < rng.uniform(0.05, 0.9)
        frozen = rng.random(n) < 0.2
        series = run_criticality(flags, frozen)
        assert np.array_equal(series.counter, _counter_oracle(flags, frozen))


def test_counter_hold_rule():
    series = run_criticality(np.array([True, True, True]), np.array([False, True, False]))
    assert list(series.counter) == [1, 1, 2]


def test_counter_floor_at_zero():
    series = run_criticality(np.array([False, False, True, False, False, False]))
    assert list(series.counter) == [0, 0, 1, 0, 0, 0]
    assert series.c_max == 1


def test_detection_monotone_in_threshold():
    rng = np.random.default_rng(12)
    flags = rng.random(800) < 0.4
    series = run_criticality(flags, None, grid(800), np.zeros(800))
    previous = None
    for c_thr in range(1, 30):
        det = detect_event(series, c_thr)
        if det.detected and previous is not None:
            assert det.index >= previous
        if det.detected:
            previous = det.index
        elif previous is None:
            previous = None
    # once undetected, stays undetected for larger thresholds
    first_miss = None
    for c_thr in range(1, 60):
        det = detect_event(series, c_thr)
        if not det.detected:
            first_miss = c_thr
            break
    if first_miss is not None:
        assert not detect_event(series, first_miss + 5).detected


def test_detect_event_reports_first_crossing():
    flags = np.zeros(30, dtype=bool)
    flags[5:12] = True
    series = run_criticality(flags, None, grid(30), np.zeros(30))
    det = detect_event(series, 3)
    assert det.detected and det.index == 7
    assert det.t_detect == grid(30)[7]
    assert not detect_event(series, 8).detected
    with pytest.raises(ValidationError):
        detect_event(series, 0)


def test_maintenance_mask_settle_window():
    ts = grid(48)  # 8 hours
    task = T0 + np.timedelta64(2, "h")
    dist = [
        Disturbance("S-1", task, "task"),
        Disturbance("S-1", T0, "fault"),        # faults never freeze
        Disturbance("S-2", T0, "task"),         # other substation ignored
    ]
    frozen = build_maintenance_mask(ts, dist, substation_id="S-1")
    start = 12  # 2 h at 10-minute sampling
    assert not frozen[:start].any()
    assert frozen[start : start + 24].all()  # 4 h settle
    assert not frozen[start + 24 :].any()


def test_trace_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    flags = rng.random(100) < 0.3
    frozen = rng.random(100) < 0.1
    series = run_criticality(flags, frozen, grid(100), rng.normal(size=100))
    path = tmp_path / "trace.csv"
    write_trace(path, series)
    back = load_trace(path)
    assert np.array_equal(back.counter, series.counter)
    assert np.array_equal(back.flags, series.flags)
    assert np.array_equal(back.timestamps, series.timestamps)
    assert np.array_equal(back.scores, series.scores)  # repr round-trips exactly


def test_non_finite_training_scores_raise(trained_setup):
    x = trained_setup["x"].copy()
    x[0, 0] = np.inf
    with pytest.raises(NumericError):
        fit_score_model(trained_setup["model"], x, trained_setup["cond"])


def test_criticality_series_first_crossing():
    series = CriticalitySeries(
        counter=np.array([0, 1, 2, 1, 2, 3]),
        flags=np.zeros(6, dtype=bool),
        maintenance_mask=np.zeros(6, dtype=bool),
    )
    assert series.first_crossing(2) == 2
    assert series.first_crossing(3) == 5
    assert series.first_crossing(4) is None
