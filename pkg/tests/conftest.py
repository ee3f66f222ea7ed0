"""Shared builders: a deterministic multivariate frame and a small trained model."""

import numpy as np
import pytest

from heatsentry.autoencoder import AEConfig, init_model, train
from heatsentry.data import GRID_SECONDS, EventSpec, TimeSeriesFrame, write_manifest
from heatsentry.preprocess import TrainingMask, conditioning_matrix, fit_preprocessor, transform
from heatsentry.scoring import fit_score_model, run_criticality, write_trace

T0 = np.datetime64("2030-01-01T00:00:00", "s")
STEP = np.timedelta64(GRID_SECONDS, "s")

FEATURES = ["supply_temp", "return_temp", "flow", "power", "setpoint"]


def grid(n, start=T0):
    return start + np.arange(n) * STEP


def make_frame(n=2016, seed=0, substation_id="TST-1"):
    """Five correlated signals: sinusoid drivers plus AR(1) noise, fixed per seed."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 99]))
    t = np.arange(n) * (GRID_SECONDS / 86400.0)  # days
    daily = np.sin(2 * np.pi * t)
    weekly = np.sin(2 * np.pi * t / 7.0)

    def ar1(scale, coeff):
        eps = rng.normal(0.0, scale * np.sqrt(1 - coeff**2), n)
        out = np.empty(n)
        out[0] = eps[0]
        for i in range(1, n):
            out[i] = coeff * out[i - 1] + eps[i]
        return out

    supply = 80.0 + 5.0 * daily + ar1(0.8, 0.8)
    ret = 45.0 + 0.5 * supply - 0.5 * 80.0 + ar1(0.5, 0.6)
    flow = 2.5 + 0.8 * daily + 0.3 * weekly + ar1(0.1, 0.7)
    power = 50.0 + 12.0 * (flow - 2.5) + ar1(1.0, 0.5)
    setpoint = 65.0 + ar1(0.05, 0.0)
    values = np.column_stack([supply, ret, flow, power, setpoint])
    return TimeSeriesFrame(substation_id, grid(n), list(FEATURES), values)


def all_rows_mask(frame):
    return TrainingMask(np.ones(frame.n_samples, dtype=bool), [])


@pytest.fixture(scope="session")
def trained_setup():
    """Small trained model + preprocessor + score model over make_frame data."""
    frame = make_frame(n=2016, seed=0)
    pre = fit_preprocessor(frame, all_rows_mask(frame), conditioning="none")
    x, _ = transform(frame, pre)
    cond = conditioning_matrix(frame.timestamps, "none")
    config = AEConfig(
        hidden_units=(16, 8),
        latent_fraction=0.5,
        learning_rate=1e-3,
        noise_std=0.05,
        batch_size=256,
        epochs=40,
        early_stop_patience=40,
        seed=1,
        conditioning="none",
    )
    model = init_model(config, n_features=pre.n_features)
    model.preprocessor = pre
    model, report = train(model, x, cond, config)
    score_model = fit_score_model(model, x, cond, "mahalanobis")
    return {
        "frame": frame,
        "pre": pre,
        "x": x,
        "cond": cond,
        "config": config,
        "model": model,
        "report": report,
        "score_model": score_model,
    }


def write_companion_set(root, n_each=5, c_anom=12, c_norm=2):
    """Separable tuning set: anomaly traces peak at c_anom, normals at c_norm.

    Returns (manifest_path, traces_dir). Counter shapes are honest ramps
    (|step| <= 1) so they are valid run_criticality outputs.
    """
    traces = root / "traces"
    traces.mkdir(parents=True, exist_ok=True)
    n = 1008  # 7 days
    events = []
    test_end = T0 + np.timedelta64(42, "D")
    for i in range(n_each):
        for label, peak in (("anomaly", c_anom), ("normal", c_norm)):
            event_id = f"cmp-{label}-{i + 1}"
            flags = np.zeros(n, dtype=bool)
            flags[50 + i : 50 + i + peak] = True
            series = run_criticality(flags, None, grid(n, test_end - np.timedelta64(7, "D")),
                                     np.zeros(n))
            write_trace(traces / f"{event_id}.csv", series)
            events.append(
                EventSpec(
                    event_id=event_id,
                    substation_id="CMP-1",
                    label=label,
                    train_start=T0,
                    train_end=T0 + np.timedelta64(28, "D"),
                    test_start=test_end - np.timedelta64(7, "D"),
                    test_end=test_end,
                    report_time=test_end if label == "anomaly" else None,
                )
            )
    manifest = root / "events.csv"
    write_manifest(events, manifest)
    return manifest, traces
