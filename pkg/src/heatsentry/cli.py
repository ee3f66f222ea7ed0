"""Command-line pipeline: synth, validate, train, detect, tune, evaluate, attribute.

One --out workspace composes across subcommands:

    heatsentry synth     --out ws/data --seed 7
    heatsentry validate  --data ws/data
    heatsentry train     --data ws/data --out ws --variant conditional
    heatsentry detect    --data ws/data --out ws
    heatsentry tune      --data ws/data --out ws
    heatsentry evaluate  --data ws/data --out ws
    heatsentry attribute --data ws/data --out ws --event ev-fault-1

Workspace layout: ``models/<event_id>/`` bundles, ``traces/<event_id>.csv``
criticality traces, ``detections.csv``, ``threshold.json`` +
``reliability_curve.csv``, ``metrics.json``/``metrics.txt``/``confusion.csv``,
and ``attribution/<event_id>/``. Per-event failures are recorded and reported;
they never abort the rest of a batch.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .attribution import ArcanaConfig, attribution_report
from .autoencoder import AEConfig, init_model, train
from .bundle import FORMAT_VERSION, config_hash, load_bundle, save_bundle
from .data import (
    GRID_SECONDS,
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
    write_disturbances,
    write_manifest,
    write_reports,
    write_timeseries,
)
from .errors import HeatSentryError, ValidationError
from .evaluation import (
    DEFAULT_WINDOW_HOURS,
    build_outcome,
    confusion_rows,
    evaluate_events,
    format_text_table,
    select_threshold,
    validate_window,
)
from .preprocess import build_training_mask, conditioning_matrix, fit_preprocessor, transform
from .presets import VARIANTS, conditioning_for_variant, get_profile, normalize_variant
from .scoring import (
    SCORE_TYPES,
    build_maintenance_mask,
    detect_event,
    fit_score_model,
    load_trace,
    run_criticality,
    score_points,
    write_trace,
)
from .synth import (
    FaultInjection,
    SynthConfig,
    config_from_dict,
    generate,
    write_ground_truth,
)

RESERVED_FILES = {"disturbances.csv", "reports.csv", "events.csv", "ground_truth.csv"}
SAMPLES_PER_HOUR = 3600.0 / GRID_SECONDS
TEST_SPAN_HOURS = 7 * 24.0

DETECTION_COLUMNS = [
    "event_id", "substation_id", "label", "c_thr", "c_max",
    "detected", "t_detect", "n_samples", "n_flags",
]

_VARIANT_FOR_CONDITIONING = {v: k for k, v in VARIANTS.items()}


# ---------------------------------------------------------------------------
# run configuration (JSON file merged with flag overrides)


@dataclass
class RunConfig:
    variant: str = "default"
    profile: str = "profile-a"
    score_type: str | None = None
    c_thr: int | None = None
    window_hours: float = DEFAULT_WINDOW_HOURS
    seed: int = 0
    jobs: int = 1
    ae: dict = field(default_factory=dict)


_RUN_CONFIG_KEYS = {
    "variant", "profile", "score", "cthr", "window_hours", "seed", "jobs", "epochs", "ae",
}


def resolve_run_config(args) -> RunConfig:
    """Flags win over the JSON config file, which wins over profile defaults."""
    doc: dict = {}
    path = getattr(args, "config", None)
    if path:
        with open(path) as fh:
            doc = json.load(fh)
        unknown = set(doc) - _RUN_CONFIG_KEYS
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")

    def pick(name, default):
        value = getattr(args, name, None)
        if value is not None:
            return value
        return doc.get(name, default)

    ae = dict(doc.get("ae", {}))
    epochs = pick("epochs", None)
    if epochs is not None:
        ae["epochs"] = int(epochs)
    cfg = RunConfig(
        variant=normalize_variant(str(pick("variant", "default"))),
        profile=str(pick("profile", "profile-a")),
        score_type=pick("score", None),
        c_thr=pick("cthr", None),
        window_hours=float(pick("window_hours", DEFAULT_WINDOW_HOURS)),
        seed=int(pick("seed", 0)),
        jobs=int(pick("jobs", 1)),
        ae=ae,
    )
    get_profile(cfg.profile)
    if cfg.score_type is not None and cfg.score_type not in SCORE_TYPES:
        raise ValidationError(f"unknown score type {cfg.score_type!r}")
    if cfg.c_thr is not None and int(cfg.c_thr) < 1:
        raise ValidationError("cthr must be >= 1")
    if cfg.window_hours <= 0:
        raise ValidationError("window_hours must be positive")
    if cfg.jobs < 1:
        raise ValidationError("jobs must be >= 1")
    return cfg


def build_ae_config(cfg: RunConfig) -> AEConfig:
    payload = get_profile(cfg.profile).ae.to_dict()
    payload.update(cfg.ae)
    payload["conditioning"] = conditioning_for_variant(cfg.variant)
    payload["seed"] = cfg.seed
    return AEConfig.from_dict(payload)


def resolve_score_type(cfg: RunConfig) -> str:
    return cfg.score_type or get_profile(cfg.profile).score_type


# ---------------------------------------------------------------------------
# dataset access (cached per absolute path; worker processes fill their own)

_FRAMES: dict = {}
_SIDECARS: dict = {}


def _frame(data_dir: str, substation_id: str) -> TimeSeriesFrame:
    path = os.path.join(os.path.abspath(data_dir), f"{substation_id}.csv")
    if path not in _FRAMES:
        if not os.path.exists(path):
            raise ValidationError(f"no data file for substation {substation_id!r} ({path})")
        _FRAMES[path] = load_timeseries(path)
    return _FRAMES[path]


def _sidecars(data_dir: str) -> tuple[list[Disturbance], list[IncidentReport]]:
    key = os.path.abspath(data_dir)
    if key not in _SIDECARS:
        dist_path = os.path.join(key, "disturbances.csv")
        rep_path = os.path.join(key, "reports.csv")
        disturbances = load_disturbances(dist_path) if os.path.exists(dist_path) else []
        reports = load_reports(rep_path) if os.path.exists(rep_path) else []
        _SIDECARS[key] = (disturbances, reports)
    return _SIDECARS[key]


def _manifest_path(args) -> str:
    if getattr(args, "manifest", None):
        return args.manifest
    data = getattr(args, "data", None)
    if data:
        return os.path.join(data, "events.csv")
    raise ValidationError("need --manifest (or --data to use its events.csv)")


def _load_events(args) -> list[EventSpec]:
    path = _manifest_path(args)
    if not os.path.exists(path):
        raise ValidationError(f"manifest not found: {path}")
    return sorted(load_manifest(path), key=lambda e: e.event_id)


# ---------------------------------------------------------------------------
# output helpers


def _ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def _write_json(path: str, doc: dict) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _safe_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "_", name)


def _models_dir(args) -> str:
    if getattr(args, "models", None):
        return args.models
    return os.path.join(args.out, "models")


def _traces_dir(args) -> str:
    if getattr(args, "traces", None):
        return args.traces
    return os.path.join(args.out, "traces")


# ---------------------------------------------------------------------------
# validate


def cmd_validate(args) -> int:
    data = os.path.abspath(args.data)
    if not os.path.isdir(data):
        print(f"error: {data} is not a directory", file=sys.stderr)
        return 1
    errors: list[str] = []
    frames: dict[str, TimeSeriesFrame] = {}
    for name in sorted(os.listdir(data)):
        if not name.endswith(".csv") or name in RESERVED_FILES:
            continue
        try:
            frame = load_timeseries(os.path.join(data, name))
            frames[frame.substation_id] = frame
        except HeatSentryError as exc:
            errors.append(str(exc))
    for name, loader in (("disturbances.csv", load_disturbances), ("reports.csv", load_reports)):
        path = os.path.join(data, name)
        if os.path.exists(path):
            try:
                loader(path)
            except HeatSentryError as exc:
                errors.append(str(exc))

    events: list[EventSpec] = []
    manifest = args.manifest or os.path.join(data, "events.csv")
    if os.path.exists(manifest):
        try:
            events = sorted(load_manifest(manifest), key=lambda e: e.event_id)
        except HeatSentryError as exc:
            errors.append(str(exc))
    for ev in events:
        frame = frames.get(ev.substation_id)
        if frame is None:
            errors.append(f"{ev.event_id}: no data file for substation {ev.substation_id!r}")
            continue
        if frame.slice(ev.test_start, ev.test_end).n_samples == 0:
            errors.append(f"{ev.event_id}: test window has no samples")
        if frame.slice(ev.train_start, ev.train_end).n_samples == 0:
            errors.append(f"{ev.event_id}: train window has no samples")

    if frames:
        print(f"{'substation':<16} {'rows':>8} {'features':>8} {'complete':>9}  span")
        for sid in sorted(frames):
            frame = frames[sid]
            stat = completeness(
                frame,
                frame.timestamps[0],
                frame.timestamps[-1] + np.timedelta64(GRID_SECONDS, "s"),
            )
            print(
                f"{sid:<16} {frame.n_samples:>8} {frame.n_features:>8} "
                f"{stat.completeness:>8.1%}  "
                f"{format_instant(frame.timestamps[0])} .. {format_instant(frame.timestamps[-1])}"
            )
    else:
        errors.append(f"no substation series found under {data}")
    if events:
        n_anom = sum(1 for e in events if e.label == "anomaly")
        print(f"events: {len(events)} ({n_anom} anomaly, {len(events) - n_anom} normal)")

    for message in errors:
        print(f"ERROR {message}", file=sys.stderr)
    print(f"validate: {'FAIL' if errors else 'OK'} ({len(errors)} errors)")
    return 1 if errors else 0


# ---------------------------------------------------------------------------
# train


def _train_event(task: dict) -> dict:
    """One event end to end; any failure is captured, never propagated."""
    ev: EventSpec = task["event"]
    try:
        ae_cfg = AEConfig.from_dict(task["ae"])
        payload = {
            "format_version": FORMAT_VERSION,
            "event": {
                "event_id": ev.event_id,
                "substation_id": ev.substation_id,
                "train_start": format_instant(ev.train_start),
                "train_end": format_instant(ev.train_end),
            },
            "ae": task["ae"],
            "score_type": task["score_type"],
        }
        cfg_hash = config_hash(payload)
        bundle_dir = task["bundle_dir"]
        if not task["force"] and _existing_hash(bundle_dir) == cfg_hash:
            return {"event_id": ev.event_id, "status": "cached", "config_hash": cfg_hash}

        frame = _frame(task["data_dir"], ev.substation_id)
        disturbances, reports = _sidecars(task["data_dir"])
        sub = frame.slice(ev.train_start, ev.train_end)
        mask = build_training_mask(
            sub,
            [d for d in disturbances if d.substation_id == ev.substation_id],
            [r for r in reports if r.substation_id == ev.substation_id],
        )
        pre = fit_preprocessor(sub, mask, conditioning=ae_cfg.conditioning)
        x_all, _ = transform(sub, pre)
        cond_all = conditioning_matrix(sub.timestamps, ae_cfg.conditioning)
        x_train = x_all[mask.mask]
        cond_train = cond_all[mask.mask]

        model = init_model(ae_cfg, n_features=pre.n_features)
        model.preprocessor = pre
        trained, report = train(model, x_train, cond_train, ae_cfg)
        score_model = fit_score_model(trained, x_train, cond_train, task["score_type"])
        _ensure_dir(bundle_dir)
        save_bundle(bundle_dir, trained, score_model, report.to_dict(), cfg_hash)
        return {
            "event_id": ev.event_id,
            "status": "trained",
            "config_hash": cfg_hash,
            "n_features": pre.n_features,
            "n_train_rows": int(x_train.shape[0]),
            "best_epoch": report.best_epoch,
            "stopped_epoch": report.stopped_epoch,
            "final_val_mse": report.final_val_mse,
            "t_ae": score_model.t_ae,
        }
    except Exception as exc:
        return {
            "event_id": ev.event_id,
            "status": "failed",
            "error": f"{type(exc).__name__}: {exc}",
        }


def _existing_hash(bundle_dir: str) -> str | None:
    path = os.path.join(bundle_dir, "model.json")
    try:
        with open(path) as fh:
            return json.load(fh).get("config_hash")
    except (OSError, ValueError):
        return None


def _run_batch(worker, tasks: list[dict], jobs: int) -> list[dict]:
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(worker, tasks))
    else:
        results = [worker(task) for task in tasks]
    return sorted(results, key=lambda r: r["event_id"])


def cmd_train(args) -> int:
    cfg = resolve_run_config(args)
    events = _load_events(args)
    ae_payload = build_ae_config(cfg).to_dict()
    score_type = resolve_score_type(cfg)
    models = _ensure_dir(_models_dir(args))
    tasks = [
        {
            "event": ev,
            "data_dir": args.data,
            "ae": ae_payload,
            "score_type": score_type,
            "bundle_dir": os.path.join(models, _safe_name(ev.event_id)),
            "force": bool(args.force),
        }
        for ev in events
    ]
    results = _run_batch(_train_event, tasks, cfg.jobs)
    for r in results:
        if r["status"] == "trained":
            print(
                f"{r['event_id']}: trained ({r['n_features']} features, "
                f"best epoch {r['best_epoch']}/{r['stopped_epoch']}, "
                f"val mse {r['final_val_mse']:.5f})"
            )
        elif r["status"] == "cached":
            print(f"{r['event_id']}: cached (config unchanged)")
        else:
            print(f"{r['event_id']}: FAILED: {r['error']}", file=sys.stderr)
    summary = {
        "variant": cfg.variant,
        "profile": cfg.profile,
        "score_type": score_type,
        "ae": ae_payload,
        "results": results,
    }
    _ensure_dir(args.out)
    _write_json(os.path.join(args.out, "train_summary.json"), summary)
    n_ok = sum(1 for r in results if r["status"] != "failed")
    print(f"train: {n_ok}/{len(results)} events ready under {models}")
    return 0 if n_ok else 1


# ---------------------------------------------------------------------------
# detect


def _detect_event_task(task: dict) -> dict:
    ev: EventSpec = task["event"]
    try:
        bundle = load_bundle(task["bundle_dir"])
        model = bundle.model
        c_thr = task["c_thr"]
        if c_thr is None:
            variant = _VARIANT_FOR_CONDITIONING[model.conditioning]
            c_thr = get_profile(task["profile"]).c_thr[variant]
        frame = _frame(task["data_dir"], ev.substation_id)
        sub = frame.slice(ev.test_start, ev.test_end)
        if sub.n_samples == 0:
            raise ValidationError("test window has no samples")
        x, _ = transform(sub, model.preprocessor)
        cond = conditioning_matrix(sub.timestamps, model.conditioning)
        scores, flags = score_points(bundle.score_model, model, x, cond)
        disturbances, _ = _sidecars(task["data_dir"])
        frozen = build_maintenance_mask(
            sub.timestamps, disturbances, substation_id=ev.substation_id
        )
        series = run_criticality(flags, frozen, sub.timestamps, scores)
        write_trace(task["trace_path"], series)
        det = detect_event(series, c_thr)
        return {
            "event_id": ev.event_id,
            "status": "ok",
            "substation_id": ev.substation_id,
            "label": ev.label,
            "c_thr": int(c_thr),
            "c_max": det.c_max,
            "detected": det.detected,
            "t_detect": format_instant(det.t_detect) if det.t_detect is not None else "",
            "n_samples": sub.n_samples,
            "n_flags": int(flags.sum()),
        }
    except Exception as exc:
        return {
            "event_id": ev.event_id,
            "status": "failed",
            "error": f"{type(exc).__name__}: {exc}",
        }


def cmd_detect(args) -> int:
    cfg = resolve_run_config(args)
    events = _load_events(args)
    models = _models_dir(args)
    traces = _ensure_dir(_traces_dir(args))
    tasks = [
        {
            "event": ev,
            "data_dir": args.data,
            "bundle_dir": os.path.join(models, _safe_name(ev.event_id)),
            "trace_path": os.path.join(traces, f"{_safe_name(ev.event_id)}.csv"),
            "c_thr": int(cfg.c_thr) if cfg.c_thr is not None else None,
            "profile": cfg.profile,
        }
        for ev in events
    ]
    results = _run_batch(_detect_event_task, tasks, cfg.jobs)
    rows = [r for r in results if r["status"] == "ok"]
    failed = [r for r in results if r["status"] == "failed"]
    _ensure_dir(args.out)
    with open(os.path.join(args.out, "detections.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(DETECTION_COLUMNS)
        for r in rows:
            writer.writerow(
                [
                    r["event_id"], r["substation_id"], r["label"], r["c_thr"], r["c_max"],
                    "true" if r["detected"] else "false", r["t_detect"],
                    r["n_samples"], r["n_flags"],
                ]
            )
    for r in rows:
        mark = f"detected at {r['t_detect']}" if r["detected"] else "not detected"
        print(f"{r['event_id']} [{r['label']}]: c_max={r['c_max']} c_thr={r['c_thr']} {mark}")
    for r in failed:
        print(f"{r['event_id']}: FAILED: {r['error']}", file=sys.stderr)
    _write_json(os.path.join(args.out, "detect_summary.json"), {"results": results})
    print(f"detect: {len(rows)}/{len(results)} events scored; traces under {traces}")
    return 0 if rows else 1


# ---------------------------------------------------------------------------
# tune


def cmd_tune(args) -> int:
    cfg = resolve_run_config(args)
    events = _load_events(args)
    traces_dir = _traces_dir(args)
    traces = []
    labels = []
    for ev in events:
        path = os.path.join(traces_dir, f"{_safe_name(ev.event_id)}.csv")
        if not os.path.exists(path):
            raise ValidationError(f"{ev.event_id}: no trace at {path} (run detect first)")
        traces.append(load_trace(path))
        labels.append(ev.label)
    search = select_threshold(traces, labels, seed=cfg.seed)
    at_best = float(search.mean_reliability[int(np.nonzero(search.grid == search.c_thr)[0][0])])
    _ensure_dir(args.out)
    _write_json(
        os.path.join(args.out, "threshold.json"),
        {
            "c_thr": int(search.c_thr),
            "mean_reliability": at_best,
            "n_events": len(events),
            "seed": cfg.seed,
        },
    )
    with open(os.path.join(args.out, "reliability_curve.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["c_thr", "mean_reliability"])
        for c, rel in zip(search.grid, search.mean_reliability):
            writer.writerow([int(c), repr(float(rel))])
    print(f"tune: C_thr = {search.c_thr} (cv mean reliability {at_best:.4f}) over {len(events)} events")
    return 0


# ---------------------------------------------------------------------------
# evaluate


def _read_detections(path: str) -> list[dict]:
    if not os.path.exists(path):
        raise ValidationError(f"detections not found: {path} (run detect first)")
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        if row.get("event_id") is None or row.get("detected") not in ("true", "false"):
            raise ValidationError(f"malformed detections file: {path}")
    return rows


def cmd_evaluate(args) -> int:
    cfg = resolve_run_config(args)
    events = {e.event_id: e for e in _load_events(args)}
    detections_path = args.detections or os.path.join(args.out, "detections.csv")
    rows = sorted(_read_detections(detections_path), key=lambda r: r["event_id"])
    traces_dir = _traces_dir(args)

    outcomes = []
    per_event = []
    notes: list[str] = []
    c_thrs = set()
    for row in rows:
        ev = events.get(row["event_id"])
        if ev is None:
            raise ValidationError(f"{row['event_id']}: not in manifest")
        if ev.label != row["label"]:
            raise ValidationError(f"{ev.event_id}: label mismatch between manifest and detections")
        c_thrs.add(int(row["c_thr"]))
        detected = row["detected"] == "true"
        t_detect = parse_instant(row["t_detect"]) if row["t_detect"] else None
        flags = None
        if ev.label == "normal":
            trace_path = os.path.join(traces_dir, f"{_safe_name(ev.event_id)}.csv")
            if os.path.exists(trace_path):
                flags = load_trace(trace_path).flags
            else:
                notes.append(f"{ev.event_id}: no trace; pointwise accuracy omitted")
        outcome = build_outcome(
            ev.event_id, ev.label, detected, t_detect, ev.report_time,
            flags, cfg.window_hours,
        )
        outcomes.append(outcome)
        per_event.append(
            {
                "event_id": ev.event_id,
                "label": ev.label,
                "outcome": outcome.outcome,
                "detected": detected,
                "t_detect": row["t_detect"] or None,
                "earliness": outcome.earliness,
                "lead_hours": outcome.lead_hours,
                "pointwise_accuracy": outcome.pointwise_accuracy,
            }
        )
    missing = sorted(set(events) - {r["event_id"] for r in rows})
    for event_id in missing:
        notes.append(f"{event_id}: in manifest but absent from detections; skipped")

    report = evaluate_events(outcomes, cfg.window_hours)
    for c_thr in sorted(c_thrs):
        notes.extend(validate_window(cfg.window_hours, c_thr, SAMPLES_PER_HOUR, TEST_SPAN_HOURS))

    table = format_text_table(report)
    _ensure_dir(args.out)
    _write_json(
        os.path.join(args.out, "metrics.json"),
        {"metrics": report.to_dict(), "events": per_event, "warnings": notes},
    )
    with open(os.path.join(args.out, "metrics.txt"), "w") as fh:
        fh.write(table + "\n")
        for note in notes:
            fh.write(f"warning: {note}\n")
    with open(os.path.join(args.out, "confusion.csv"), "w", newline="") as fh:
        csv.writer(fh).writerows(confusion_rows(report))
    print(table)
    for note in notes:
        print(f"warning: {note}", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# attribute


def _attribution_window(args, ev: EventSpec) -> tuple[np.datetime64, np.datetime64]:
    start = parse_instant(args.start) if args.start else None
    end = parse_instant(args.end) if args.end else ev.test_end
    if start is None:
        detections_path = args.detections or os.path.join(args.out, "detections.csv")
        if os.path.exists(detections_path):
            for row in _read_detections(detections_path):
                if row["event_id"] == ev.event_id and row["t_detect"]:
                    start = parse_instant(row["t_detect"])
                    break
    if start is None:
        start = ev.test_start
    return start, end


def _render_plots(outdir: str, event_id: str, report, trace) -> list[str]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    written = []
    if trace is not None and trace.timestamps is not None:
        fig, ax = plt.subplots(figsize=(9.0, 3.0))
        ax.step(trace.timestamps, trace.counter, where="post", lw=1.0)
        ax.set_title(f"{event_id}: criticality")
        ax.set_ylabel("counter")
        fig.autofmt_xdate()
        path = os.path.join(outdir, "criticality.png")
        fig.savefig(path, dpi=110, bbox_inches="tight")
        plt.close(fig)
        written.append(path)
    for rank, series in enumerate(report.series, start=1):
        fig, ax = plt.subplots(figsize=(9.0, 3.0))
        ax.plot(report.timestamps, series.actual, lw=1.0, label="actual")
        ax.plot(report.timestamps, series.reconstructed, lw=1.0, label="reconstructed")
        ax.set_title(f"{event_id}: {series.name} (importance {series.importance:.3f})")
        ax.legend(loc="best", fontsize=8)
        fig.autofmt_xdate()
        path = os.path.join(outdir, f"feature_{rank}_{_safe_name(series.name)}.png")
        fig.savefig(path, dpi=110, bbox_inches="tight")
        plt.close(fig)
        written.append(path)
    return written


def cmd_attribute(args) -> int:
    cfg = resolve_run_config(args)
    events = {e.event_id: e for e in _load_events(args)}
    ev = events.get(args.event)
    if ev is None:
        raise ValidationError(f"event {args.event!r} not in manifest")
    bundle = load_bundle(os.path.join(_models_dir(args), _safe_name(ev.event_id)))
    frame = _frame(args.data, ev.substation_id)
    window = _attribution_window(args, ev)
    arcana = ArcanaConfig(alpha=args.alpha)
    report = attribution_report(bundle.model, frame, window, arcana, top_k=args.top_k)

    outdir = _ensure_dir(os.path.join(args.out, "attribution", _safe_name(ev.event_id)))
    doc = report.to_dict()
    doc["event_id"] = ev.event_id
    doc["alpha"] = args.alpha
    _write_json(os.path.join(outdir, "attribution.json"), doc)
    for rank, series in enumerate(report.series, start=1):
        path = os.path.join(outdir, f"feature_{rank}_{_safe_name(series.name)}.csv")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["timestamp", "actual", "reconstructed"])
            for i in range(report.timestamps.shape[0]):
                writer.writerow(
                    [
                        format_instant(report.timestamps[i]),
                        repr(float(series.actual[i])),
                        repr(float(series.reconstructed[i])),
                    ]
                )

    trace = None
    trace_path = os.path.join(_traces_dir(args), f"{_safe_name(ev.event_id)}.csv")
    if os.path.exists(trace_path):
        trace = load_trace(trace_path)
    if not args.no_plots:
        _render_plots(outdir, ev.event_id, report, trace)

    if report.ranking.degenerate:
        print("note: all bias vectors were zero; importances are uniform", file=sys.stderr)
    print(
        f"attribute {ev.event_id} [{format_instant(report.window_start)} .. "
        f"{format_instant(report.window_end)}):"
    )
    for rank, (name, importance) in enumerate(report.ranking.top(args.top_k), start=1):
        print(f"  {rank}. {name}  {importance:.4f}")
    print(f"outputs under {outdir}")
    return 0


# ---------------------------------------------------------------------------
# synth


def _demo_synth_config(args) -> SynthConfig:
    start = np.datetime64("2030-01-01T00:00:00", "s")
    faults: tuple[FaultInjection, ...] = ()
    if not args.clean:
        if args.days < 60:
            raise ValidationError("the demo fault needs --days >= 60 (or pass --clean)")
        faults = (
            FaultInjection(
                feature="dhw_setpoint",
                fault_type="setpoint_step_drop",
                start=start + np.timedelta64(args.days - 15, "D"),
                duration=np.timedelta64(10 * 86400, "s"),
                magnitude=-55.0,
            ),
        )
    return SynthConfig(
        start=start,
        n_days=args.days,
        seed=args.seed if args.seed is not None else 0,
        faults=faults,
        n_normal_events=args.normal_events,
    )


def cmd_synth(args) -> int:
    if args.config:
        with open(args.config) as fh:
            doc = json.load(fh)
        if args.seed is not None:
            doc["seed"] = args.seed
        config = config_from_dict(doc)
    else:
        config = _demo_synth_config(args)
    result = generate(config)
    out = _ensure_dir(args.out)
    write_timeseries(result.frame, os.path.join(out, f"{config.substation_id}.csv"))
    write_disturbances(result.disturbances, os.path.join(out, "disturbances.csv"))
    write_reports(result.reports, os.path.join(out, "reports.csv"))
    write_manifest(result.events, os.path.join(out, "events.csv"))
    write_ground_truth(os.path.join(out, "ground_truth.csv"), result.ground_truth)
    n_anom = sum(1 for e in result.events if e.label == "anomaly")
    print(
        f"synth: {result.frame.n_samples} samples x {result.frame.n_features} features "
        f"for {config.substation_id}; {len(result.events)} events "
        f"({n_anom} anomaly, {len(result.events) - n_anom} normal) under {out}"
    )
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="heatsentry",
        description="Early fault detection for district heating substations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run config; flags override its values")
    common.add_argument("--variant", choices=sorted(VARIANTS), help="calendar conditioning variant")
    common.add_argument("--profile", help="hyperparameter profile (profile-a, profile-b)")
    common.add_argument("--score", choices=SCORE_TYPES, help="anomaly score type")
    common.add_argument("--cthr", type=int, help="criticality threshold")
    common.add_argument("--window-hours", dest="window_hours", type=float,
                        help="earliness window W in hours (default 24)")
    common.add_argument("--seed", type=int, help="random seed (default 0)")
    common.add_argument("--jobs", type=int, help="parallel worker processes (default 1)")
    common.add_argument("--epochs", type=int, help="override training epochs")

    p = sub.add_parser("validate", help="check a dataset directory")
    p.add_argument("--data", required=True)
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("train", parents=[common], help="train one model bundle per event")
    p.add_argument("--data", required=True)
    p.add_argument("--manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--models", help="bundle directory (default <out>/models)")
    p.add_argument("--force", action="store_true", help="retrain even when cached")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("detect", parents=[common], help="score test windows and run the counter")
    p.add_argument("--data", required=True)
    p.add_argument("--manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--models", help="bundle directory (default <out>/models)")
    p.add_argument("--traces", help="trace directory (default <out>/traces)")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("tune", parents=[common], help="grid-search C_thr by stratified CV")
    p.add_argument("--data")
    p.add_argument("--manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--traces", help="trace directory (default <out>/traces)")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("evaluate", parents=[common], help="aggregate eventwise metrics")
    p.add_argument("--data")
    p.add_argument("--manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--traces", help="trace directory (default <out>/traces)")
    p.add_argument("--detections", help="detections CSV (default <out>/detections.csv)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("attribute", parents=[common], help="rank root-cause features for one event")
    p.add_argument("--data", required=True)
    p.add_argument("--manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--models", help="bundle directory (default <out>/models)")
    p.add_argument("--traces", help="trace directory (default <out>/traces)")
    p.add_argument("--detections", help="detections CSV (default <out>/detections.csv)")
    p.add_argument("--event", required=True)
    p.add_argument("--start", help="window start (ISO time; default detection time)")
    p.add_argument("--end", help="window end (ISO time; default test window end)")
    p.add_argument("--alpha", type=float, default=0.8, help="sparsity weight in [0, 1]")
    p.add_argument("--top-k", dest="top_k", type=int, default=3)
    p.add_argument("--no-plots", dest="no_plots", action="store_true")
    p.set_defaults(func=cmd_attribute)

    p = sub.add_parser("synth", help="generate a synthetic benchmark dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="JSON synth config (signals, faults, spans)")
    p.add_argument("--seed", type=int)
    p.add_argument("--days", type=int, default=100)
    p.add_argument("--normal-events", dest="normal_events", type=int, default=5)
    p.add_argument("--clean", action="store_true", help="no fault injections")
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return int(args.func(args))
    except HeatSentryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
