"""Model bundle persistence: one directory per trained event model.

Layout:
    model.json          architecture, config, config hash, weight layout note
    weights.bin         flat little-endian float64 parameter vector
    preprocessor.json   feature list, means, stds, conditioning tag
    scoring.json        score type, threshold, error statistics
    train_report.json   per-epoch losses and the selected epoch
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass

import numpy as np

from .autoencoder import AEConfig, AEModel, TrainReport
from .errors import SchemaError
from .preprocess import PreprocessorState
from .scoring import ScoreModel

FORMAT_VERSION = 1
WEIGHTS_NOTE = (
    "little-endian float64; per dense layer the row-major (in x out) weight "
    "matrix then the bias vector; encoder layers first, then decoder layers"
)


def config_hash(payload: dict) -> str:
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


@dataclass
class Bundle:
    model: AEModel
    score_model: ScoreModel
    train_report: dict
    config_hash: str | None = None


def _dump(path: str, doc: dict) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def save_bundle(directory: str, model: AEModel, score_model: ScoreModel,
                train_report: TrainReport | dict, cfg_hash: str | None = None) -> None:
    if model.preprocessor is None:
        raise SchemaError("model carries no preprocessor; bundle would not be loadable")
    os.makedirs(directory, exist_ok=True)
    _dump(
        os.path.join(directory, "model.json"),
        {
            "format_version": FORMAT_VERSION,
            "n_features": model.n_features,
            "d_cond": model.d_cond,
            "hidden_units": list(model.hidden_units),
            "latent_dim": model.latent_dim,
            "conditioning": model.conditioning,
            "activation": model.activation,
            "config": model.config.to_dict() if model.config else None,
            "config_hash": cfg_hash,
            "weights_layout": WEIGHTS_NOTE,
            "n_params": model.n_params,
        },
    )
    with open(os.path.join(directory, "weights.bin"), "wb") as fh:
        fh.write(np.ascontiguousarray(model.params, dtype="<f8").tobytes())
    _dump(os.path.join(directory, "preprocessor.json"), model.preprocessor.to_dict())
    _dump(os.path.join(directory, "scoring.json"), score_model.to_dict())
    report = train_report.to_dict() if isinstance(train_report, TrainReport) else train_report
    _dump(os.path.join(directory, "train_report.json"), report)


def _load_json(directory: str, name: str) -> dict:
    path = os.path.join(directory, name)
    if not os.path.exists(path):
        raise SchemaError(f"bundle file missing: {path}")
    with open(path) as fh:
        return json.load(fh)


def load_bundle(directory: str) -> Bundle:
    doc = _load_json(directory, "model.json")
    if doc.get("format_version") != FORMAT_VERSION:
        raise SchemaError(f"unsupported bundle format {doc.get('format_version')!r}")
    pre = PreprocessorState.from_dict(_load_json(directory, "preprocessor.json"))
    score = ScoreModel.from_dict(_load_json(directory, "scoring.json"))
    report = _load_json(directory, "train_report.json")
    with open(os.path.join(directory, "weights.bin"), "rb") as fh:
        params = np.frombuffer(fh.read(), dtype="<f8").astype(np.float64)
    model = AEModel(
        params=params,
        n_features=doc["n_features"],
        d_cond=doc["d_cond"],
        hidden_units=tuple(doc["hidden_units"]),
        latent_dim=doc["latent_dim"],
        conditioning=doc["conditioning"],
        activation=doc.get("activation", "tanh"),
        config=AEConfig.from_dict(doc["config"]) if doc.get("config") else None,
        preprocessor=pre,
    )
    if params.shape[0] != doc["n_params"] or params.shape[0] != model.n_params:
        raise SchemaError(
            f"weights.bin holds {params.shape[0]} parameters, "
            f"model.json expects {doc['n_params']}"
        )
    return Bundle(
        model=model,
        score_model=score,
        train_report=report,
        config_hash=doc.get("config_hash"),
    )
