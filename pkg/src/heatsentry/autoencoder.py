"""Autoencoder normal-behaviour model: architecture, training, verification.

The network compresses the standardized measurement vector through a symmetric
stack of tanh layers into a linear latent code and reconstructs it with a
linear output layer. Conditioning columns (calendar encodings) are appended to
both the encoder input and the decoder input; they are never compressed or
reconstructed. Backpropagation is hand-rolled in the kernel module and checked
here against central finite differences.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import backend
from .errors import SchemaError, TrainingError, ValidationError
from .preprocess import CONDITIONING_MODES, PreprocessorState, conditioning_dim

VAL_FRACTION = 0.2
INIT_STREAM = 0
TRAIN_STREAM = 1


@dataclass(frozen=True)
class AEConfig:
    hidden_units: tuple[int, ...] = (64, 32)
    latent_fraction: float = 0.65
    learning_rate: float = 4.5e-4
    noise_std: float = 0.05
    batch_size: int = 256
    epochs: int = 200
    early_stop_patience: int = 20
    seed: int = 0
    conditioning: str = "none"

    def __post_init__(self):
        object.__setattr__(self, "hidden_units", tuple(int(h) for h in self.hidden_units))
        if not self.hidden_units or any(h < 1 for h in self.hidden_units):
            raise ValidationError("hidden_units must be one or more positive widths")
        if not 0.0 < self.latent_fraction <= 1.0:
            raise ValidationError("latent_fraction must lie in (0, 1]")
        if self.learning_rate <= 0:
            raise ValidationError("learning_rate must be positive")
        if self.noise_std < 0:
            raise ValidationError("noise_std must be non-negative")
        if self.batch_size < 1 or self.epochs < 1 or self.early_stop_patience < 1:
            raise ValidationError("batch_size, epochs and early_stop_patience must be >= 1")
        if self.conditioning not in CONDITIONING_MODES:
            raise ValidationError(f"unknown conditioning mode {self.conditioning!r}")

    def latent_dim(self, n_features: int) -> int:
        # round half away from zero, so 0.25 * 3 -> 1 on every platform
        return max(1, int(np.floor(self.latent_fraction * n_features + 0.5)))

    def to_dict(self) -> dict:
        return {
            "hidden_units": list(self.hidden_units),
            "latent_fraction": self.latent_fraction,
            "learning_rate": self.learning_rate,
            "noise_std": self.noise_std,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "early_stop_patience": self.early_stop_patience,
            "seed": self.seed,
            "conditioning": self.conditioning,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "AEConfig":
        return cls(**{k: (tuple(v) if k == "hidden_units" else v) for k, v in doc.items()})


def layer_plan(n_features: int, d_cond: int, hidden: tuple[int, ...], latent_dim: int):
    """Dense-layer widths and activation flags for the kernel functions.

    Returns (in_w, out_w, act, dec_idx): the decoder starts at layer dec_idx,
    whose input is the latent vector with the conditioning columns re-appended.
    """
    h = list(hidden)
    in_w = [n_features + d_cond] + h[:-1] + [h[-1], latent_dim + d_cond]
    out_w = h + [latent_dim] + [h[-1]]
    for j in range(1, len(h)):
        in_w.append(h[-j])
        out_w.append(h[-j - 1])
    in_w.append(h[0])
    out_w.append(n_features)
    act = [1] * len(h) + [0] + [1] * len(h) + [0]
    return (
        np.asarray(in_w, dtype=np.int64),
        np.asarray(out_w, dtype=np.int64),
        np.asarray(act, dtype=np.int64),
        len(h) + 1,
    )


@dataclass
class AEModel:
    """Flat parameter vector plus the layer plan that interprets it."""

    params: np.ndarray
    n_features: int
    d_cond: int
    hidden_units: tuple[int, ...]
    latent_dim: int
    conditioning: str
    activation: str = "tanh"
    config: AEConfig | None = None
    preprocessor: PreprocessorState | None = None

    def plan(self):
        return layer_plan(self.n_features, self.d_cond, self.hidden_units, self.latent_dim)

    @property
    def n_params(self) -> int:
        in_w, out_w, _, _ = self.plan()
        return int(backend.layer_offsets(in_w, out_w)[-1])


@dataclass
class TrainReport:
    """Per-epoch losses; epochs are numbered from 1."""

    train_mse: list[float] = field(default_factory=list)
    val_mse: list[float] = field(default_factory=list)
    best_epoch: int = 0
    stopped_epoch: int = 0

    @property
    def final_val_mse(self) -> float:
        return self.val_mse[self.best_epoch - 1]

    def to_dict(self) -> dict:
        return {
            "train_mse": self.train_mse,
            "val_mse": self.val_mse,
            "best_epoch": self.best_epoch,
            "stopped_epoch": self.stopped_epoch,
            "final_val_mse": self.final_val_mse,
        }


def init_model(config: AEConfig, n_features: int) -> AEModel:
    """Seeded scaled-uniform weight init (biases zero); same inputs, same bits."""
    if n_features < 1:
        raise ValidationError("n_features must be >= 1")
    d_cond = conditioning_dim(config.conditioning)
    latent = config.latent_dim(n_features)
    if latent >= n_features:
        warnings.warn(
            f"latent_dim {latent} is not smaller than n_features {n_features}; "
            "the model is not undercomplete",
            RuntimeWarning,
        )
    in_w, out_w, act, dec_idx = layer_plan(n_features, d_cond, config.hidden_units, latent)
    offs = backend.layer_offsets(in_w, out_w)
    params = np.zeros(int(offs[-1]))
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, INIT_STREAM]))
    for l in range(len(in_w)):
        fan_in, fan_out = int(in_w[l]), int(out_w[l])
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        params[offs[l] : offs[l] + fan_in * fan_out] = rng.uniform(
            -limit, limit, fan_in * fan_out
        )
    return AEModel(
        params=params,
        n_features=n_features,
        d_cond=d_cond,
        hidden_units=config.hidden_units,
        latent_dim=latent,
        conditioning=config.conditioning,
        config=config,
    )


def _check_widths(model: AEModel, x: np.ndarray, cond: np.ndarray):
    if x.shape[1] != model.n_features:
        raise SchemaError(f"expected {model.n_features} feature columns, got {x.shape[1]}")
    if cond.shape[1] != model.d_cond:
        raise SchemaError(f"expected {model.d_cond} conditioning columns, got {cond.shape[1]}")
    if cond.shape[0] != x.shape[0]:
        raise SchemaError("x and cond row counts differ")


def _as_matrix(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return x.reshape(1, -1) if x.ndim == 1 else x


def empty_cond(n_rows: int) -> np.ndarray:
    return np.zeros((n_rows, 0))


def reconstruct(model: AEModel, x, cond=None) -> np.ndarray:
    """Deterministic reconstruction; accepts a single row or a matrix."""
    xm = _as_matrix(x)
    cm = empty_cond(xm.shape[0]) if cond is None else _as_matrix(cond)
    _check_widths(model, xm, cm)
    in_w, out_w, act, dec_idx = model.plan()
    y = backend.ae_reconstruct(model.params, xm, cm, in_w, out_w, act, dec_idx)
    return y[0] if np.asarray(x).ndim == 1 else y


def train(model: AEModel, train_matrix: np.ndarray, cond_matrix=None,
          config: AEConfig | None = None) -> tuple[AEModel, TrainReport]:
    """Denoising training with early stopping on a chronological 80/20 split.

    Gaussian noise (noise_std) is added to the measurement inputs of each
    batch; targets stay clean. Returns a new model holding the weights of the
    best-validation epoch; the input model is left untouched.
    """
    cfg = config or model.config
    if cfg is None:
        raise ValidationError("no AEConfig given and model carries none")
    x = np.ascontiguousarray(train_matrix, dtype=np.float64)
    cond = empty_cond(x.shape[0]) if cond_matrix is None else np.ascontiguousarray(
        cond_matrix, dtype=np.float64
    )
    _check_widths(model, x, cond)
    n = x.shape[0]
    if n < cfg.batch_size:
        raise ValidationError(f"{n} rows < batch_size {cfg.batch_size}")
    n_train = int(np.floor(n * (1.0 - VAL_FRACTION)))
    n_val = n - n_train
    if n_train < 1 or n_val < 1:
        raise ValidationError(f"cannot split {n} rows into train and validation")
    x_tr, x_val = x[:n_train], x[n_train:]
    c_tr, c_val = cond[:n_train], cond[n_train:]

    in_w, out_w, act, dec_idx = model.plan()
    params = model.params.copy()
    m = np.zeros_like(params)
    v = np.zeros_like(params)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, TRAIN_STREAM]))

    report = TrainReport()
    best_val = np.inf
    best_params = params.copy()
    since_best = 0
    step = 0
    for epoch in range(1, cfg.epochs + 1):
        perm = rng.permutation(n_train)
        noise = rng.normal(0.0, cfg.noise_std, (n_train, model.n_features))
        train_mse, step = backend.train_epoch(
            params, m, v, step, x_tr, c_tr, noise, perm,
            cfg.batch_size, cfg.learning_rate, in_w, out_w, act, dec_idx,
        )
        val_mse = backend.ae_loss(params, x_val, c_val, x_val, in_w, out_w, act, dec_idx)
        if not (np.isfinite(train_mse) and np.isfinite(val_mse)):
            raise TrainingError(f"training diverged at epoch {epoch}")
        report.train_mse.append(float(train_mse))
        report.val_mse.append(float(val_mse))
        report.stopped_epoch = epoch
        if val_mse < best_val:
            best_val = val_mse
            best_params = params.copy()
            report.best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.early_stop_patience:
                break
    trained = replace(model, params=best_params, config=cfg)
    return trained, report


def gradient_check(model: AEModel, x, cond=None, h: float = 1e-5) -> float:
    """Max relative error of backprop vs central differences over all params.

    The denominator is floored at 1e-4 so components whose true gradient is
    ~0 do not blow up the ratio; a real backprop defect still shows because it
    perturbs components of ordinary size.
    """
    xm = _as_matrix(x)
    cm = empty_cond(xm.shape[0]) if cond is None else _as_matrix(cond)
    _check_widths(model, xm, cm)
    in_w, out_w, act, dec_idx = model.plan()
    _, analytic = backend.ae_loss_grad(model.params, xm, cm, xm, in_w, out_w, act, dec_idx)
    worst = 0.0
    p = model.params
    for i in range(p.shape[0]):
        saved = p[i]
        p[i] = saved + h
        lo_hi = backend.ae_loss(p, xm, cm, xm, in_w, out_w, act, dec_idx)
        p[i] = saved - h
        lo_lo = backend.ae_loss(p, xm, cm, xm, in_w, out_w, act, dec_idx)
        p[i] = saved
        numeric = (lo_hi - lo_lo) / (2.0 * h)
        rel = abs(numeric - analytic[i]) / max(abs(numeric) + abs(analytic[i]), 1e-4)
        worst = max(worst, rel)
    return worst
