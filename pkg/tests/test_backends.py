"""Numba-jitted kernels must agree with the pure-numpy source bit for bit."""

import importlib.util
import os
import pathlib
import subprocess
import sys

import numpy as np
import pytest

from heatsentry import backend
from heatsentry.autoencoder import AEConfig, empty_cond, init_model

KERNELS_PATH = pathlib.Path(backend.__file__).with_name("_kernels.py")


def _pure_kernels():
    # load a second, never-jitted copy of the kernel module
    spec = importlib.util.spec_from_file_location("heatsentry_kernels_pure", KERNELS_PATH)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def _model(seed=0):
    config = AEConfig(hidden_units=(8, 5), latent_fraction=0.5, seed=seed,
                      conditioning="hour_dow")
    return init_model(n_features=7, config=config)


def test_forward_and_reconstruct_match_pure_numpy():
    pure = _pure_kernels()
    model = _model(seed=1)
    in_w, out_w, act, dec_idx = model.plan()
    rng = np.random.default_rng(3)
    x = rng.normal(size=(17, 7))
    cond = rng.normal(size=(17, 4))
    got = backend.ae_reconstruct(model.params, x, cond, in_w, out_w, act, dec_idx)
    want = pure.ae_reconstruct(model.params, x, cond, in_w, out_w, act, dec_idx)
    np.testing.assert_allclose(got, want, rtol=1e-12, atol=0.0)
    zg, _ = backend.ae_forward_cached(model.params, x, cond, in_w, out_w, act, dec_idx)
    zp, _ = pure.ae_forward_cached(model.params, x, cond, in_w, out_w, act, dec_idx)
    np.testing.assert_allclose(zg, zp, rtol=1e-12, atol=0.0)


def test_loss_and_gradient_match_pure_numpy():
    pure = _pure_kernels()
    model = _model(seed=2)
    in_w, out_w, act, dec_idx = model.plan()
    rng = np.random.default_rng(5)
    x = rng.normal(size=(11, 7))
    cond = rng.normal(size=(11, 4))
    loss_a, grad_a = backend.ae_loss_grad(model.params, x, cond, x, in_w, out_w, act, dec_idx)
    loss_b, grad_b = pure.ae_loss_grad(model.params, x, cond, x, in_w, out_w, act, dec_idx)
    assert loss_a == pytest.approx(loss_b, rel=1e-12)
    np.testing.assert_allclose(grad_a, grad_b, rtol=1e-12, atol=1e-15)


def test_train_epoch_matches_pure_numpy():
    pure = _pure_kernels()
    model = _model(seed=3)
    in_w, out_w, act, dec_idx = model.plan()
    rng = np.random.default_rng(7)
    x = rng.normal(size=(32, 7))
    cond = rng.normal(size=(32, 4))
    noise = rng.normal(size=(32, 7)) * 0.05
    perm = rng.permutation(32)

    def run(mod):
        params = model.params.copy()
        m = np.zeros_like(params)
        v = np.zeros_like(params)
        return mod.train_epoch(params, m, v, 0, x, cond, noise, perm, 8, 1e-3,
                               in_w, out_w, act, dec_idx), params

    (_, pa) = run(backend)
    (_, pb) = run(pure)
    np.testing.assert_allclose(pa, pb, rtol=1e-12, atol=1e-15)


def test_arcana_descent_matches_pure_numpy():
    pure = _pure_kernels()
    model = _model(seed=4)
    in_w, out_w, act, dec_idx = model.plan()
    rng = np.random.default_rng(9)
    x = rng.normal(size=(6, 7))
    cond = rng.normal(size=(6, 4))
    args = (model.params, x, cond, in_w, out_w, act, dec_idx, 0.8, 0.01, 120, 1e-6)
    bias_a, loss_a, iters_a = backend.arcana_descent(*args)
    bias_b, loss_b, iters_b = pure.arcana_descent(*args)
    np.testing.assert_allclose(bias_a, bias_b, rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(loss_a, loss_b, rtol=1e-12, atol=0.0)
    assert np.array_equal(iters_a, iters_b)


def test_run_counter_matches_pure_numpy():
    pure = _pure_kernels()
    rng = np.random.default_rng(11)
    flags = (rng.random(500) < 0.2).astype(np.int64)
    frozen = (rng.random(500) < 0.1).astype(np.int64)
    got = backend.run_counter(flags, frozen)
    want = pure.run_counter(flags, frozen)
    assert np.array_equal(got, want)


def _run_probe(env_value):
    code = (
        "import warnings\n"
        "with warnings.catch_warnings(record=True) as caught:\n"
        "    warnings.simplefilter('always')\n"
        "    from heatsentry import backend\n"
        "print(backend.BACKEND)\n"
        "print(len([w for w in caught if issubclass(w.category, RuntimeWarning)]))\n"
    )
    env = dict(os.environ)
    if env_value is None:
        env.pop("HEATSENTRY_BACKEND", None)
    else:
        env["HEATSENTRY_BACKEND"] = env_value
    out = subprocess.run([sys.executable, "-c", code], capture_output=True,
                         text=True, env=env, check=True)
    lines = out.stdout.strip().splitlines()
    return lines[0], int(lines[1])


def test_env_forces_numpy_backend():
    name, n_warnings = _run_probe("numpy")
    assert name == "numpy"
    assert n_warnings == 0


def test_env_requests_numba_backend():
    pytest.importorskip("numba")
    name, n_warnings = _run_probe("numba")
    assert name == "numba"
    assert n_warnings == 0


def test_env_unknown_value_warns_and_autoselects():
    name, n_warnings = _run_probe("cuda")
    assert name in ("numpy", "numba")
    assert n_warnings == 1


def test_numpy_backend_runs_whole_pipeline_in_subprocess():
    code = (
        "import numpy as np\n"
        "from heatsentry import backend\n"
        "assert backend.BACKEND == 'numpy'\n"
        "from heatsentry.autoencoder import AEConfig, init_model, train, gradient_check\n"
        "rng = np.random.default_rng(0)\n"
        "x = rng.normal(size=(300, 5))\n"
        "config = AEConfig(hidden_units=(6,), latent_fraction=0.5, epochs=3,\n"
        "                  batch_size=64, seed=1)\n"
        "model = init_model(n_features=5, config=config)\n"
        "trained, report = train(model, x)\n"
        "assert np.isfinite(report.final_val_mse)\n"
        "assert gradient_check(model, x[:4]) < 1e-4\n"
        "print('ok')\n"
    )
    env = dict(os.environ, HEATSENTRY_BACKEND="numpy")
    out = subprocess.run([sys.executable, "-c", code], capture_output=True,
                         text=True, env=env, check=True)
    assert out.stdout.strip() == "ok"


def test_empty_cond_shape():
    assert empty_cond(5).shape == (5, 0)
