"""Numeric kernels shared by the numpy and numba backends.

Everything in this module must stay inside the numba nopython subset, because
the backend module rebinds each function with a jitted version when numba is
enabled. Constraints that shape the code:

* reductions use the method form (``a.sum(axis=0)``); the ``axis=`` keyword on
  ``np.sum``/``np.mean`` is not supported by numba
* no python lists of arrays; per-layer activations live in one flat buffer
* matmul operands must be contiguous; column slices are copied before ``@``

The autoencoder is a stack of dense layers described by four arrays: ``in_w``
and ``out_w`` (layer input/output widths), ``act`` (1 = tanh, 0 = linear) and
``dec_idx``, the index of the first decoder layer, whose input is the latent
vector with the conditioning columns appended again. Parameters are one flat
float64 vector, per layer the row-major weight matrix followed by the bias.
"""

from __future__ import annotations

import numpy as np

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


def layer_offsets(in_w, out_w):
    """Start index of each layer's (weights, bias) block in the flat vector."""
    n_layers = in_w.shape[0]
    offs = np.zeros(n_layers + 1, dtype=np.int64)
    for l in range(n_layers):
        offs[l + 1] = offs[l] + in_w[l] * out_w[l] + out_w[l]
    return offs


def input_offsets(in_w):
    """Cumulative widths of the per-layer input matrices in the cache buffer."""
    n_layers = in_w.shape[0]
    cum = np.zeros(n_layers + 1, dtype=np.int64)
    for l in range(n_layers):
        cum[l + 1] = cum[l] + in_w[l]
    return cum


def ae_forward_cached(params, x, cond, in_w, out_w, act, dec_idx):
    """Forward pass; returns (output, flat buffer of all layer inputs)."""
    n_layers = in_w.shape[0]
    n = x.shape[0]
    d_cond = cond.shape[1]
    cum = input_offsets(in_w)
    offs = layer_offsets(in_w, out_w)
    zbuf = np.empty(n * cum[n_layers], dtype=np.float64)

    z = zbuf[: n * in_w[0]].reshape(n, in_w[0])
    z[:, : x.shape[1]] = x
    if d_cond > 0:
        z[:, x.shape[1] :] = cond

    y = np.empty((n, out_w[n_layers - 1]), dtype=np.float64)
    for l in range(n_layers):
        w_end = offs[l] + in_w[l] * out_w[l]
        w = params[offs[l] : w_end].reshape(in_w[l], out_w[l])
        b = params[w_end : w_end + out_w[l]]
        h = z @ w + b
        if act[l] == 1:
            h = np.tanh(h)
        if l + 1 < n_layers:
            z = zbuf[n * cum[l + 1] : n * cum[l + 2]].reshape(n, in_w[l + 1])
            z[:, : out_w[l]] = h
            if l + 1 == dec_idx and d_cond > 0:
                z[:, out_w[l] :] = cond
        else:
            y[:, :] = h
    return y, zbuf


def ae_reconstruct(params, x, cond, in_w, out_w, act, dec_idx):
    y, _ = ae_forward_cached(params, x, cond, in_w, out_w, act, dec_idx)
    return y


def ae_loss(params, x_in, cond, target, in_w, out_w, act, dec_idx):
    y = ae_reconstruct(params, x_in, cond, in_w, out_w, act, dec_idx)
    diff = y - target
    return (diff * diff).mean()


def ae_loss_grad(params, x_in, cond, target, in_w, out_w, act, dec_idx):
    """Mean squared error over output cells and its gradient w.r.t. params."""
    n_layers = in_w.shape[0]
    n = x_in.shape[0]
    cum = input_offsets(in_w)
    offs = layer_offsets(in_w, out_w)
    y, zbuf = ae_forward_cached(params, x_in, cond, in_w, out_w, act, dec_idx)

    diff = y - target
    loss = (diff * diff).mean()
    grad = np.zeros_like(params)
    dy = diff * (2.0 / (n * out_w[n_layers - 1]))

    for l in range(n_layers - 1, -1, -1):
        if act[l] == 1:
            # post-activation of layer l = leading columns of the next input
            a = zbuf[n * cum[l + 1] : n * cum[l + 2]].reshape(n, in_w[l + 1])[:, : out_w[l]]
            dpre = dy * (1.0 - a * a)
        else:
            dpre = dy
        z = zbuf[n * cum[l] : n * cum[l + 1]].reshape(n, in_w[l])
        w_end = offs[l] + in_w[l] * out_w[l]
        w = params[offs[l] : w_end].reshape(in_w[l], out_w[l])
        grad[offs[l] : w_end].reshape(in_w[l], out_w[l])[:, :] = z.T @ dpre
        grad[w_end : w_end + out_w[l]][:] = dpre.sum(axis=0)
        if l > 0:
            dz = dpre @ w.T
            if l == dec_idx:
                dy = dz[:, : out_w[l - 1]].copy()
            else:
                dy = dz
    return loss, grad


def ae_input_grad(params, x, cond, vec, in_w, out_w, act, dec_idx):
    """Backpropagate per-row vectors through the network to the input columns.

    Returns J^T vec per row, where J is the Jacobian of the output w.r.t. the
    measurement input x (conditioning columns carry no gradient).
    """
    n_layers = in_w.shape[0]
    n = x.shape[0]
    cum = input_offsets(in_w)
    offs = layer_offsets(in_w, out_w)
    _, zbuf = ae_forward_cached(params, x, cond, in_w, out_w, act, dec_idx)

    dy = vec.copy()
    for l in range(n_layers - 1, -1, -1):
        if act[l] == 1:
            a = zbuf[n * cum[l + 1] : n * cum[l + 2]].reshape(n, in_w[l + 1])[:, : out_w[l]]
            dpre = dy * (1.0 - a * a)
        else:
            dpre = dy
        w_end = offs[l] + in_w[l] * out_w[l]
        w = params[offs[l] : w_end].reshape(in_w[l], out_w[l])
        dz = dpre @ w.T
        if l == dec_idx:
            dy = dz[:, : out_w[l - 1]].copy()
        else:
            dy = dz
    return dy[:, : x.shape[1]].copy()


def adam_step(params, grad, m, v, t, lr):
    """One bias-corrected adaptive-moment update, in place; t is 1-based."""
    c1 = 1.0 - ADAM_BETA1 ** t
    c2 = 1.0 - ADAM_BETA2 ** t
    m[:] = ADAM_BETA1 * m + (1.0 - ADAM_BETA1) * grad
    v[:] = ADAM_BETA2 * v + (1.0 - ADAM_BETA2) * grad * grad
    params[:] = params - lr * (m / c1) / (np.sqrt(v / c2) + ADAM_EPS)


def train_epoch(params, m, v, step, x, cond, noise, perm, batch_size, lr, in_w, out_w, act, dec_idx):
    """One denoising pass over the permuted rows; returns (mean loss, step).

    Inputs are x + noise, targets are the clean x. The permutation and the
    noise matrix are generated by the caller so both backends consume the
    identical random stream.
    """
    n = x.shape[0]
    total = 0.0
    t = step
    s = 0
    while s < n:
        e = min(s + batch_size, n)
        idx = perm[s:e]
        xb = x[idx]
        cb = cond[idx]
        nb = noise[idx]
        loss, grad = ae_loss_grad(params, xb + nb, cb, xb, in_w, out_w, act, dec_idx)
        t += 1
        adam_step(params, grad, m, v, t, lr)
        total += loss * (e - s)
        s = e
    return total / n, t


def arcana_loss_rows(params, x, bias, cond, in_w, out_w, act, dec_idx, alpha):
    """Per-row value of (1-a)*0.5*||r||^2 + a*||bias||_1 at x_corr = x + bias."""
    xc = x + bias
    y = ae_reconstruct(params, xc, cond, in_w, out_w, act, dec_idx)
    r = xc - y
    sq = (r * r).sum(axis=1)
    l1 = np.abs(bias).sum(axis=1)
    return (1.0 - alpha) * 0.5 * sq + alpha * l1


def arcana_grad_rows(params, x, bias, cond, in_w, out_w, act, dec_idx, alpha):
    """Per-row loss and its gradient w.r.t. the bias vector."""
    xc = x + bias
    y, _ = ae_forward_cached(params, xc, cond, in_w, out_w, act, dec_idx)
    r = xc - y
    jtr = ae_input_grad(params, xc, cond, r, in_w, out_w, act, dec_idx)
    grad = (1.0 - alpha) * (r - jtr) + alpha * np.sign(bias)
    loss = (1.0 - alpha) * 0.5 * (r * r).sum(axis=1) + alpha * np.abs(bias).sum(axis=1)
    return loss, grad


def arcana_descent(params, x, cond, in_w, out_w, act, dec_idx, alpha, step0, max_iters, tol):
    """Row-independent sparse-bias descent with per-row backtracking.

    Each row's step halves whenever its candidate would not decrease the loss,
    so accepted losses are strictly decreasing. A row freezes when its relative
    loss improvement drops below tol or its step underflows. Returns
    (bias, per-row loss, iterations used).
    """
    n = x.shape[0]
    y0 = ae_reconstruct(params, x, cond, in_w, out_w, act, dec_idx)
    bias = y0 - x
    loss = arcana_loss_rows(params, x, bias, cond, in_w, out_w, act, dec_idx, alpha)
    step = np.full(n, step0)
    active = np.ones(n, dtype=np.bool_)
    used = 0
    for _ in range(max_iters):
        if not active.any():
            break
        used += 1
        _, grad = arcana_grad_rows(params, x, bias, cond, in_w, out_w, act, dec_idx, alpha)
        cand = bias - step.reshape(n, 1) * grad
        closs = arcana_loss_rows(params, x, cand, cond, in_w, out_w, act, dec_idx, alpha)
        for i in range(n):
            if not active[i]:
                continue
            if closs[i] < loss[i]:
                rel = (loss[i] - closs[i]) / max(abs(loss[i]), 1e-300)
                bias[i, :] = cand[i, :]
                loss[i] = closs[i]
                if rel < tol:
                    active[i] = False
            else:
                step[i] *= 0.5
                if step[i] < 1e-12:
                    active[i] = False
    return bias, loss, used


def run_counter(flags, frozen):
    """Criticality counter: +1 on flag, -1 floor 0 otherwise, held when frozen."""
    n = flags.shape[0]
    out = np.zeros(n, dtype=np.int64)
    c = 0
    for i in range(n):
        if not frozen[i]:
            if flags[i]:
                c += 1
            elif c > 0:
                c -= 1
        out[i] = c
    return out
