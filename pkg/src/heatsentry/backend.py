"""Select the numeric backend and export the kernel functions.

Set ``HEATSENTRY_BACKEND=numpy`` or ``=numba`` to force a backend; unset, numba
is used when importable. Jitting rebinds the kernel module's own globals, so
kernels calling other kernels resolve to compiled code rather than bouncing
through the interpreter; compilation stays lazy, which makes the rebinding
order irrelevant.
"""

from __future__ import annotations

import os
import warnings

from . import _kernels

_ENV_VAR = "HEATSENTRY_BACKEND"

_JIT_NAMES = (
    "layer_offsets",
    "input_offsets",
    "ae_forward_cached",
    "ae_reconstruct",
    "ae_loss",
    "ae_loss_grad",
    "ae_input_grad",
    "adam_step",
    "train_epoch",
    "arcana_loss_rows",
    "arcana_grad_rows",
    "arcana_descent",
    "run_counter",
)


def _resolve() -> str:
    choice = os.environ.get(_ENV_VAR, "").strip().lower()
    if choice not in ("", "numpy", "numba"):
        warnings.warn(
            f"{_ENV_VAR}={choice!r} not recognised, auto-selecting", RuntimeWarning
        )
        choice = ""
    if choice == "numpy":
        return "numpy"
    try:
        import numba  # noqa: F401
    except ImportError:
        if choice == "numba":
            warnings.warn(
                f"{_ENV_VAR}=numba but numba is not importable, using numpy",
                RuntimeWarning,
            )
        return "numpy"
    return "numba"


BACKEND = _resolve()

if BACKEND == "numba":
    from numba import njit

    for _name in _JIT_NAMES:
        setattr(_kernels, _name, njit(cache=True)(getattr(_kernels, _name)))

layer_offsets = _kernels.layer_offsets
input_offsets = _kernels.input_offsets
ae_forward_cached = _kernels.ae_forward_cached
ae_reconstruct = _kernels.ae_reconstruct
ae_loss = _kernels.ae_loss
ae_loss_grad = _kernels.ae_loss_grad
ae_input_grad = _kernels.ae_input_grad
adam_step = _kernels.adam_step
train_epoch = _kernels.train_epoch
arcana_loss_rows = _kernels.arcana_loss_rows
arcana_grad_rows = _kernels.arcana_grad_rows
arcana_descent = _kernels.arcana_descent
run_counter = _kernels.run_counter
