"""Gated recurrent cell plus the linear readout of joint-angle values.

Gate convention, fixed once for the whole package: ``z`` keeps the previous
state and the reset gate scales the previous state before it enters the
candidate,

    z = sigmoid(x Wz + h Uz + bz)
    r = sigmoid(x Wr + h Ur + br)
    c = tanh(x Wh + (r * h) Uh + bh)
    h' = z * h + (1 - z) * c

so a saturated ``z`` (large ``bz``) passes the state through unchanged. The
input enters the gate pre-activations directly; there is no separate input
projection layer.
"""

from dataclasses import dataclass, fields
from typing import NamedTuple

import numpy as np

from .errors import InvalidInputError, NumericError
from .numkernel import affine, sigmoid, tanh

PARAM_NAMES = ("W_z", "W_r", "W_h", "U_z", "U_r", "U_h",
               "b_z", "b_r", "b_h", "W_out", "b_out")


@dataclass
class GruParams:
    """All trainable tensors of one cell plus its output decoder."""

    W_z: np.ndarray            # (d_in, hidden)
    W_r: np.ndarray
    W_h: np.ndarray
    U_z: np.ndarray            # (hidden, hidden)
    U_r: np.ndarray
    U_h: np.ndarray
    b_z: np.ndarray            # (hidden,)
    b_r: np.ndarray
    b_h: np.ndarray
    W_out: np.ndarray          # (hidden, n_out)
    b_out: np.ndarray          # (n_out,)

    def tensors(self) -> dict:
        """Named view of the parameter arrays (shared, not copied)."""
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @property
    def d_in(self) -> int:
        return self.W_z.shape[0]

    @property
    def hidden(self) -> int:
        return self.W_z.shape[1]

    @property
    def n_out(self) -> int:
        return self.W_out.shape[1]


def expected_shapes(d_in: int, hidden: int, n_out: int) -> dict:
    shapes = {}
    for name in ("W_z", "W_r", "W_h"):
        shapes[name] = (d_in, hidden)
    for name in ("U_z", "U_r", "U_h"):
        shapes[name] = (hidden, hidden)
    for name in ("b_z", "b_r", "b_h"):
        shapes[name] = (hidden,)
    shapes["W_out"] = (hidden, n_out)
    shapes["b_out"] = (n_out,)
    return shapes


def init_params(rng, d_in: int, hidden: int, n_out: int) -> GruParams:
    """Fan-in scaled uniform weights, zero biases; deterministic in the rng."""
    if d_in < 1 or hidden < 1 or n_out < 1:
        raise InvalidInputError("all dimensions must be positive")

    def u(fan_in, shape):
        s = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-s, s, size=shape)

    return GruParams(
        W_z=u(d_in, (d_in, hidden)),
        W_r=u(d_in, (d_in, hidden)),
        W_h=u(d_in, (d_in, hidden)),
        U_z=u(hidden, (hidden, hidden)),
        U_r=u(hidden, (hidden, hidden)),
        U_h=u(hidden, (hidden, hidden)),
        b_z=np.zeros(hidden),
        b_r=np.zeros(hidden),
        b_h=np.zeros(hidden),
        W_out=u(hidden, (hidden, n_out)),
        b_out=np.zeros(n_out),
    )


def zero_grads(params: GruParams) -> dict:
    return {name: np.zeros_like(arr) for name, arr in params.tensors().items()}


class GruStepCache(NamedTuple):
    """Forward intermediates of one cell step, kept for the backward pass."""
    x: np.ndarray
    h_prev: np.ndarray
    z: np.ndarray
    r: np.ndarray
    cand: np.ndarray


def gru_cell_forward(x, h_prev, params: GruParams):
    """One cell step on a batch. Returns the new state and its cache."""
    x = np.asarray(x, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.d_in:
        raise InvalidInputError(
            f"cell input has shape {x.shape}, expected (batch, {params.d_in})")
    if h_prev.shape != (x.shape[0], params.hidden):
        raise InvalidInputError(
            f"hidden state has shape {h_prev.shape}, expected "
            f"({x.shape[0]}, {params.hidden})")
    z = sigmoid(affine(x, params.W_z, params.b_z) + h_prev @ params.U_z)
    r = sigmoid(affine(x, params.W_r, params.b_r) + h_prev @ params.U_r)
    cand = tanh(affine(x, params.W_h, params.b_h) + (r * h_prev) @ params.U_h)
    h_new = z * h_prev + (1.0 - z) * cand
    if not np.all(np.isfinite(h_new)):
        raise NumericError("gru_cell produced a non-finite hidden state")
    return h_new, GruStepCache(x, h_prev, z, r, cand)


def gru_cell(x, h_prev, params: GruParams) -> np.ndarray:
    """Forward-only cell step."""
    h_new, _ = gru_cell_forward(x, h_prev, params)
    return h_new


def gru_cell_backward(dh_new, cache: GruStepCache, params: GruParams,
                      grads: dict):
    """Backpropagate one cell step, accumulating into ``grads``.

    Args:
        dh_new: gradient of the loss w.r.t. this step's output state.

    Returns:
        (dx, dh_prev): gradients w.r.t. the step input and previous state.
    """
    x, h_prev, z, r, cand = cache
    dz = dh_new * (h_prev - cand)
    dcand = dh_new * (1.0 - z)
    dh_prev = dh_new * z

    da_h = dcand * (1.0 - cand * cand)
    grads["W_h"] += x.T @ da_h
    grads["U_h"] += (r * h_prev).T @ da_h
    grads["b_h"] += da_h.sum(axis=0)
    dx = da_h @ params.W_h.T
    d_rh = da_h @ params.U_h.T
    dr = d_rh * h_prev
    dh_prev += d_rh * r

    da_z = dz * z * (1.0 - z)
    grads["W_z"] += x.T @ da_z
    grads["U_z"] += h_prev.T @ da_z
    grads["b_z"] += da_z.sum(axis=0)
    dx += da_z @ params.W_z.T
    dh_prev += da_z @ params.U_z.T

    da_r = dr * r * (1.0 - r)
    grads["W_r"] += x.T @ da_r
    grads["U_r"] += h_prev.T @ da_r
    grads["b_r"] += da_r.sum(axis=0)
    dx += da_r @ params.W_r.T
    dh_prev += da_r @ params.U_r.T
    return dx, dh_prev


def output_decoder(h, params: GruParams) -> np.ndarray:
    """Linear projection of the hidden state to joint-angle values."""
    return affine(h, params.W_out, params.b_out)


def output_decoder_backward(dy, h, params: GruParams, grads: dict) -> np.ndarray:
    """Backpropagate the output projection; returns gradient w.r.t. ``h``."""
    grads["W_out"] += h.T @ dy
    grads["b_out"] += dy.sum(axis=0)
    return dy @ params.W_out.T
