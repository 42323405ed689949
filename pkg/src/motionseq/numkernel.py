"""Dense float64 primitives shared by the model code.

Affine maps and gate nonlinearities (with overflow-safe sigmoid), global-norm
gradient clipping, plain SGD updates, and a named-tensor checkpoint
container. Parameters and gradients travel as ``dict[str, np.ndarray]``; a
gradient set always mirrors the shapes of the parameter set it belongs to.
"""

import io
import json

import numpy as np

from .errors import ConfigError, InvalidInputError

CHECKPOINT_FORMAT_VERSION = 1


def affine(x, w, b) -> np.ndarray:
    """``x @ w + b`` with the bias broadcast over rows."""
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[0]:
        raise InvalidInputError(
            f"affine shape mismatch: x {x.shape} vs w {w.shape}")
    if b.shape != (w.shape[1],):
        raise InvalidInputError(
            f"affine bias shape {b.shape} does not match output width {w.shape[1]}")
    return x @ w + b


def sigmoid(x) -> np.ndarray:
    """Logistic function, computed without overflow for any float64 input."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def tanh(x) -> np.ndarray:
    return np.tanh(np.asarray(x, dtype=np.float64))


def global_norm(grads: dict) -> float:
    """L2 norm over every entry of every tensor in the set."""
    total = 0.0
    for g in grads.values():
        total += float(np.sum(np.square(g)))
    return float(np.sqrt(total))


def clip_gradients(grads: dict, max_norm: float) -> dict:
    """Scale the whole gradient set so its global L2 norm is at most ``max_norm``.

    Gradients under the bound are returned unchanged (same arrays), which
    also makes clipping bit-exactly idempotent: rounding can leave the
    rescaled norm an ulp above the bound, so scaling repeats until the
    recomputed norm is within it.
    """
    if not max_norm > 0.0:
        raise InvalidInputError("max_norm must be positive")
    norm = global_norm(grads)
    if norm <= max_norm:
        return grads
    clipped = {name: np.asarray(g, dtype=np.float64).copy()
               for name, g in grads.items()}
    while norm > max_norm:
        scale = max_norm / norm
        for g in clipped.values():
            g *= scale
        norm = global_norm(clipped)
    return clipped


def sgd_step(params: dict, grads: dict, lr: float) -> dict:
    """In-place gradient-descent update ``p -= lr * g`` for every tensor."""
    if not lr > 0.0:
        raise InvalidInputError("learning rate must be positive")
    if set(params) != set(grads):
        raise InvalidInputError("parameter and gradient sets name different tensors")
    for name, p in params.items():
        g = grads[name]
        if p.shape != g.shape:
            raise InvalidInputError(
                f"gradient shape {g.shape} does not match parameter "
                f"{name!r} of shape {p.shape}")
        p -= lr * g
    return params


def save_tensors(path, tensors: dict, meta: dict | None = None):
    """Write named float64 tensors plus string metadata to one container file.

    The container is a zip of arrays (the ``.npz`` layout) with a format
    version tag; each tensor keeps its name, shape and row-major data.
    """
    payload = {"__format_version__": np.int64(CHECKPOINT_FORMAT_VERSION)}
    for name, arr in tensors.items():
        payload[f"tensor:{name}"] = np.asarray(arr, dtype=np.float64)
    for key, value in (meta or {}).items():
        payload[f"meta:{key}"] = np.str_(value)
    with open(path, "wb") as f:
        np.savez(f, **payload)


def validate_shapes(tensors: dict, expected_shapes: dict, context=""):
    """Check a tensor set against name-to-shape expectations.

    Raises:
        ConfigError: on a missing tensor or a shape mismatch.
    """
    for name, shape in expected_shapes.items():
        if name not in tensors:
            raise ConfigError(f"{context}: tensor {name!r} missing from container")
        if tensors[name].shape != tuple(shape):
            raise ConfigError(
                f"{context}: tensor {name!r} has shape {tensors[name].shape}, "
                f"expected {tuple(shape)}")


def load_tensors(path, expected_shapes: dict | None = None):
    """Read a tensor container back as ``(tensors, meta)``.

    Args:
        expected_shapes: optional name-to-shape mapping; any missing tensor
            or shape mismatch raises ConfigError.
    """
    with open(path, "rb") as f:
        data = np.load(io.BytesIO(f.read()), allow_pickle=False)
    if "__format_version__" not in data:
        raise ConfigError(f"{path}: not a tensor container")
    version = int(data["__format_version__"])
    if version != CHECKPOINT_FORMAT_VERSION:
        raise ConfigError(
            f"{path}: container format version {version} is not supported")
    tensors, meta = {}, {}
    for key in data.files:
        if key.startswith("tensor:"):
            tensors[key[len("tensor:"):]] = np.asarray(data[key], dtype=np.float64)
        elif key.startswith("meta:"):
            meta[key[len("meta:"):]] = str(data[key])
    if expected_shapes is not None:
        validate_shapes(tensors, expected_shapes, context=str(path))
    return tensors, meta


def meta_json(obj) -> str:
    """Canonical JSON used for metadata entries."""
    return json.dumps(obj, sort_keys=True)
