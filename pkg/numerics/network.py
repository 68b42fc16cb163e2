"""
Flat parameter-vector layout and forward evaluation of fully connected
feedforward networks.

Layout: for layer k the weights come first, row by row, followed by the
biases. The public accessors use 1-based (k, i, j) indices and 1-based
flat positions; numpy storage is 0-based, so flat position p lives at
``theta[p - 1]``. Nothing else in this package shifts indices.
"""

from typing import Callable, Union

import numpy as np

from models import Architecture, DimensionError, ForwardTrace, LayoutIndexError
from numerics.activation import approximant_value


def check_theta(theta, arch: Architecture) -> np.ndarray:
    """Return theta as a 1-D float64 array of length param_count."""
    theta = np.asarray(theta, dtype=np.float64)
    if theta.ndim != 1 or len(theta) != arch.param_count:
        raise DimensionError(
            f"Parameter vector has shape {theta.shape}; architecture {arch} "
            f"needs {arch.param_count} entries"
        )
    return theta


def _check_layer(arch: Architecture, k: int, i: int):
    if not 1 <= k <= arch.depth:
        raise LayoutIndexError(f"Layer {k} outside 1..{arch.depth}")
    if not 1 <= i <= arch.widths[k]:
        raise LayoutIndexError(f"Row {i} outside 1..{arch.widths[k]} in layer {k}")


def weight_index(arch: Architecture, k: int, i: int, j: int) -> int:
    """1-based flat position (i-1) l_{k-1} + j + d_{k-1} of w^k_{i,j}."""
    _check_layer(arch, k, i)
    if not 1 <= j <= arch.widths[k - 1]:
        raise LayoutIndexError(f"Column {j} outside 1..{arch.widths[k - 1]} in layer {k}")
    return (i - 1) * arch.widths[k - 1] + j + arch.offsets[k - 1]


def bias_index(arch: Architecture, k: int, i: int) -> int:
    """1-based flat position l_k l_{k-1} + i + d_{k-1} of b^k_i."""
    _check_layer(arch, k, i)
    return arch.widths[k] * arch.widths[k - 1] + i + arch.offsets[k - 1]


def weight(theta, arch: Architecture, k: int, i: int, j: int) -> float:
    theta = check_theta(theta, arch)
    return float(theta[weight_index(arch, k, i, j) - 1])


def bias(theta, arch: Architecture, k: int, i: int) -> float:
    theta = check_theta(theta, arch)
    return float(theta[bias_index(arch, k, i) - 1])


def layer_parameters(theta: np.ndarray, arch: Architecture, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Views (W^k, b^k) into theta, W^k of shape (l_k, l_{k-1})."""
    rows, cols = arch.widths[k], arch.widths[k - 1]
    start = arch.offsets[k - 1]
    W = theta[start:start + rows * cols].reshape(rows, cols)
    b = theta[start + rows * cols:arch.offsets[k]]
    return W, b


def unflatten(theta, arch: Architecture) -> list[tuple[np.ndarray, np.ndarray]]:
    theta = check_theta(theta, arch)
    return [layer_parameters(theta, arch, k) for k in range(1, arch.depth + 1)]


def flatten(layers, arch: Architecture) -> np.ndarray:
    """Inverse of unflatten."""
    parts = []
    for k, (W, b) in enumerate(layers, start=1):
        W = np.asarray(W, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        if W.shape != (arch.widths[k], arch.widths[k - 1]) or b.shape != (arch.widths[k],):
            raise DimensionError(f"Layer {k} has shapes {W.shape}, {b.shape}")
        parts.extend([W.reshape(-1), b])
    return check_theta(np.concatenate(parts), arch)


def affine(W: np.ndarray, b: np.ndarray, a: np.ndarray) -> np.ndarray:
    """b + W a with the bias first and columns accumulated in ascending order.

    ``a`` may be a vector or a batch of shape (N, l_{k-1}); the per-entry
    operation sequence is the same in both cases.
    """
    if a.ndim == 1:
        out = b.copy()
        for j in range(W.shape[1]):
            out += W[:, j] * a[j]
        return out
    out = np.repeat(b[None, :], a.shape[0], axis=0)
    for j in range(W.shape[1]):
        out += a[:, j:j + 1] * W[:, j]
    return out


def _value_fn(act) -> Callable:
    return act.value if hasattr(act, 'value') else act


def forward(theta, arch: Architecture, x, act: Union[Callable, object]) -> ForwardTrace:
    """Evaluate the realization, keeping every layer's pre-activations.

    ``act`` is a PiecewiseActivation or any vectorized scalar function. It is
    applied on hidden layers only.
    """
    theta = check_theta(theta, arch)
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if len(x) != arch.input_dim:
        raise DimensionError(f"Input has {len(x)} entries, architecture {arch} expects {arch.input_dim}")
    value = _value_fn(act)

    preacts, activations = [], []
    a = x
    for k in range(1, arch.depth + 1):
        W, b = layer_parameters(theta, arch, k)
        pre = affine(W, b, a)
        preacts.append(pre)
        if k < arch.depth:
            a = np.asarray(value(pre), dtype=np.float64)
            activations.append(a)
    return ForwardTrace(input=x, preacts=tuple(preacts), activations=tuple(activations))


def forward_approx(theta, arch: Architecture, x, fam, n: int) -> ForwardTrace:
    """Forward pass with G_n in place of the activation."""
    return forward(theta, arch, x, lambda u: approximant_value(fam, n, u))


def forward_batch(theta, arch: Architecture, X, act) -> list[np.ndarray]:
    """Pre-activations of every layer for a batch X of shape (N, l_0).

    Entry-for-entry identical to running ``forward`` on each row.
    """
    theta = check_theta(theta, arch)
    X = np.asarray(X, dtype=np.float64).reshape(-1, arch.input_dim)
    value = _value_fn(act)
    preacts = []
    a = X
    for k in range(1, arch.depth + 1):
        W, b = layer_parameters(theta, arch, k)
        pre = affine(W, b, a)
        preacts.append(pre)
        if k < arch.depth:
            a = np.asarray(value(pre), dtype=np.float64)
    return preacts


def verify_trace(trace: ForwardTrace, theta, arch: Architecture) -> bool:
    """Recompute each layer from the stored inputs; True when bit-identical."""
    theta = check_theta(theta, arch)
    for k in range(1, arch.depth + 1):
        W, b = layer_parameters(theta, arch, k)
        if not np.array_equal(affine(W, b, trace.layer_input(k)), trace.preacts[k - 1]):
            return False
    return True
