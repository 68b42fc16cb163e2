"""
Gradients of the empirical risk.

Three independent routes to the same vector:

* ``backprop_generalized`` - reverse accumulation through the network with
  the generalized derivative d_g A at the stored pre-activations; this is
  the generalized gradient G(theta).
* ``backprop_smoothed`` - the same reverse pass through G_n, the exact
  gradient of the smoothed risk L_n.
* ``pathsum_risk_gradient`` - literal enumeration of all index chains of
  the path-sum formula for the realization's partial derivatives. Kept as
  an oracle only; its cost is exponential in depth.

Per-sample terms are computed through ``ordered_map`` and reduced in
sample order, so results do not depend on GENGRAD_THREADS.
"""

import itertools
import math
from typing import Callable

import numpy as np

from models import (
    Architecture, EmpiricalMeasure, ForwardTrace, GradientVector,
    LayoutIndexError, OracleTooLargeError
)
from numerics.activation import (
    ApproximantFamily, PiecewiseActivation, approximant_derivative,
    approximant_value, generalized_derivative
)
from numerics.network import check_theta, forward, layer_parameters, weight
from numerics.parallel import ordered_map
from numerics.risk import LossFunction

# Hard cap on index chains the path-sum oracle will enumerate.
ORACLE_PATH_LIMIT = 10 ** 6

ScalarFn = Callable[[np.ndarray], np.ndarray]


def backward(trace: ForwardTrace, theta: np.ndarray, arch: Architecture,
             seed: np.ndarray, deriv_fn: ScalarFn, top: int = None) -> np.ndarray:
    """Reverse pass: the theta-gradient of <seed, N^top(x)>.

    Layers are visited in descending order; within a layer the backward
    sum runs over ascending unit index.
    """
    top = arch.depth if top is None else top
    grad = np.zeros(arch.param_count)
    delta = np.asarray(seed, dtype=np.float64)
    for k in range(top, 0, -1):
        W, _ = layer_parameters(theta, arch, k)
        rows, cols = W.shape
        start = arch.offsets[k - 1]
        grad[start:start + rows * cols] = np.outer(delta, trace.layer_input(k)).reshape(-1)
        grad[start + rows * cols:arch.offsets[k]] = delta
        if k > 1:
            back = np.zeros(cols)
            for i in range(rows):
                back += W[i, :] * delta[i]
            delta = back * np.asarray(deriv_fn(trace.preacts[k - 2]), dtype=np.float64)
    return grad


def realization_jacobian(theta, arch: Architecture, x, act_value: ScalarFn,
                         act_deriv: ScalarFn, k: int) -> np.ndarray:
    """d N^k(x) / d theta as an (l_k, param_count) matrix."""
    theta = check_theta(theta, arch)
    trace = forward(theta, arch, x, act_value)
    rows = []
    for h in range(arch.widths[k]):
        seed = np.zeros(arch.widths[k])
        seed[h] = 1.0
        rows.append(backward(trace, theta, arch, seed, act_deriv, top=k))
    return np.array(rows)


def _risk_gradient(theta, arch: Architecture, measure: EmpiricalMeasure, loss: LossFunction,
                   act_value: ScalarFn, act_deriv: ScalarFn) -> GradientVector:
    theta = check_theta(theta, arch)
    measure.check_dimensions(arch)

    def sample_term(sample):
        trace = forward(theta, arch, sample.x, act_value)
        z = trace.output
        term = np.asarray(loss.grad_theta(z, sample.y, theta), dtype=np.float64)
        term = term + backward(trace, theta, arch, loss.grad_z(z, sample.y, theta), act_deriv)
        return sample.w * term

    total = np.zeros(arch.param_count)
    for term in ordered_map(sample_term, measure.samples):
        total += term
    return total


def backprop_generalized(theta, arch: Architecture, measure: EmpiricalMeasure,
                         loss: LossFunction, act: PiecewiseActivation) -> GradientVector:
    """G(theta): reverse accumulation using d_g A, exactly g at kink pre-activations."""
    return _risk_gradient(theta, arch, measure, loss, act.value,
                          lambda u: generalized_derivative(act, u))


def backprop_smoothed(theta, arch: Architecture, measure: EmpiricalMeasure,
                      loss: LossFunction, fam: ApproximantFamily, n: int) -> GradientVector:
    """Exact gradient of the smoothed risk L_n."""
    if n < 1:
        raise ValueError(f"Approximant index must be positive, got {n}")
    return _risk_gradient(theta, arch, measure, loss,
                          lambda u: approximant_value(fam, n, u),
                          lambda u: approximant_derivative(fam, n, u))


# ==================== Path-sum oracle ====================

def _guard_paths(arch: Architecture, k: int, K: int):
    paths = math.prod(arch.widths[k:K + 1])
    if paths > ORACLE_PATH_LIMIT:
        raise OracleTooLargeError(
            f"Path sum over layers {k}..{K} of {arch} has {paths} chains "
            f"(limit {ORACLE_PATH_LIMIT})"
        )


def _check_chain(arch: Architecture, k: int, i: int, K: int, h: int):
    if not 1 <= k <= K <= arch.depth:
        raise LayoutIndexError(f"Need 1 <= k={k} <= K={K} <= {arch.depth}")
    if not 1 <= i <= arch.widths[k]:
        raise LayoutIndexError(f"Unit {i} outside 1..{arch.widths[k]} in layer {k}")
    if not 1 <= h <= arch.widths[K]:
        raise LayoutIndexError(f"Unit {h} outside 1..{arch.widths[K]} in layer {K}")


def _chain_sum(theta, arch: Architecture, slopes: list, k: int, i: int, K: int, h: int) -> float:
    """Sum over chains v_k = i, ..., v_K = h of prod_{p=k+1}^K w^p_{v_p, v_{p-1}} A'(N^{p-1}_{v_{p-1}})."""
    if k == K:
        return 1.0 if i == h else 0.0
    middle = [range(1, arch.widths[p] + 1) for p in range(k + 1, K)]
    total = 0.0
    for inner in itertools.product(*middle):
        chain = (i, *inner, h)
        product = 1.0
        for step, p in enumerate(range(k + 1, K + 1)):
            v_prev, v = chain[step], chain[step + 1]
            product *= weight(theta, arch, p, v, v_prev) * slopes[p - 2][v_prev - 1]
        total += product
    return total


def _slopes(trace: ForwardTrace, act_deriv: ScalarFn) -> list:
    return [np.asarray(act_deriv(pre), dtype=np.float64) for pre in trace.preacts[:-1]]


def pathsum_partial_weight(theta, arch: Architecture, x, act_value: ScalarFn, act_deriv: ScalarFn,
                           k: int, i: int, j: int, K: int, h: int) -> float:
    """d N^K_h(x) / d w^k_{i,j} by explicit chain enumeration."""
    theta = check_theta(theta, arch)
    _check_chain(arch, k, i, K, h)
    if not 1 <= j <= arch.widths[k - 1]:
        raise LayoutIndexError(f"Column {j} outside 1..{arch.widths[k - 1]} in layer {k}")
    _guard_paths(arch, k, K)
    trace = forward(theta, arch, x, act_value)
    return _partial_weight(theta, arch, trace, _slopes(trace, act_deriv), k, i, j, K, h)


def _partial_weight(theta, arch, trace, slopes, k, i, j, K, h) -> float:
    # the input factor is x_j on the first layer and A(N^{k-1}_j) above it
    source = trace.input[j - 1] if k == 1 else trace.activations[k - 2][j - 1]
    return float(source) * _chain_sum(theta, arch, slopes, k, i, K, h)


def pathsum_partial_bias(theta, arch: Architecture, x, act_value: ScalarFn, act_deriv: ScalarFn,
                         k: int, i: int, K: int, h: int) -> float:
    """d N^K_h(x) / d b^k_i by explicit chain enumeration."""
    theta = check_theta(theta, arch)
    _check_chain(arch, k, i, K, h)
    _guard_paths(arch, k, K)
    trace = forward(theta, arch, x, act_value)
    return _chain_sum(theta, arch, _slopes(trace, act_deriv), k, i, K, h)


def pathsum_risk_gradient(theta, arch: Architecture, measure: EmpiricalMeasure,
                          loss: LossFunction, act_value: ScalarFn,
                          act_deriv: ScalarFn) -> GradientVector:
    """Risk gradient assembled entry by entry from the path sums:
    d_theta_l H + sum_h d_{z_h} H * d N^L_h / d theta_l."""
    theta = check_theta(theta, arch)
    measure.check_dimensions(arch)
    _guard_paths(arch, 1, arch.depth)
    L = arch.depth

    total = np.zeros(arch.param_count)
    for sample in measure.samples:
        trace = forward(theta, arch, sample.x, act_value)
        slopes = _slopes(trace, act_deriv)
        z = trace.output
        dz = np.asarray(loss.grad_z(z, sample.y, theta), dtype=np.float64)
        entry = np.array(loss.grad_theta(z, sample.y, theta), dtype=np.float64)
        position = 0
        for k in range(1, L + 1):
            for i in range(1, arch.widths[k] + 1):
                for j in range(1, arch.widths[k - 1] + 1):
                    entry[position] += sum(
                        dz[h - 1] * _partial_weight(theta, arch, trace, slopes, k, i, j, L, h)
                        for h in range(1, arch.widths[L] + 1)
                    )
                    position += 1
            for i in range(1, arch.widths[k] + 1):
                entry[position] += sum(
                    dz[h - 1] * _chain_sum(theta, arch, slopes, k, i, L, h)
                    for h in range(1, arch.widths[L] + 1)
                )
                position += 1
        total += sample.w * entry
    return total
