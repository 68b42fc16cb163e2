"""
Sampling probes for local Lipschitz continuity of the risk and for uniform
bounds on the smoothed realizations.
"""

import logging
import math
from typing import Optional

import numpy as np

from models import (
    Architecture, EmpiricalMeasure, LayerBounds, UniformBoundReport, box_corners
)
from numerics.activation import ApproximantFamily, PiecewiseActivation, approximant_derivative, approximant_value
from numerics.gradients import backprop_generalized, backprop_smoothed, realization_jacobian
from numerics.network import check_theta, forward_batch
from numerics.risk import LossFunction, risk
from analysis.convergence import check_schedule

logger = logging.getLogger(__name__)

LOCAL_STEP = 1e-4
REFINE_STARTS = 4
REFINE_STEPS = 400


def sample_ball(center: np.ndarray, radius: float, count: int,
                rng: np.random.Generator) -> np.ndarray:
    """Uniform draws from the closed Euclidean ball around center."""
    dim = len(center)
    directions = rng.standard_normal((count, dim))
    norms = np.linalg.norm(directions, axis=1, keepdims=True)
    directions /= np.where(norms > 0, norms, 1.0)
    lengths = radius * rng.uniform(0.0, 1.0, size=(count, 1)) ** (1.0 / dim)
    return center + lengths * directions


def project_ball(center: np.ndarray, radius: float, point: np.ndarray) -> np.ndarray:
    """Nearest point of the closed ball."""
    offset = point - center
    norm = float(np.linalg.norm(offset))
    return point if norm <= radius else center + offset * (radius / norm)


def _quotient(value, theta, theta_value, partner, min_distance: float = 0.0) -> float:
    distance = float(np.linalg.norm(partner - theta))
    if distance == 0 or distance < min_distance:
        return 0.0
    return abs(theta_value - value(partner)) / distance


def _local_quotient(value, gradient, theta, center, radius, step) -> float:
    """Difference quotient of theta against a partner step away along +-G(theta), both in the ball."""
    g = gradient(theta)
    norm = float(np.linalg.norm(g))
    if norm == 0:
        return 0.0
    if not math.isfinite(norm):
        return norm
    direction = g / norm
    theta_value = value(theta)
    # partners squeezed onto theta by the projection carry only rounding noise
    return max(_quotient(value, theta, theta_value, project_ball(center, radius, theta + sign * step * direction),
                         min_distance=step / 2)
               for sign in (1.0, -1.0))


def _refine(quality, start, start_quality, center, radius, rng) -> float:
    """Random pattern search on the local quotient, shrinking the step every 40 misses."""
    best, best_quality = start, start_quality
    scale = radius / 4
    misses = 0
    for _ in range(REFINE_STEPS):
        direction = rng.standard_normal(len(best))
        direction /= max(float(np.linalg.norm(direction)), 1e-300)
        candidate = project_ball(center, radius, best + scale * direction)
        q = quality(candidate)
        if q > best_quality:
            best, best_quality = candidate, q
            continue
        misses += 1
        if misses % 40 == 0:
            scale /= 2
    return best_quality


def lipschitz_probe(arch: Architecture, measure: EmpiricalMeasure, loss: LossFunction,
                    act: PiecewiseActivation, ball_center, ball_radius: float,
                    n_pairs: int, seed: int = 0) -> float:
    """
    Empirical Lipschitz constant of L on the closed ball B(center, radius).

    Every draw theta contributes two pairs: an independent draw vartheta,
    and a local partner LOCAL_STEP * radius away along the direction of
    G(theta). The local quotients track ||G|| so their max settles on the
    steepest region of the ball; the best REFINE_STARTS local pairs are
    then pushed uphill by a seeded pattern search. Every pair lies in the
    ball, so on a region where L is C^1 the result never exceeds the sup
    of ||grad L|| there.
    """
    if n_pairs < 1:
        raise ValueError(f"n_pairs must be at least 1, got {n_pairs}")
    if not ball_radius >= 0:
        raise ValueError("Ball radius must be nonnegative")
    center = check_theta(ball_center, arch)
    if ball_radius == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    first = sample_ball(center, ball_radius, n_pairs, rng)
    second = sample_ball(center, ball_radius, n_pairs, rng)
    step = LOCAL_STEP * ball_radius

    def value(t):
        return risk(t, arch, measure, loss, act)

    def gradient(t):
        return backprop_generalized(t, arch, measure, loss, act)

    def quality(t):
        return _local_quotient(value, gradient, t, center, ball_radius, step)

    constant = 0.0
    local = np.empty(n_pairs)
    for i, (theta, vartheta) in enumerate(zip(first, second)):
        constant = max(constant, _quotient(value, theta, value(theta), vartheta))
        local[i] = quality(theta)

    for i in np.argsort(-local, kind='stable')[:REFINE_STARTS]:
        constant = max(constant, _refine(quality, first[i], float(local[i]), center, ball_radius, rng))
    logger.debug(f"lipschitz probe: {constant:.6g} over {n_pairs} draws (seed {seed})")
    return constant


def probe_spread(first: float, second: float) -> float:
    """Relative difference of two probe results."""
    scale = max(abs(first), abs(second))
    return 0.0 if scale == 0 else abs(first - second) / scale


def _probe_inputs(arch: Architecture, measure: Optional[EmpiricalMeasure], inputs,
                  rng: np.random.Generator, count: int) -> np.ndarray:
    if inputs is not None:
        return np.asarray(inputs, dtype=np.float64).reshape(-1, arch.input_dim)
    if measure is not None and len(measure):
        return measure.inputs
    corners = box_corners(-1.0, 1.0, arch.input_dim, limit=count)
    return np.vstack([corners, rng.uniform(-1.0, 1.0, size=(count, arch.input_dim))])


def uniform_bound_probe(arch: Architecture, fam: ApproximantFamily, compact_box,
                        n_schedule, measure: Optional[EmpiricalMeasure] = None,
                        loss: Optional[LossFunction] = None, inputs=None,
                        samples: int = 16, seed: int = 0) -> UniformBoundReport:
    """
    Empirical sups of the smoothed realizations over parameters, indices and inputs.

    Args:
        compact_box: (center, radius); parameters are the center plus
            ``samples`` uniform draws from [center - radius, center + radius]
        n_schedule: approximant indices to sweep
        measure, loss: when both are given the report also carries the sup
            of ||grad L_n|| over the same draws
        inputs: evaluation points; by default the measure's inputs, or
            corners and draws of [-1, 1]^l_0

    The output layer has no activation, so its value and derivative sups
    are those of the identity.
    """
    center, radius = compact_box
    center = check_theta(center, arch)
    radius = float(radius)
    if radius < 0:
        raise ValueError("Box radius must be nonnegative")
    schedule = check_schedule(n_schedule)
    rng = np.random.default_rng(seed)

    thetas = [center]
    if radius > 0:
        thetas.extend(center + rng.uniform(-radius, radius, size=(samples, arch.param_count)))
    xs = _probe_inputs(arch, measure, inputs, rng, samples)

    depth = arch.depth
    preact_sup = [0.0] * depth
    value_sup = [0.0] * depth
    derivative_sup = [0.0] * depth
    jacobian_sup = [0.0] * depth
    gradient_sup = 0.0 if measure is not None and loss is not None else None

    for n in schedule:
        value_fn = lambda u, n=n: approximant_value(fam, n, u)
        deriv_fn = lambda u, n=n: approximant_derivative(fam, n, u)
        for theta in thetas:
            preacts = forward_batch(theta, arch, xs, value_fn)
            for k, pre in enumerate(preacts):
                if not pre.size:
                    continue
                preact_sup[k] = max(preact_sup[k], float(np.max(np.abs(pre))))
                if k < depth - 1:
                    value_sup[k] = max(value_sup[k], float(np.max(np.abs(value_fn(pre)))))
                    derivative_sup[k] = max(derivative_sup[k], float(np.max(np.abs(deriv_fn(pre)))))
                else:
                    value_sup[k] = preact_sup[k]
                    derivative_sup[k] = 1.0
            for x in xs:
                for k in range(1, depth + 1):
                    J = realization_jacobian(theta, arch, x, value_fn, deriv_fn, k)
                    jacobian_sup[k - 1] = max(jacobian_sup[k - 1], float(np.max(np.abs(J))))
            if gradient_sup is not None:
                gradient = backprop_smoothed(theta, arch, measure, loss, fam, n)
                gradient_sup = max(gradient_sup, float(np.linalg.norm(gradient)))

    layers = [
        LayerBounds(layer=k + 1, preact_sup=preact_sup[k], value_sup=value_sup[k],
                    derivative_sup=derivative_sup[k], jacobian_sup=jacobian_sup[k])
        for k in range(depth)
    ]
    report = UniformBoundReport(layers=layers, gradient_sup=gradient_sup,
                                samples=len(thetas) * len(xs) * len(schedule), seed=seed)
    if not all(math.isfinite(v) for layer in layers for v in
               (layer.preact_sup, layer.value_sup, layer.derivative_sup, layer.jacobian_sup)):
        logger.warning(f"{fam.base.name}: non-finite uniform bound over the sampled box")
    return report
