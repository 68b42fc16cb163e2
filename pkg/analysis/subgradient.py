"""
Limiting Frechet subgradient witnesses.

A witness for G(theta) is a sequence of parameters theta_n -> theta at which
the risk is differentiable and G(theta_n) -> G(theta). The sequence is built
by shifting hidden biases so that every hidden pre-activation, over a whole
input box, moves off the kinks toward the side from which the generalized
derivative is continuous. Differentiability at theta_n is then tested with
finite differences and a sampled Frechet quotient.
"""

import logging
import math
from typing import Optional, Sequence

import numpy as np

from models import (
    Architecture, EmpiricalMeasure, SubgradientWitness, box_corners
)
from numerics.activation import ApproximantFamily, PiecewiseActivation, generalized_derivative
from numerics.gradients import (
    backprop_generalized, backprop_smoothed, realization_jacobian
)
from numerics.network import check_theta, forward_batch, layer_parameters
from numerics.risk import LossFunction, risk
from analysis.finite_difference import fd_gradient, kink_distances, kink_margin

logger = logging.getLogger(__name__)

EPS = float(np.finfo(np.float64).eps)

# Acceptance thresholds for one witness.
FRECHET_TOLERANCE = 1e-6
FD_TOLERANCE = 1e-4
FINAL_GAP_TOLERANCE = 1e-8
DERIVATIVE_GAP_TOLERANCE = 1e-6
SIGN_SAMPLES = 128


def activation_lipschitz(act: PiecewiseActivation, radius: float, points: int = 20001) -> float:
    """Sampled sup |a| on [-radius, radius], kink values included."""
    grid = [np.linspace(-radius, radius, points)]
    approach = np.logspace(-12, 0, 201)
    for y in act.kinks.points:
        if abs(y) <= radius:
            grid.extend([y - approach, y + approach])
    grid = np.concatenate(grid)
    with np.errstate(all='ignore'):
        slopes = np.abs(act.offkink_derivative(grid))
    bound = float(np.max(slopes))
    if len(act.kinks):
        bound = max(bound, float(np.max(np.abs(act.kink_value_array))))
    return bound


def _box_inputs(a: float, b: float, dim: int, samples: int, rng: np.random.Generator) -> np.ndarray:
    corners = box_corners(a, b, dim, limit=samples)
    draws = rng.uniform(a, b, size=(samples, dim))
    return np.vstack([corners, draws])


def _check_box(input_box) -> tuple[float, float]:
    a, b = (float(v) for v in input_box)
    if not b > a:
        raise ValueError(f"Input box [{a}, {b}] is empty")
    return a, b


def layer_lipschitz_constant(theta, arch: Architecture, act: PiecewiseActivation,
                             input_box, samples: int = 256, seed: int = 0) -> float:
    """
    Estimate of max_k ||W^{k+1}||_inf * sup|a|, the factor by which a shift of
    the layer-k pre-activations can grow into layer k+1.

    sup|a| is sampled on an interval covering twice the largest pre-activation
    seen on the box, plus one.
    """
    theta = check_theta(theta, arch)
    a, b = _check_box(input_box)
    if arch.depth < 2:
        return 0.0
    rng = np.random.default_rng(seed)
    inputs = _box_inputs(a, b, arch.input_dim, samples, rng)
    preacts = forward_batch(theta, arch, inputs, act)[:-1]
    reach = max(float(np.max(np.abs(pre))) for pre in preacts)
    if len(act.kinks):
        reach = max(reach, float(np.max(np.abs(act.kinks.array))))
    lip_act = activation_lipschitz(act, 2 * reach + 1)

    estimate = 0.0
    for k in range(1, arch.depth):
        W, _ = layer_parameters(theta, arch, k + 1)
        estimate = max(estimate, float(np.max(np.sum(np.abs(W), axis=1))) * lip_act)
    return estimate


def _layer_scales(arch: Architecture, a: float, b: float, C: float) -> list[float]:
    """c_1 = max(l_0|a|, l_0|b|, 1), c_{k+1} = 2 c_k max(1, C) for the hidden layers."""
    if arch.depth < 2:
        return []
    scales = [max(arch.input_dim * abs(a), arch.input_dim * abs(b), 1.0)]
    for _ in range(2, arch.depth):
        scales.append(2 * scales[-1] * max(1.0, C))
    return scales


def left_approach_sequence(theta, arch: Architecture, input_box, epsilon_schedule: Sequence[float],
                           act: PiecewiseActivation, seed: int = 0) -> list[np.ndarray]:
    """
    One parameter vector per epsilon, each closer than epsilon to theta.

    Weights are kept; the layer-k hidden biases move by z * 1.5 * c_k * delta',
    z the sign of the activation's approach side. With C twice the sampled
    layer Lipschitz constant, every hidden pre-activation on the box then
    moves by z * s with s in [c_k delta', 2 c_k delta'].
    """
    theta = check_theta(theta, arch)
    a, b = _check_box(input_box)
    epsilons = [float(e) for e in epsilon_schedule]
    if any(e <= 0 for e in epsilons):
        raise ValueError("Epsilon values must be positive")

    C = 2 * layer_lipschitz_constant(theta, arch, act, (a, b), seed=seed)
    if not math.isfinite(C):
        raise ValueError(f"Lipschitz estimate for {act.name} is not finite")
    scales = _layer_scales(arch, a, b, C)
    z = act.approach_side.sign

    sequence = []
    for epsilon in epsilons:
        if not scales:
            sequence.append(theta.copy())
            continue
        delta = min(1.0, epsilon / (2 * scales[-1] * math.sqrt(arch.param_count)))
        vartheta = theta.copy()
        for k, c in enumerate(scales, start=1):
            start = arch.offsets[k - 1] + arch.widths[k] * arch.widths[k - 1]
            vartheta[start:arch.offsets[k]] += z * 1.5 * c * delta
        sequence.append(vartheta)
    return sequence


def sign_condition(theta, vartheta, arch: Architecture, act: PiecewiseActivation,
                   input_box, samples: int = SIGN_SAMPLES, seed: int = 0) -> bool:
    """z * (N^k(vartheta) - N^k(theta)) >= 0 for every hidden unit on box corners and draws."""
    a, b = _check_box(input_box)
    if arch.depth < 2:
        return True
    rng = np.random.default_rng(seed)
    inputs = _box_inputs(a, b, arch.input_dim, samples, rng)
    z = act.approach_side.sign
    before = forward_batch(theta, arch, inputs, act)[:-1]
    after = forward_batch(vartheta, arch, inputs, act)[:-1]
    return all(bool(np.all(z * (q - p) >= 0)) for p, q in zip(before, after))


def _hidden_derivatives(theta, arch: Architecture, measure: EmpiricalMeasure,
                        act: PiecewiseActivation) -> list[np.ndarray]:
    if arch.depth < 2 or not len(measure):
        return []
    preacts = forward_batch(theta, arch, measure.inputs, act)[:-1]
    return [np.asarray(generalized_derivative(act, pre)) for pre in preacts]


def _step_limits(theta, arch: Architecture, measure: EmpiricalMeasure,
                 act: PiecewiseActivation) -> tuple[np.ndarray, float]:
    """
    Per-coordinate step and radius that keep every hidden pre-activation on
    its side of the kinks, to first order: half the kink distance over the
    unit's parameter sensitivity.
    """
    coordinate = np.full(arch.param_count, math.inf)
    radius = math.inf
    distances = kink_distances(theta, arch, measure, act)
    derivative = lambda u: generalized_derivative(act, u)
    for s, sample in enumerate(measure.samples):
        for k, dist in enumerate(distances, start=1):
            J = realization_jacobian(theta, arch, sample.x, act.value, derivative, k)
            for i, row in enumerate(J):
                d = float(dist[s, i])
                with np.errstate(divide='ignore'):
                    coordinate = np.minimum(coordinate, 0.5 * d / np.abs(row))
                norm = float(np.linalg.norm(row))
                if norm > 0:
                    radius = min(radius, 0.5 * d / norm)
    return coordinate, radius


def _unit_directions(count: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    directions = rng.standard_normal((count, dim))
    norms = np.linalg.norm(directions, axis=1, keepdims=True)
    return directions / np.where(norms > 0, norms, 1.0)


def _smoothed_agreement(vartheta, arch, measure, loss, fam: ApproximantFamily,
                        margin: float, gradient: np.ndarray) -> bool:
    """grad L_n(vartheta) equals G(vartheta) bit for bit once delta/n is below the kink margin."""
    if math.isinf(margin):
        n = 1
    else:
        n = 2 * math.ceil(fam.delta / margin) + 1
    return np.array_equal(backprop_smoothed(vartheta, arch, measure, loss, fam, n), gradient)


def limiting_subgradient_check(theta, arch: Architecture, measure: EmpiricalMeasure,
                               loss: LossFunction, act: PiecewiseActivation,
                               fam: Optional[ApproximantFamily] = None, n_dirs: int = 32,
                               radii: Sequence[float] = (1e-4, 1e-6, 1e-8),
                               epsilon_schedule: Optional[Sequence[float]] = None,
                               h: float = 1e-6, min_distance: float = 1e-10,
                               seed: int = 0) -> SubgradientWitness:
    """
    Build a witness sequence and test differentiability along it.

    Args:
        n_dirs: random unit directions per radius in the Frechet sampler
        radii: strictly decreasing; only the smallest radius is held to
            the quotient tolerance
        epsilon_schedule: closeness targets; by default 0.1 halved until the
            distance to theta drops below ``min_distance``
        h: largest finite-difference step

    Returns:
        SubgradientWitness; problems are listed in its findings.
    """
    theta = check_theta(theta, arch)
    measure.check_dimensions(arch)
    if n_dirs < 1:
        raise ValueError(f"n_dirs must be at least 1, got {n_dirs}")
    radii = [float(r) for r in radii]
    if not radii or any(r <= 0 for r in radii) or any(q >= r for r, q in zip(radii, radii[1:])):
        raise ValueError(f"Radii must be positive and strictly decreasing: {radii}")
    fam = fam or ApproximantFamily(act)
    rng = np.random.default_rng(seed)
    box = measure.bounding_box()

    margin = kink_margin(theta, arch, measure, act)
    degenerate = margin > 0
    if degenerate:
        sequence = [theta.copy()]
    elif epsilon_schedule is not None:
        sequence = left_approach_sequence(theta, arch, box, epsilon_schedule, act, seed)
    else:
        sequence = []
        epsilon = 0.1
        while True:
            vartheta = left_approach_sequence(theta, arch, box, [epsilon], act, seed)[0]
            sequence.append(vartheta)
            if np.linalg.norm(vartheta - theta) < min_distance or epsilon < min_distance:
                break
            epsilon /= 2

    target = backprop_generalized(theta, arch, measure, loss, act)
    base_derivatives = _hidden_derivatives(theta, arch, measure, act)
    objective = lambda t: risk(t, arch, measure, loss, act)

    witness = SubgradientWitness(
        theta=theta, sequence=sequence, grads=[], distances=[], grad_gaps=[],
        frechet_quotients=[], quotient_tolerances=[], fd_errors=[], derivative_gaps=[],
        sign_condition=True, degenerate=degenerate, seed=seed,
    )
    for step, vartheta in enumerate(sequence):
        gradient = backprop_generalized(vartheta, arch, measure, loss, act)
        witness.grads.append(gradient)
        witness.distances.append(float(np.linalg.norm(vartheta - theta)))
        witness.grad_gaps.append(float(np.linalg.norm(gradient - target)))

        derivatives = _hidden_derivatives(vartheta, arch, measure, act)
        gaps = [float(np.max(np.abs(p - q))) for p, q in zip(derivatives, base_derivatives) if p.size]
        witness.derivative_gaps.append(max(gaps, default=0.0))

        if not degenerate and not sign_condition(theta, vartheta, arch, act, box, seed=seed + step):
            witness.sign_condition = False

        step_margin = kink_margin(vartheta, arch, measure, act)
        if step_margin == 0:
            witness.findings.append(f"step {step}: a hidden pre-activation sits on a kink")
            for values in (witness.fd_errors, witness.frechet_quotients, witness.quotient_tolerances):
                values.append(math.nan)
            continue
        if not _smoothed_agreement(vartheta, arch, measure, loss, fam, step_margin, gradient):
            witness.findings.append(f"step {step}: smoothed gradient differs from G past stabilization")

        coordinate_limits, radius_limit = _step_limits(vartheta, arch, measure, act)
        steps = np.minimum(h, coordinate_limits)
        value = objective(vartheta)
        scale = max(1.0, float(np.linalg.norm(gradient)))
        fd_error = float(np.linalg.norm(fd_gradient(objective, vartheta, steps) - gradient)) / scale
        fd_allowance = 4 * EPS * max(1.0, abs(value)) / float(np.min(steps)) / scale
        witness.fd_errors.append(fd_error)
        if fd_error > FD_TOLERANCE + fd_allowance:
            witness.findings.append(f"step {step}: finite differences differ from G by {fd_error:.3e}")

        quotient = math.inf
        r_eff = min(radii[-1], radius_limit)
        for r in radii:
            r_step = min(r, radius_limit)
            for u in _unit_directions(n_dirs, arch.param_count, rng):
                q = (objective(vartheta + r_step * u) - value - float(np.dot(gradient, r_step * u))) / r_step
                if r == radii[-1]:
                    quotient = min(quotient, q)
        tolerance = FRECHET_TOLERANCE + 4 * EPS * max(1.0, abs(value)) / r_eff
        witness.frechet_quotients.append(quotient)
        witness.quotient_tolerances.append(tolerance)
        if quotient < -tolerance:
            witness.findings.append(f"step {step}: Frechet quotient {quotient:.3e} below -{tolerance:.1e}")

    if not witness.sign_condition:
        witness.findings.append("some hidden pre-activation moved away from the approach side")
    if any(b >= a for a, b in zip(witness.distances, witness.distances[1:])):
        witness.findings.append("distances to theta are not strictly decreasing")
    if not degenerate:
        if witness.grad_gaps[-1] > FINAL_GAP_TOLERANCE:
            witness.findings.append(f"final gradient gap {witness.grad_gaps[-1]:.3e} exceeds {FINAL_GAP_TOLERANCE}")
        if witness.derivative_gaps[-1] > DERIVATIVE_GAP_TOLERANCE:
            witness.findings.append(
                f"generalized derivatives along the witness end {witness.derivative_gaps[-1]:.3e} away"
            )
    for finding in witness.findings:
        logger.warning(f"{act.name}: {finding}")
    return witness
