"""
Central finite differences and the smooth-region agreement check.
"""

import logging
import math
from typing import Callable

import numpy as np

from models import Architecture, EmpiricalMeasure, GradientVector
from numerics.activation import PiecewiseActivation
from numerics.gradients import backprop_generalized
from numerics.network import check_theta, forward_batch
from numerics.risk import LossFunction, risk

logger = logging.getLogger(__name__)


def fd_gradient(func: Callable[[np.ndarray], float], theta, h=1e-6) -> GradientVector:
    """
    Centered-difference gradient of func at theta.

    ``h`` is either one step for every coordinate or an array of
    per-coordinate steps.
    """
    x0 = np.array(theta, dtype=np.float64).reshape(-1)
    steps = np.broadcast_to(np.asarray(h, dtype=np.float64), x0.shape)
    if not np.all(steps > 0):
        raise ValueError("Finite-difference steps must be positive")

    grad = np.zeros(len(x0))
    for j in range(len(x0)):
        x = np.copy(x0)
        x[j] = x0[j] + steps[j]
        fplus = func(x)
        x[j] = x0[j] - steps[j]
        fminus = func(x)
        grad[j] = (fplus - fminus) / (2 * steps[j])
    return grad


def kink_distances(theta, arch: Architecture, measure: EmpiricalMeasure,
                   act: PiecewiseActivation) -> list[np.ndarray]:
    """Per hidden layer, an (N, l_k) array of distances from each pre-activation to the nearest kink."""
    theta = check_theta(theta, arch)
    measure.check_dimensions(arch)
    points = act.kinks.array
    if not len(points) or not len(measure) or arch.depth < 2:
        return []
    preacts = forward_batch(theta, arch, measure.inputs, act)[:-1]
    return [np.min(np.abs(pre[..., None] - points), axis=-1) for pre in preacts]


def kink_margin(theta, arch: Architecture, measure: EmpiricalMeasure,
                act: PiecewiseActivation) -> float:
    """Smallest distance of any hidden pre-activation at any sample to the kink set."""
    distances = kink_distances(theta, arch, measure, act)
    if not distances:
        return math.inf
    return float(min(np.min(d) for d in distances))


def smooth_region_agreement(theta, arch: Architecture, measure: EmpiricalMeasure,
                            loss: LossFunction, act: PiecewiseActivation,
                            h: float = 1e-6) -> float:
    """
    Relative distance between finite differences of the risk and G(theta).

    Near a kink the central difference may straddle it; that case is logged
    and the discrepancy is still returned.

    Returns:
        ||FD - G|| / max(1, ||G||)
    """
    theta = check_theta(theta, arch)
    margin = kink_margin(theta, arch, measure, act)
    required = 10 * h * max(1.0, float(np.linalg.norm(theta)))
    if margin < required:
        logger.warning(
            f"Kink margin {margin:.3e} is below {required:.3e}; "
            f"finite differences may straddle a kink"
        )

    exact = backprop_generalized(theta, arch, measure, loss, act)
    approx = fd_gradient(lambda t: risk(t, arch, measure, loss, act), theta, h)
    discrepancy = float(np.linalg.norm(approx - exact)) / max(1.0, float(np.linalg.norm(exact)))
    logger.debug(f"smooth-region discrepancy {discrepancy:.3e} at margin {margin:.3e}")
    return discrepancy
