"""
Loss functions and the empirical risk L(theta) = sum_i w_i H(N(x_i), y_i, theta).

Losses use the argument order H(z, y, theta): network output, target,
parameters.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from models import Architecture, EmpiricalMeasure, GrowthReport, box_corners
from numerics.activation import ApproximantFamily, PiecewiseActivation, approximant_value
from numerics.network import check_theta, forward_batch

logger = logging.getLogger(__name__)

# Growth quotients above this are reported as violating the integrability hypothesis.
GROWTH_FLAG_THRESHOLD = 1e9


@dataclass(frozen=True)
class LossFunction:
    """A C^1 loss H(z, y, theta) with its partial gradients."""
    name: str
    value: Callable[[np.ndarray, np.ndarray, np.ndarray], float]
    grad_z: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    grad_theta: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    params: dict = field(default_factory=dict)


def mse_loss() -> LossFunction:
    """H = ||z - y||^2."""
    return LossFunction(
        name="mse",
        value=lambda z, y, theta: float(np.sum((z - y) ** 2)),
        grad_z=lambda z, y, theta: 2.0 * (z - y),
        grad_theta=lambda z, y, theta: np.zeros(len(theta)),
    )


def weighted_mse_loss(weights) -> LossFunction:
    """H = sum_h c_h (z_h - y_h)^2."""
    c = np.asarray(weights, dtype=np.float64)
    if np.any(c < 0):
        raise ValueError("Output weights must be nonnegative")
    return LossFunction(
        name="weighted_mse",
        value=lambda z, y, theta: float(np.sum(c * (z - y) ** 2)),
        grad_z=lambda z, y, theta: 2.0 * c * (z - y),
        grad_theta=lambda z, y, theta: np.zeros(len(theta)),
        params={'weights': c.tolist()},
    )


def ridge_mse_loss(lam: float) -> LossFunction:
    """H = ||z - y||^2 + lam ||theta||^2, so the theta-gradient is nonzero."""
    lam = float(lam)
    return LossFunction(
        name="ridge_mse",
        value=lambda z, y, theta: float(np.sum((z - y) ** 2)) + lam * float(np.dot(theta, theta)),
        grad_z=lambda z, y, theta: 2.0 * (z - y),
        grad_theta=lambda z, y, theta: 2.0 * lam * np.asarray(theta, dtype=np.float64),
        params={'lambda': lam},
    )


LOSSES = {
    'mse': mse_loss,
    'weighted_mse': weighted_mse_loss,
    'ridge_mse': ridge_mse_loss,
}


def _integrate(theta, arch: Architecture, measure: EmpiricalMeasure,
               loss: LossFunction, value_fn) -> float:
    theta = check_theta(theta, arch)
    measure.check_dimensions(arch)
    if not len(measure):
        return 0.0
    outputs = forward_batch(theta, arch, measure.inputs, value_fn)[-1]
    total = 0.0
    for sample, z in zip(measure.samples, outputs):
        total += sample.w * loss.value(z, sample.y, theta)
    return total


def risk(theta, arch: Architecture, measure: EmpiricalMeasure, loss: LossFunction,
         act: PiecewiseActivation) -> float:
    """Weighted loss sum, accumulated in stored sample order."""
    return _integrate(theta, arch, measure, loss, act.value)


def risk_smoothed(theta, arch: Architecture, measure: EmpiricalMeasure, loss: LossFunction,
                  fam: ApproximantFamily, n: int) -> float:
    """Risk of the network with G_n as activation."""
    if n < 1:
        raise ValueError(f"Approximant index must be positive, got {n}")
    return _integrate(theta, arch, measure, loss, lambda u: approximant_value(fam, n, u))


def _box_points(r: float, dim: int, points: int, samples: int,
                rng: np.random.Generator) -> np.ndarray:
    """Full grid on [-r, r]^dim when small enough, else corners plus uniform draws."""
    if points ** dim <= samples:
        axes = np.meshgrid(*([np.linspace(-r, r, points)] * dim), indexing='ij')
        return np.stack([a.reshape(-1) for a in axes], axis=1)
    corners = box_corners(-r, r, dim, limit=samples // 2)
    draws = rng.uniform(-r, r, size=(samples - len(corners), dim))
    return np.vstack([np.zeros((1, dim)), corners, draws])


def loss_growth_probe(loss: LossFunction, arch: Architecture, measure: EmpiricalMeasure,
                      r: float, points: int = 5, samples: int = 512, n_theta: int = 32,
                      seed: int = 0, threshold: float = GROWTH_FLAG_THRESHOLD) -> GrowthReport:
    """Sample sup (||grad_z H|| + ||grad_theta H||) / (1 + |H(Z, Theta, y)|) over boxes.

    For every target y in the support the numerator is maximized over the
    output box and parameter samples, and the denominator over all of them
    (the hypothesis quantifies the denominator's arguments separately).
    """
    if not r > 0:
        raise ValueError("Probe radius must be positive")
    measure.check_dimensions(arch)
    rng = np.random.default_rng(seed)
    zs = _box_points(r, arch.output_dim, points, samples, rng)
    thetas = np.vstack([
        np.zeros((1, arch.param_count)),
        np.full((1, arch.param_count), r),
        np.full((1, arch.param_count), -r),
        rng.uniform(-r, r, size=(n_theta, arch.param_count)),
    ])

    findings = []
    empirical_sup = 0.0
    targets = {tuple(s.y.tolist()) for s in measure.samples if s.w > 0}
    with np.errstate(over='ignore', invalid='ignore'):
        for y in sorted(targets):
            y = np.asarray(y)
            numerator, smallest = 0.0, math.inf
            for theta in thetas:
                for z in zs:
                    grad = (float(np.linalg.norm(loss.grad_z(z, y, theta)))
                            + float(np.linalg.norm(loss.grad_theta(z, y, theta))))
                    value = abs(float(loss.value(z, y, theta)))
                    numerator = max(numerator, grad) if math.isfinite(grad) else math.inf
                    if math.isfinite(value):
                        smallest = min(smallest, value)
            quotient = numerator / (1.0 + smallest) if math.isfinite(smallest) else math.inf
            empirical_sup = max(empirical_sup, quotient)

    flagged = not (math.isfinite(empirical_sup) and empirical_sup <= threshold)
    if flagged:
        findings.append(
            f"{loss.name}: growth quotient {empirical_sup:.3e} exceeds {threshold:.1e} on [-{r}, {r}]"
        )
        logger.warning(findings[-1])
    return GrowthReport(radius=r, empirical_sup=empirical_sup, threshold=threshold,
                        flagged=flagged, findings=findings)
