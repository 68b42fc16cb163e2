"""
Piecewise-C^1 activation functions, their generalized derivatives and the
C^1 approximant sequence G_n built by blending a kink linearization into
the activation over shrinking neighbourhoods of the kinks.

Every scalar operation accepts a float or a numpy array and returns the
same kind.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from models import (
    ApproachSide, KinkSet, ActivationReport, PointStabilization,
    StabilizationReport, ZoneError
)

logger = logging.getLogger(__name__)

ScalarFn = Callable[[np.ndarray], np.ndarray]

# A sampled |a(x)| above this is treated as evidence that a is not locally bounded.
LOCAL_BOUND_THRESHOLD = 1e8


def _finish(x, result):
    """Return a float for scalar input, the array otherwise."""
    if np.ndim(x) == 0:
        return float(result)
    return result


@dataclass(frozen=True)
class PiecewiseActivation:
    """An activation A, its derivative a off the kinks, and the kink values g."""
    name: str
    value: ScalarFn
    offkink_derivative: ScalarFn
    kinks: KinkSet
    kink_values: dict = field(default_factory=dict)
    approach_side: ApproachSide = ApproachSide.LEFT
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        values = {float(k): float(v) for k, v in self.kink_values.items()}
        if set(values) != set(self.kinks.points):
            raise ValueError(
                f"{self.name}: kink values {sorted(values)} do not match kinks {self.kinks.points}"
            )
        object.__setattr__(self, 'kink_values', values)

    @property
    def kink_value_array(self) -> np.ndarray:
        return np.array([self.kink_values[p] for p in self.kinks.points], dtype=np.float64)

    def with_kink_values(self, overrides: dict) -> "PiecewiseActivation":
        values = dict(self.kink_values)
        values.update({float(k): float(v) for k, v in overrides.items()})
        return PiecewiseActivation(self.name, self.value, self.offkink_derivative,
                                   self.kinks, values, self.approach_side, dict(self.params))

    def with_approach_side(self, side: ApproachSide) -> "PiecewiseActivation":
        return PiecewiseActivation(self.name, self.value, self.offkink_derivative,
                                   self.kinks, dict(self.kink_values), side, dict(self.params))


@dataclass(frozen=True)
class BlendingFunction:
    """C^1 ramp eta with eta(0) = eta'(0) = eta'(1) = 0 and eta(1) = 1."""
    name: str
    value: ScalarFn
    derivative: ScalarFn


@dataclass(frozen=True)
class ApproximantFamily:
    """The sequence n -> G_n for one activation, blending function and delta."""
    base: PiecewiseActivation
    eta: BlendingFunction = None
    delta: Optional[float] = None

    def __post_init__(self):
        if self.eta is None:
            object.__setattr__(self, 'eta', smoothstep())
        gap = half_gap(self.base.kinks)
        if self.delta is None:
            object.__setattr__(self, 'delta', gap)
        elif not 0 < self.delta <= gap:
            raise ValueError(f"delta must lie in (0, {gap}], got {self.delta}")


# ==================== Built-in activations ====================

def relu() -> PiecewiseActivation:
    """ReLU with the left derivative 0 at the kink."""
    return PiecewiseActivation(
        name="relu",
        value=lambda x: np.maximum(x, 0.0),
        offkink_derivative=lambda x: np.where(x > 0, 1.0, 0.0),
        kinks=KinkSet((0.0,)),
        kink_values={0.0: 0.0},
        approach_side=ApproachSide.LEFT,
    )


def leaky_relu(gamma: float = 0.01) -> PiecewiseActivation:
    gamma = float(gamma)
    return PiecewiseActivation(
        name="leaky_relu",
        value=lambda x: np.where(x > 0, x, gamma * x),
        offkink_derivative=lambda x: np.where(x > 0, 1.0, gamma),
        kinks=KinkSet((0.0,)),
        kink_values={0.0: gamma},
        approach_side=ApproachSide.LEFT,
        params={'gamma': gamma},
    )


def absolute(kink_value: float = -1.0,
             approach_side: Optional[ApproachSide] = None) -> PiecewiseActivation:
    """|x| with a configurable g(0); the side defaults to the one g(0) matches."""
    if approach_side is None:
        approach_side = ApproachSide.RIGHT if kink_value == 1.0 else ApproachSide.LEFT
    return PiecewiseActivation(
        name="abs",
        value=np.abs,
        offkink_derivative=lambda x: np.where(x > 0, 1.0, -1.0),
        kinks=KinkSet((0.0,)),
        kink_values={0.0: kink_value},
        approach_side=approach_side,
    )


def hard_tanh(approach_side: ApproachSide = ApproachSide.LEFT) -> PiecewiseActivation:
    """Clip to [-1, 1]; kinks at -1 and 1."""
    if approach_side is ApproachSide.LEFT:
        kink_values = {-1.0: 0.0, 1.0: 1.0}
    else:
        kink_values = {-1.0: 1.0, 1.0: 0.0}
    return PiecewiseActivation(
        name="hard_tanh",
        value=lambda x: np.clip(x, -1.0, 1.0),
        offkink_derivative=lambda x: np.where(np.abs(x) < 1, 1.0, 0.0),
        kinks=KinkSet((-1.0, 1.0)),
        kink_values=kink_values,
        approach_side=approach_side,
    )


def softplus() -> PiecewiseActivation:
    """Smooth activation with an empty kink set."""
    return PiecewiseActivation(
        name="softplus",
        value=lambda x: np.logaddexp(0.0, x),
        offkink_derivative=lambda x: 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=np.float64))),
        kinks=KinkSet(()),
        kink_values={},
    )


def _pathological_value(x):
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(divide='ignore', invalid='ignore'):
        return np.where(x > 0, x * np.sin(1.0 / x), 0.0)


def _pathological_derivative(x):
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(divide='ignore', invalid='ignore'):
        return np.where(x > 0, np.sin(1.0 / x) - np.cos(1.0 / x) / x, 0.0)


def pathological() -> PiecewiseActivation:
    """x*sin(1/x) for x > 0, 0 otherwise: continuous, derivative unbounded near 0."""
    return PiecewiseActivation(
        name="pathological",
        value=_pathological_value,
        offkink_derivative=_pathological_derivative,
        kinks=KinkSet((0.0,)),
        kink_values={0.0: 0.0},
        approach_side=ApproachSide.LEFT,
    )


def custom_pwl(breakpoints, kink_values: Optional[dict] = None,
               approach_side: ApproachSide = ApproachSide.LEFT) -> PiecewiseActivation:
    """Piecewise-linear interpolant through ``breakpoints`` [(x, y), ...].

    Extrapolates linearly with the outermost slopes. Every breakpoint is a
    kink; unless given, g takes the slope on the approach side.
    """
    points = sorted((float(px), float(py)) for px, py in breakpoints)
    if len(points) < 2:
        raise ValueError("custom_pwl needs at least two breakpoints")
    xs = np.array([p[0] for p in points])
    ys = np.array([p[1] for p in points])
    if np.any(np.diff(xs) <= 0):
        raise ValueError("custom_pwl breakpoints must have distinct x")
    slopes = np.diff(ys) / np.diff(xs)

    def segment(x):
        return np.clip(np.searchsorted(xs, x, side='right') - 1, 0, len(xs) - 2)

    def value(x):
        x = np.asarray(x, dtype=np.float64)
        idx = segment(x)
        return ys[idx] + slopes[idx] * (x - xs[idx])

    def derivative(x):
        return slopes[segment(np.asarray(x, dtype=np.float64))]

    if kink_values is None:
        left = np.concatenate(([slopes[0]], slopes))
        right = np.concatenate((slopes, [slopes[-1]]))
        chosen = left if approach_side is ApproachSide.LEFT else right
        kink_values = dict(zip(xs.tolist(), chosen.tolist()))
    return PiecewiseActivation(
        name="custom_pwl",
        value=value,
        offkink_derivative=derivative,
        kinks=KinkSet(tuple(xs.tolist())),
        kink_values=kink_values,
        approach_side=approach_side,
        params={'breakpoints': [list(p) for p in points]},
    )


# ==================== Blending functions ====================

def smoothstep() -> BlendingFunction:
    """Cubic smoothstep 3t^2 - 2t^3, clamped outside [0, 1]."""
    def value(t):
        t = np.clip(np.asarray(t, dtype=np.float64), 0.0, 1.0)
        return t * t * (3.0 - 2.0 * t)

    def derivative(t):
        t = np.asarray(t, dtype=np.float64)
        inside = (t > 0) & (t < 1)
        return np.where(inside, 6.0 * t * (1.0 - t), 0.0)

    return BlendingFunction("smoothstep", value, derivative)


def bump() -> BlendingFunction:
    """exp(1 - 1/(1 - (t-1)^2)) on (0, 1), 0 below and 1 above."""
    def value(t):
        t = np.asarray(t, dtype=np.float64)
        u = 1.0 - (t - 1.0) ** 2
        with np.errstate(divide='ignore', over='ignore', invalid='ignore'):
            inner = np.exp(1.0 - 1.0 / u)
        return np.where(t <= 0, 0.0, np.where(t >= 1, 1.0, inner))

    def derivative(t):
        t = np.asarray(t, dtype=np.float64)
        u = 1.0 - (t - 1.0) ** 2
        with np.errstate(divide='ignore', over='ignore', invalid='ignore'):
            inner = np.exp(1.0 - 1.0 / u) * (-2.0 * (t - 1.0)) / (u * u)
        inside = (t > 0) & (t < 1)
        return np.where(inside, np.nan_to_num(inner, nan=0.0, posinf=0.0), 0.0)

    return BlendingFunction("bump", value, derivative)


BLENDING_FUNCTIONS = {
    'smoothstep': smoothstep,
    'bump': bump,
}


def blending_function(name: str) -> BlendingFunction:
    try:
        return BLENDING_FUNCTIONS[name]()
    except KeyError:
        raise ValueError(f"Unknown blending function '{name}'") from None


def check_blending_function(eta: BlendingFunction, grid_points: int = 10_001) -> list[str]:
    """Return the violated blending conditions; empty when eta is admissible."""
    findings = []
    exact = {
        'eta(0) = 0': float(eta.value(0.0)) - 0.0,
        'eta(1) = 1': float(eta.value(1.0)) - 1.0,
        "eta'(0) = 0": float(eta.derivative(0.0)),
        "eta'(1) = 0": float(eta.derivative(1.0)),
    }
    for label, error in exact.items():
        if abs(error) > 1e-12:
            findings.append(f"{eta.name}: {label} violated by {error:.3e}")
    t = np.linspace(0.0, 1.0, grid_points)[1:-1]
    values = eta.value(t)
    if np.any(values < 0) or np.any(values > 1):
        findings.append(f"{eta.name}: values leave [0, 1] on (0, 1)")
    return findings


# ==================== Operations ====================

def generalized_derivative(act: PiecewiseActivation, x):
    """d_g A: the derivative off the kinks, the kink value g at a kink."""
    x_arr = np.asarray(x, dtype=np.float64)
    with np.errstate(all='ignore'):
        result = np.array(act.offkink_derivative(x_arr), dtype=np.float64, copy=True)
    result = np.broadcast_to(result, x_arr.shape).copy()
    if len(act.kinks):
        points = act.kinks.array
        idx = np.clip(np.searchsorted(points, x_arr), 0, len(points) - 1)
        at_kink = points[idx] == x_arr
        result = np.where(at_kink, act.kink_value_array[idx], result)
    return _finish(x, result)


def half_gap(kinks: KinkSet) -> float:
    """delta = min(half the smallest distance between kinks, 1/2)."""
    points = kinks.array
    if len(points) < 2:
        return 0.5
    return 0.5 * min(float(np.min(np.diff(points))), 1.0)


def _nearest(points: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Index of the nearest kink, ties to the left."""
    right = np.clip(np.searchsorted(points, x), 0, len(points) - 1)
    left = np.clip(right - 1, 0, len(points) - 1)
    take_left = np.abs(x - points[left]) <= np.abs(x - points[right])
    return np.where(take_left, left, right)


def nearest_kink_index(kinks: KinkSet, x: float) -> int:
    """Position in ``kinks.points`` of the kink nearest to x, for x within delta of a kink."""
    if not len(kinks):
        raise ZoneError("The kink set is empty")
    delta = half_gap(kinks)
    distances = np.abs(kinks.array - float(x))
    index = int(np.argmin(distances))
    if not distances[index] < delta:
        raise ZoneError(f"x={x} is not within {delta} of any kink")
    return index


def _zones(fam: ApproximantFamily, n: int, x: np.ndarray):
    """Nearest kink, distance and zone masks (outer, inner) for G_n."""
    if n < 1:
        raise ValueError(f"Approximant index must be positive, got {n}")
    points = fam.base.kinks.array
    idx = _nearest(points, x)
    y = points[idx]
    dist = np.abs(x - y)
    outer = dist >= fam.delta / n
    inner = dist <= fam.delta / (2 * n)
    return idx, y, dist, outer, inner


def approximant_value(fam: ApproximantFamily, n: int, x):
    """G_n(x): A outside the kink neighbourhoods, the kink linearization
    g(y)(x - y) + A(y) close to a kink y, and an eta-blend in between."""
    base = fam.base
    x_arr = np.asarray(x, dtype=np.float64)
    if not len(base.kinks):
        return _finish(x, np.asarray(base.value(x_arr), dtype=np.float64))
    idx, y, dist, outer, inner = _zones(fam, n, x_arr)
    with np.errstate(all='ignore'):
        original = base.value(x_arr)
        linear = base.kink_value_array[idx] * (x_arr - y) + base.value(y)
        eta = fam.eta.value((2 * n * dist - fam.delta) / fam.delta)
        blended = (1.0 - eta) * linear + eta * original
    result = np.where(outer, original, np.where(inner, linear, blended))
    return _finish(x, result)


def approximant_derivative(fam: ApproximantFamily, n: int, x):
    """G_n'(x), the exact derivative of approximant_value."""
    base = fam.base
    x_arr = np.asarray(x, dtype=np.float64)
    if not len(base.kinks):
        with np.errstate(all='ignore'):
            return _finish(x, np.asarray(base.offkink_derivative(x_arr), dtype=np.float64))
    idx, y, dist, outer, inner = _zones(fam, n, x_arr)
    g = base.kink_value_array[idx]
    with np.errstate(all='ignore'):
        slope = base.offkink_derivative(x_arr)
        t = (2 * n * dist - fam.delta) / fam.delta
        eta = fam.eta.value(t)
        eta_prime = fam.eta.derivative(t)
        residual = base.value(x_arr) - base.value(y) - g * (x_arr - y)
        blended = ((2 * n / fam.delta) * np.sign(x_arr - y) * eta_prime * residual
                   + (1.0 - eta) * g + slope * eta)
    result = np.where(outer, slope, np.where(inner, g, blended))
    return _finish(x, result)


def validate_approximant_conditions(fam: ApproximantFamily, grid,
                                    n_max: int) -> StabilizationReport:
    """Empirical stabilization index per grid point plus sup bounds over n.

    m(x) is the smallest n with G_k(x) = A(x) and G_k'(x) = d_g A(x) for
    every tested k >= n; points still changing at n_max get index None.
    """
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    base = fam.base
    grid = np.asarray(grid, dtype=np.float64).reshape(-1)
    with np.errstate(all='ignore'):
        target_value = base.value(grid)
    target_derivative = generalized_derivative(base, grid)

    last_mismatch = np.zeros(len(grid), dtype=np.int64)
    value_sup = derivative_sup = 0.0
    for n in range(1, n_max + 1):
        values = approximant_value(fam, n, grid)
        derivatives = approximant_derivative(fam, n, grid)
        matches = (values == target_value) & (derivatives == target_derivative)
        last_mismatch = np.where(matches, last_mismatch, n)
        if len(grid):
            value_sup = max(value_sup, float(np.max(np.abs(values))))
            derivative_sup = max(derivative_sup, float(np.max(np.abs(derivatives))))

    report = StabilizationReport(n_max=n_max, delta=fam.delta,
                                 value_sup=value_sup, derivative_sup=derivative_sup)
    points = base.kinks.array
    for x, mismatch in zip(grid.tolist(), last_mismatch.tolist()):
        index = None if mismatch == n_max else mismatch + 1
        if len(points) == 0:
            predicted = 1
        else:
            distance = float(np.min(np.abs(points - x)))
            predicted = 1 if distance == 0 else max(1, math.ceil(fam.delta / distance))
        report.points.append(PointStabilization(x=x, index=index, predicted=predicted))
        if index is None:
            report.findings.append(f"x={x!r} has not stabilized by n={n_max}")
    return report


def pathological_derivative_probe(k_max: int) -> list[tuple[float, float]]:
    """(x_k, |g'(x_k)|) at x_k = 1/(k*pi) for g(x) = x*sin(1/x); |g'(x_k)| = k*pi."""
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    act = pathological()
    xs = 1.0 / (np.arange(1, k_max + 1) * np.pi)
    magnitudes = np.abs(act.offkink_derivative(xs))
    return list(zip(xs.tolist(), magnitudes.tolist()))


def validate_activation(act: PiecewiseActivation, m: float = 4.0,
                        grid_points: int = 4001) -> ActivationReport:
    """Sampled check of continuity, derivative consistency, one-sided
    continuity of d_g on the stored approach side and local boundedness."""
    findings = []
    points = act.kinks.array

    continuous = True
    for y in points:
        for h in (1e-8, 1e-10, 1e-12):
            with np.errstate(all='ignore'):
                jump = max(abs(float(act.value(y + h)) - float(act.value(y))),
                           abs(float(act.value(y - h)) - float(act.value(y))))
            if not jump <= 1e-6:
                continuous = False
                findings.append(f"{act.name}: value jumps by {jump:.3e} at kink {y}")
                break

    grid = np.linspace(-m, m, grid_points)
    if len(points):
        distance = np.min(np.abs(grid[:, None] - points[None, :]), axis=1)
        grid = grid[distance > 1e-2]
    h = 1e-6
    with np.errstate(all='ignore'):
        fd = (act.value(grid + h) - act.value(grid - h)) / (2 * h)
        slope = act.offkink_derivative(grid)
    mismatch = np.abs(fd - slope) > 1e-4 * np.maximum(1.0, np.abs(slope))
    derivative_consistent = not bool(np.any(mismatch))
    if not derivative_consistent:
        worst = float(grid[np.argmax(np.abs(fd - slope))])
        findings.append(f"{act.name}: derivative disagrees with finite differences near x={worst}")

    z = act.approach_side.sign
    one_sided = True
    steps = 2.0 ** -np.arange(20, 41)
    for y, g in zip(points, act.kink_value_array):
        with np.errstate(all='ignore'):
            gaps = np.abs(generalized_derivative(act, y + z * steps) - g)
        if not np.all(gaps <= 1e-6):
            one_sided = False
            findings.append(
                f"{act.name}: d_g is not continuous from the {act.approach_side.value} at kink {y}"
            )

    probes = [grid]
    approach = np.logspace(-12, 0, 2001)
    for y in points:
        probes.extend([y - approach, y + approach])
    probes = np.concatenate(probes)
    with np.errstate(all='ignore'):
        magnitudes = np.abs(act.offkink_derivative(probes))
    derivative_sup = float(np.max(magnitudes)) if len(magnitudes) else 0.0
    if len(points):
        derivative_sup = max(derivative_sup, float(np.max(np.abs(act.kink_value_array))))
    locally_bounded = bool(np.isfinite(derivative_sup)) and derivative_sup <= LOCAL_BOUND_THRESHOLD
    if not locally_bounded:
        findings.append(
            f"{act.name}: derivative reaches {derivative_sup:.3e} on [-{m}, {m}], not locally bounded"
        )

    report = ActivationReport(
        name=act.name,
        continuous=continuous,
        derivative_consistent=derivative_consistent,
        one_sided_continuous=one_sided,
        locally_bounded=locally_bounded,
        derivative_sup=derivative_sup,
        findings=findings,
    )
    for finding in findings:
        logger.warning(finding)
    return report


ACTIVATIONS = {
    'relu': relu,
    'leaky_relu': leaky_relu,
    'abs': absolute,
    'hard_tanh': hard_tanh,
    'softplus': softplus,
    'pathological': pathological,
    'custom_pwl': custom_pwl,
}
