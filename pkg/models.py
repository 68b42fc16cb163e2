"""
Data models for the generalized-gradient lab.

Plain records shared by the numerics and analysis packages: kink sets,
network architectures, forward traces, empirical measures and the report
types the experiment harnesses return.
"""

import itertools
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np


# Parameter and gradient vectors are flat float64 arrays of length
# Architecture.param_count, laid out as described in numerics.network.
ParamVector = np.ndarray
GradientVector = np.ndarray


class GradientLabError(Exception):
    """Base class for all errors raised by this project."""


class DimensionError(GradientLabError, ValueError):
    """Vector or sample dimensions do not match the architecture."""


class LayoutIndexError(GradientLabError, IndexError):
    """A (layer, row, column) triple lies outside the parameter layout."""


class OracleTooLargeError(GradientLabError, ValueError):
    """The path-sum oracle would enumerate too many index chains."""


class ZoneError(GradientLabError, ValueError):
    """A point lies outside the kink neighbourhood where it was expected."""


class ConfigError(GradientLabError, ValueError):
    """An experiment configuration is invalid or references missing files."""


class ApproachSide(Enum):
    """Side from which the generalized derivative is continuous at the kinks."""
    LEFT = "left"
    RIGHT = "right"

    @property
    def sign(self) -> int:
        """The z in {-1, +1} of the one-sided continuity condition."""
        return -1 if self is ApproachSide.LEFT else 1


@dataclass(frozen=True)
class KinkSet:
    """Finite, strictly increasing set of points where an activation is not C^1."""
    points: tuple[float, ...] = ()

    def __post_init__(self):
        points = tuple(float(p) for p in self.points)
        for p in points:
            if not math.isfinite(p):
                raise ValueError(f"Kink points must be finite, got {p}")
        for left, right in zip(points, points[1:]):
            if not left < right:
                raise ValueError(f"Kink points must be strictly increasing: {points}")
        object.__setattr__(self, 'points', points)

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __contains__(self, x) -> bool:
        return float(x) in self.points

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.points, dtype=np.float64)


@dataclass(frozen=True)
class Architecture:
    """Layer widths (l_0, ..., l_L) of a fully connected feedforward network."""
    widths: tuple[int, ...]

    def __post_init__(self):
        widths = tuple(int(w) for w in self.widths)
        if len(widths) < 2:
            raise ValueError("An architecture needs an input and at least one layer")
        if any(w < 1 for w in widths):
            raise ValueError(f"Layer widths must be positive: {widths}")
        object.__setattr__(self, 'widths', widths)

    @property
    def depth(self) -> int:
        """Number of affine layers L."""
        return len(self.widths) - 1

    @property
    def input_dim(self) -> int:
        return self.widths[0]

    @property
    def output_dim(self) -> int:
        return self.widths[-1]

    @property
    def offsets(self) -> tuple[int, ...]:
        """Cumulative parameter counts d_0 = 0, d_1, ..., d_L."""
        offsets = [0]
        for k in range(1, len(self.widths)):
            offsets.append(offsets[-1] + self.widths[k] * (self.widths[k - 1] + 1))
        return tuple(offsets)

    @property
    def param_count(self) -> int:
        return sum(self.widths[k] * (self.widths[k - 1] + 1)
                   for k in range(1, len(self.widths)))

    def __str__(self):
        return "-".join(str(w) for w in self.widths)


@dataclass(frozen=True, eq=False)
class ForwardTrace:
    """Pre-activations of every layer for one input.

    ``preacts[k - 1]`` holds the layer-k pre-activations (k = 1..L) and
    ``activations[k - 1]`` the post-activation values of hidden layer k
    (k = 1..L-1). The output layer has no activation applied.
    """
    input: np.ndarray
    preacts: tuple[np.ndarray, ...]
    activations: tuple[np.ndarray, ...]

    @property
    def output(self) -> np.ndarray:
        return self.preacts[-1]

    def layer_input(self, k: int) -> np.ndarray:
        """The vector multiplied by the layer-k weights."""
        return self.input if k == 1 else self.activations[k - 2]


@dataclass(frozen=True, eq=False)
class Sample:
    """One Dirac mass of an empirical measure."""
    x: np.ndarray
    y: np.ndarray
    w: float = 1.0

    def __post_init__(self):
        x = np.array(self.x, dtype=np.float64).reshape(-1)
        y = np.array(self.y, dtype=np.float64).reshape(-1)
        w = float(self.w)
        if not (w >= 0 and math.isfinite(w)):
            raise ValueError(f"Sample mass must be finite and nonnegative, got {w}")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, 'x', x)
        object.__setattr__(self, 'y', y)
        object.__setattr__(self, 'w', w)


@dataclass(frozen=True)
class EmpiricalMeasure:
    """A finite weighted sum of Dirac masses on input/output pairs."""
    samples: tuple[Sample, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'samples', tuple(self.samples))

    @classmethod
    def from_arrays(cls, xs, ys, weights=None) -> "EmpiricalMeasure":
        xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
        ys = np.atleast_2d(np.asarray(ys, dtype=np.float64))
        weights = np.ones(len(xs)) if weights is None else np.atleast_1d(np.asarray(weights, dtype=np.float64))
        if not len(xs) == len(ys) == len(weights):
            raise DimensionError(
                f"Sample counts differ: {len(xs)} inputs, {len(ys)} targets, {len(weights)} weights"
            )
        return cls(tuple(Sample(x, y, w) for x, y, w in zip(xs, ys, weights)))

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def total_mass(self) -> float:
        return math.fsum(s.w for s in self.samples)

    @property
    def inputs(self) -> np.ndarray:
        return np.array([s.x for s in self.samples], dtype=np.float64)

    def check_dimensions(self, arch: Architecture):
        """Raise DimensionError unless every sample fits the architecture."""
        for index, s in enumerate(self.samples):
            if len(s.x) != arch.input_dim or len(s.y) != arch.output_dim:
                raise DimensionError(
                    f"Sample {index} has shape x={len(s.x)}, y={len(s.y)}; "
                    f"architecture {arch} expects x={arch.input_dim}, y={arch.output_dim}"
                )

    def bounding_box(self) -> tuple[float, float]:
        """Interval [a, b] with every input coordinate inside [a, b], a < b."""
        if not self.samples:
            return (-1.0, 1.0)
        coords = np.concatenate([s.x for s in self.samples])
        a, b = float(coords.min()), float(coords.max())
        if a == b:
            a, b = a - 1.0, b + 1.0
        return (a, b)

    def scaled(self, c: float) -> "EmpiricalMeasure":
        return EmpiricalMeasure(tuple(Sample(s.x, s.y, s.w * c) for s in self.samples))

    def permuted(self, order) -> "EmpiricalMeasure":
        return EmpiricalMeasure(tuple(self.samples[i] for i in order))


def box_corners(a: float, b: float, dim: int, limit: int = 1024) -> np.ndarray:
    """Corners of [a, b]^dim, at most ``limit`` of them."""
    corners = itertools.islice(itertools.product((a, b), repeat=dim), limit)
    return np.array(list(corners), dtype=np.float64)


# ==================== Reports ====================

@dataclass
class ActivationReport:
    """Sampled checks of the activation hypotheses."""
    name: str
    continuous: bool
    derivative_consistent: bool
    one_sided_continuous: bool
    locally_bounded: bool
    derivative_sup: float
    findings: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return (self.continuous and self.derivative_consistent
                and self.one_sided_continuous and self.locally_bounded)


@dataclass
class PointStabilization:
    """Empirical stabilization index of the approximants at one grid point."""
    x: float
    index: Optional[int]
    predicted: Optional[int] = None


@dataclass
class StabilizationReport:
    n_max: int
    delta: float
    points: list[PointStabilization] = field(default_factory=list)
    value_sup: float = 0.0
    derivative_sup: float = 0.0
    findings: list[str] = field(default_factory=list)

    @property
    def unstable(self) -> list[float]:
        return [p.x for p in self.points if p.index is None]

    @property
    def passed(self) -> bool:
        return not self.unstable

    def index_at(self, x: float) -> Optional[int]:
        for p in self.points:
            if p.x == x:
                return p.index
        raise KeyError(x)


@dataclass
class GrowthReport:
    """Empirical sup of the loss growth quotient over a box."""
    radius: float
    empirical_sup: float
    threshold: float
    flagged: bool
    findings: list[str] = field(default_factory=list)


@dataclass
class ConvergenceStep:
    n: int
    gradient: np.ndarray
    discrepancy: float
    risk_gap: float


@dataclass
class ConvergenceReport:
    theta: np.ndarray
    history: list[ConvergenceStep]
    stabilization_index: Optional[int]
    limit: np.ndarray
    findings: list[str] = field(default_factory=list)

    @property
    def stabilized(self) -> bool:
        return self.stabilization_index is not None


@dataclass
class SubgradientWitness:
    """Parameter sequence approaching theta along which G converges."""
    theta: np.ndarray
    sequence: list[np.ndarray]
    grads: list[np.ndarray]
    distances: list[float]
    grad_gaps: list[float]
    frechet_quotients: list[float]
    quotient_tolerances: list[float]
    fd_errors: list[float]
    derivative_gaps: list[float]
    sign_condition: bool
    degenerate: bool
    seed: int
    findings: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.findings


@dataclass
class LayerBounds:
    layer: int
    preact_sup: float
    value_sup: float
    derivative_sup: float
    jacobian_sup: float


@dataclass
class UniformBoundReport:
    layers: list[LayerBounds]
    gradient_sup: Optional[float] = None
    samples: int = 0
    seed: int = 0
