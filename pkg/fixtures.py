"""
Named experiment fixtures.

Small hand-checkable networks with their data, used by the command line
as starting configurations and by the tests as known cases.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from models import Architecture, EmpiricalMeasure
from numerics.activation import PiecewiseActivation, leaky_relu, relu, softplus
from numerics.risk import LossFunction, mse_loss


@dataclass(frozen=True)
class Fixture:
    """An architecture, activation, loss, data set and parameter vector."""
    name: str
    arch: Architecture
    activation: PiecewiseActivation
    loss: LossFunction
    measure: EmpiricalMeasure
    theta: np.ndarray
    description: str = ""
    pinned: bool = False  # some hidden pre-activation sits exactly on a kink
    descriptor: dict = field(default_factory=dict)


def random_theta(arch: Architecture, seed: int, scale: float = 1.0) -> np.ndarray:
    """Uniform draw from [-scale, scale]^d."""
    rng = np.random.default_rng(seed)
    return rng.uniform(-scale, scale, size=arch.param_count)


def _measure_1d() -> EmpiricalMeasure:
    return EmpiricalMeasure.from_arrays(
        [[0.5], [1.5], [-1.0]],
        [[0.2], [1.0], [-0.3]],
    )


def _measure_2d() -> EmpiricalMeasure:
    return EmpiricalMeasure.from_arrays(
        [[0.5, 0.5], [1.5, 0.5], [-0.5, 1.0]],
        [[0.3, -0.1], [1.0, 0.5], [-0.2, 0.4]],
    )


# Hidden unit 1 is 2x - 1, zero at x = 0.5; hidden unit 2 is x + 1, zero at x = -1.
PINNED_1_2_1 = [2.0, 1.0, -1.0, 1.0, 1.0, -0.5, 0.25]

# Hidden unit 1 is x1 + x2 - 1, zero at (0.5, 0.5).
PINNED_2_3_2 = [
    1.0, 1.0, 1.0, -1.0, -1.0, 0.5,
    -1.0, 0.5, 2.0,
    0.5, -1.0, 0.25, 1.0, 0.5, -0.5,
    0.1, -0.2,
]


def _affine_1_1() -> Fixture:
    return Fixture(
        name="affine-1-1",
        arch=Architecture((1, 1)),
        activation=relu(),
        loss=mse_loss(),
        measure=EmpiricalMeasure.from_arrays([[2.0]], [[1.0]]),
        theta=np.array([1.0, 0.0]),
        description="single affine layer, G = (4, 2) by hand",
        descriptor={'kind': 'relu'},
    )


def _relu_1_2_1() -> Fixture:
    arch = Architecture((1, 2, 1))
    return Fixture("relu-1-2-1", arch, relu(), mse_loss(), _measure_1d(),
                   random_theta(arch, seed=1), "seeded random parameters",
                   descriptor={'kind': 'relu'})


def _relu_2_3_2() -> Fixture:
    arch = Architecture((2, 3, 2))
    return Fixture("relu-2-3-2", arch, relu(), mse_loss(), _measure_2d(),
                   random_theta(arch, seed=2), "seeded random parameters",
                   descriptor={'kind': 'relu'})


def _leaky_2_3_2() -> Fixture:
    arch = Architecture((2, 3, 2))
    return Fixture("leaky-2-3-2", arch, leaky_relu(0.1), mse_loss(), _measure_2d(),
                   random_theta(arch, seed=3), "leaky ReLU, slope 0.1 below the kink",
                   descriptor={'kind': 'leaky_relu', 'gamma': 0.1})


def _softplus_2_3_2() -> Fixture:
    arch = Architecture((2, 3, 2))
    return Fixture("smooth-softplus-2-3-2", arch, softplus(), mse_loss(), _measure_2d(),
                   random_theta(arch, seed=4), "smooth activation, empty kink set",
                   descriptor={'kind': 'softplus'})


def _pinned_relu_1_2_1() -> Fixture:
    return Fixture("pinned-relu-1-2-1", Architecture((1, 2, 1)), relu(), mse_loss(),
                   _measure_1d(), np.array(PINNED_1_2_1),
                   "both hidden units hit the kink at one sample each", pinned=True,
                   descriptor={'kind': 'relu'})


def _pinned_relu_2_3_2() -> Fixture:
    return Fixture("pinned-relu-2-3-2", Architecture((2, 3, 2)), relu(), mse_loss(),
                   _measure_2d(), np.array(PINNED_2_3_2),
                   "hidden unit 1 hits the kink at the first sample", pinned=True,
                   descriptor={'kind': 'relu'})


def _zero_relu_2_3_2() -> Fixture:
    arch = Architecture((2, 3, 2))
    return Fixture("zero-relu-2-3-2", arch, relu(), mse_loss(), _measure_2d(),
                   np.zeros(arch.param_count), "all-zero parameters, every unit on the kink",
                   pinned=True, descriptor={'kind': 'relu'})


def _wrong_sign_relu_1_2_1() -> Fixture:
    return Fixture("wrong-sign-relu-1-2-1", Architecture((1, 2, 1)),
                   relu().with_kink_values({0.0: -1.0}), mse_loss(), _measure_1d(),
                   np.array(PINNED_1_2_1),
                   "negative control: g(0) = -1 matches neither one-sided derivative",
                   pinned=True, descriptor={'kind': 'relu', 'kink_values': {'0': -1.0}})


FIXTURES: dict[str, Callable[[], Fixture]] = {
    'affine-1-1': _affine_1_1,
    'relu-1-2-1': _relu_1_2_1,
    'relu-2-3-2': _relu_2_3_2,
    'leaky-2-3-2': _leaky_2_3_2,
    'smooth-softplus-2-3-2': _softplus_2_3_2,
    'pinned-relu-1-2-1': _pinned_relu_1_2_1,
    'pinned-relu-2-3-2': _pinned_relu_2_3_2,
    'zero-relu-2-3-2': _zero_relu_2_3_2,
    'wrong-sign-relu-1-2-1': _wrong_sign_relu_1_2_1,
}


def list_fixtures() -> list[str]:
    return list(FIXTURES)


def get_fixture(name: str) -> Fixture:
    """Build a fresh fixture by name; raises KeyError for unknown names."""
    try:
        return FIXTURES[name]()
    except KeyError:
        raise KeyError(f"Unknown fixture '{name}'; choose from {', '.join(FIXTURES)}") from None
