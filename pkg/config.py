"""
Experiment configuration.

A config starts from a named fixture (optional), is updated from a JSON
file, and finally from command-line flags. ``resolve`` turns it into the
objects the harnesses take.
"""

import dataclasses
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from fixtures import get_fixture, random_theta
from models import Architecture, ConfigError, DimensionError, EmpiricalMeasure
from numerics.activation import ApproximantFamily, PiecewiseActivation, blending_function, relu
from numerics.network import check_theta
from numerics.parallel import thread_count
from numerics.risk import LossFunction, mse_loss
from serialization import (
    activation_from_descriptor, load_measure, load_vector, loss_from_descriptor, measure_from_json
)

FORMATS = ('json', 'csv')


def get_app_dir() -> str:
    """Get the directory the application runs from."""
    if getattr(sys, 'frozen', False):
        return os.path.dirname(sys.executable)
    return os.path.dirname(os.path.abspath(__file__))


def get_results_dir(out_dir: str = "results") -> Path:
    """Get the output folder, creating it if needed. Relative paths are taken from the working directory."""
    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def threads() -> int:
    """GENGRAD_THREADS as a ConfigError-raising check."""
    try:
        return thread_count()
    except ValueError as e:
        raise ConfigError(str(e)) from None


@dataclass
class Experiment:
    """Everything a harness needs, resolved from an ExperimentConfig."""
    arch: Architecture
    activation: PiecewiseActivation
    loss: LossFunction
    measure: EmpiricalMeasure
    theta: np.ndarray
    family: ApproximantFamily
    fixture: Optional[str] = None


@dataclass
class ExperimentConfig:
    fixture: Optional[str] = None
    widths: Optional[list[int]] = None
    activation: Any = None
    loss: Any = None
    dataset: Optional[str] = None
    samples: Optional[list] = None
    theta: Optional[dict] = None
    n_schedule: list[int] = field(default_factory=lambda: [2 ** e for e in range(17)])
    radii: list[float] = field(default_factory=lambda: [1e-4, 1e-6, 1e-8])
    epsilon_schedule: Optional[list[float]] = None
    n_dirs: int = 32
    h: float = 1e-6
    seed: int = 0
    eta: str = "smoothstep"
    delta: Optional[float] = None
    grid: list[float] = field(default_factory=lambda: [-1.0, 1.0, 1e-3])
    n_values: list[int] = field(default_factory=lambda: [1, 4, 16])
    n_pairs: int = 10_000
    ball_radius: float = 1.0
    tolerance: float = 1e-4
    out_dir: str = "results"
    format: str = "json"
    base_dir: Path = field(default_factory=Path.cwd, repr=False, compare=False)

    # ==================== Loading ====================

    @classmethod
    def from_dict(cls, data: dict, base_dir: Optional[Path] = None) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("A config must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)} - {'base_dir'}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"Unknown config fields: {', '.join(unknown)}")
        config = cls(**data)
        if base_dir is not None:
            config.base_dir = Path(base_dir)
        return config

    @classmethod
    def load(cls, path, fixture: Optional[str] = None) -> "ExperimentConfig":
        """Read a JSON config; relative file references are taken from its folder."""
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"Config file not found: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON: {e}") from e
        if fixture is not None and isinstance(data, dict):
            data.setdefault('fixture', fixture)
        return cls.from_dict(data, base_dir=path.parent)

    def with_overrides(self, **overrides) -> "ExperimentConfig":
        """Copy with every non-None override applied."""
        changes = {k: v for k, v in overrides.items() if v is not None}
        return dataclasses.replace(self, **changes)

    def _path(self, name: str) -> Path:
        path = Path(name)
        return path if path.is_absolute() else self.base_dir / path

    # ==================== Validation ====================

    def validate(self) -> "ExperimentConfig":
        """Raise ConfigError on the first invalid field, wrong value types included."""
        try:
            self._check_fields()
        except ConfigError:
            raise
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Invalid field value: {e}") from e
        return self

    def _check_fields(self):
        schedule = list(self.n_schedule)
        if not schedule or any(int(n) != n or n < 1 for n in schedule):
            raise ConfigError(f"n_schedule must be positive integers: {schedule}")
        if any(b <= a for a, b in zip(schedule, schedule[1:])):
            raise ConfigError(f"n_schedule must be strictly increasing: {schedule}")
        radii = list(self.radii)
        if not radii or any(r <= 0 for r in radii) or any(b >= a for a, b in zip(radii, radii[1:])):
            raise ConfigError(f"radii must be positive and strictly decreasing: {radii}")
        if self.epsilon_schedule is not None:
            eps = list(self.epsilon_schedule)
            if not eps or any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
                raise ConfigError(f"epsilon_schedule must be positive and strictly decreasing: {eps}")
        if int(self.n_dirs) != self.n_dirs or self.n_dirs < 1:
            raise ConfigError(f"n_dirs must be an integer of at least 1, got {self.n_dirs!r}")
        if int(self.n_pairs) != self.n_pairs or self.n_pairs < 1:
            raise ConfigError(f"n_pairs must be an integer of at least 1, got {self.n_pairs!r}")
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ConfigError(f"h must be positive, got {self.h}")
        if not self.ball_radius >= 0:
            raise ConfigError(f"ball_radius must be nonnegative, got {self.ball_radius}")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {', '.join(FORMATS)}, got {self.format!r}")
        if len(self.grid) != 3 or not self.grid[2] > 0 or not self.grid[1] >= self.grid[0]:
            raise ConfigError(f"grid must be [start, stop, step] with stop >= start and step > 0: {self.grid}")
        if not self.n_values or any(int(n) != n or n < 1 for n in self.n_values):
            raise ConfigError(f"n_values must be positive integers: {self.n_values}")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ConfigError(f"seed must be a nonnegative integer, got {self.seed!r}")
        if self.dataset is not None and not self._path(self.dataset).is_file():
            raise ConfigError(f"Dataset not found: {self.dataset}")
        if self.theta is not None:
            if not isinstance(self.theta, dict) or len(self.theta) != 1:
                raise ConfigError(f"theta must be one of file/random/fixture/values: {self.theta}")
            if 'file' in self.theta and not self._path(self.theta['file']).is_file():
                raise ConfigError(f"Parameter file not found: {self.theta['file']}")

    def grid_points(self) -> np.ndarray:
        start, stop, step = (float(v) for v in self.grid)
        count = int(round((stop - start) / step)) + 1
        return np.linspace(start, stop, count)

    # ==================== Resolution ====================

    def _theta(self, arch: Architecture, fixture) -> np.ndarray:
        source = self.theta
        if source is None:
            if fixture is not None and fixture.arch == arch:
                return fixture.theta
            return random_theta(arch, self.seed)
        if 'file' in source:
            return load_vector(self._path(source['file']))
        if 'random' in source:
            options = source['random'] or {}
            return random_theta(arch, self.seed, float(options.get('scale', 1.0)))
        if 'fixture' in source:
            return _fixture(source['fixture']).theta
        if 'values' in source:
            return np.asarray(source['values'], dtype=np.float64)
        raise ConfigError(f"Unknown theta source: {source}")

    def resolve(self) -> Experiment:
        self.validate()
        fixture = _fixture(self.fixture) if self.fixture else None

        if self.widths is not None:
            try:
                arch = Architecture(tuple(int(w) for w in self.widths))
            except (TypeError, ValueError) as e:
                raise ConfigError(f"Invalid widths {self.widths}: {e}") from e
        elif fixture is not None:
            arch = fixture.arch
        else:
            raise ConfigError("No architecture: give widths or a fixture")

        if self.activation is not None:
            act = activation_from_descriptor(self.activation)
        else:
            act = fixture.activation if fixture is not None else relu()
        if self.loss is not None:
            loss = loss_from_descriptor(self.loss)
        else:
            loss = fixture.loss if fixture is not None else mse_loss()

        if self.dataset is not None:
            measure = load_measure(self._path(self.dataset))
        elif self.samples is not None:
            measure = measure_from_json(self.samples)
        elif fixture is not None:
            measure = fixture.measure
        else:
            raise ConfigError("No data: give dataset, samples or a fixture")

        try:
            theta = check_theta(self._theta(arch, fixture), arch)
            measure.check_dimensions(arch)
            family = ApproximantFamily(act, eta=blending_function(self.eta), delta=self.delta)
        except (DimensionError, ValueError) as e:
            raise ConfigError(str(e)) from e
        return Experiment(arch=arch, activation=act, loss=loss, measure=measure,
                          theta=theta, family=family, fixture=self.fixture)


def _fixture(name: str):
    try:
        return get_fixture(name)
    except KeyError as e:
        raise ConfigError(e.args[0]) from None
