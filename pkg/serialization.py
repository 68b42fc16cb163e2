"""
Reading and writing experiment inputs and reports.

- Activation and loss descriptors (JSON objects with a ``kind``)
- Data sets as JSON or CSV (columns x_1..x_p, y_1..y_q, w)
- Parameter and gradient vectors as JSON arrays or raw little-endian float64
- Reports as JSON (shortest round-trip float repr) and CSV (17 significant digits)
"""

import csv
import dataclasses
import json
import math
import struct
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Union

import numpy as np

from models import ApproachSide, ConfigError, EmpiricalMeasure, Sample
from numerics.activation import (
    ACTIVATIONS, PiecewiseActivation, absolute, custom_pwl, hard_tanh, leaky_relu
)
from numerics.risk import LOSSES, LossFunction

PathLike = Union[str, Path]


# ==================== Descriptors ====================

def _approach_side(value) -> ApproachSide:
    try:
        return ApproachSide(str(value).lower())
    except ValueError:
        raise ConfigError(f"approach_side must be 'left' or 'right', got {value!r}") from None


def activation_from_descriptor(descriptor: Union[str, dict]) -> PiecewiseActivation:
    """
    Build an activation from ``"relu"`` or ``{"kind": ..., ...}``.

    Recognised keys: gamma (leaky_relu), kink_value (abs), breakpoints
    (custom_pwl), approach_side, and kink_values overrides keyed by the
    kink as a string.
    """
    if isinstance(descriptor, str):
        descriptor = {'kind': descriptor}
    descriptor = dict(descriptor)
    kind = descriptor.get('kind')
    if kind not in ACTIVATIONS:
        raise ConfigError(f"Unknown activation '{kind}'; choose from {', '.join(ACTIVATIONS)}")
    side = descriptor.get('approach_side')
    side = _approach_side(side) if side is not None else None

    try:
        if kind == 'leaky_relu':
            act = leaky_relu(descriptor.get('gamma', 0.01))
        elif kind == 'abs':
            act = absolute(float(descriptor.get('kink_value', -1.0)), side)
        elif kind == 'hard_tanh':
            act = hard_tanh(side or ApproachSide.LEFT)
        elif kind == 'custom_pwl':
            if 'breakpoints' not in descriptor:
                raise ConfigError("custom_pwl needs 'breakpoints'")
            act = custom_pwl(descriptor['breakpoints'], approach_side=side or ApproachSide.LEFT)
        else:
            act = ACTIVATIONS[kind]()
        if side is not None and act.approach_side is not side:
            act = act.with_approach_side(side)
        overrides = descriptor.get('kink_values')
        if overrides:
            act = act.with_kink_values({float(k): float(v) for k, v in overrides.items()})
    except (TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"Invalid activation descriptor {descriptor}: {e}") from e
    return act


def activation_descriptor(act: PiecewiseActivation) -> dict:
    descriptor = {'kind': act.name, **act.params}
    descriptor['approach_side'] = act.approach_side.value
    descriptor['kink_values'] = {repr(k): v for k, v in act.kink_values.items()}
    return descriptor


def loss_from_descriptor(descriptor: Union[str, dict]) -> LossFunction:
    """``"mse"``, ``{"kind": "weighted_mse", "weights": [...]}`` or ``{"kind": "ridge_mse", "lambda": l}``."""
    if isinstance(descriptor, str):
        descriptor = {'kind': descriptor}
    kind = descriptor.get('kind', 'mse')
    try:
        if kind == 'mse':
            return LOSSES['mse']()
        if kind == 'weighted_mse':
            return LOSSES['weighted_mse'](descriptor['weights'])
        if kind == 'ridge_mse':
            return LOSSES['ridge_mse'](descriptor.get('lambda', 0.0))
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"Invalid loss descriptor {descriptor}: {e}") from e
    raise ConfigError(f"Unknown loss '{kind}'; choose from {', '.join(LOSSES)}")


def loss_descriptor(loss: LossFunction) -> dict:
    return {'kind': loss.name, **loss.params}


# ==================== Data sets ====================

def measure_from_json(data: Any) -> EmpiricalMeasure:
    """From ``{"samples": [{"x": [...], "y": [...], "w": 1.0}, ...]}`` or the bare list."""
    records = data.get('samples', []) if isinstance(data, dict) else data
    try:
        return EmpiricalMeasure(tuple(
            Sample(record['x'], record['y'], record.get('w', 1.0)) for record in records
        ))
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"Malformed sample list: {e}") from e


def measure_to_json(measure: EmpiricalMeasure) -> dict:
    return {'samples': [
        {'x': s.x.tolist(), 'y': s.y.tolist(), 'w': s.w} for s in measure.samples
    ]}


def _read_measure_csv(path: Path) -> EmpiricalMeasure:
    with open(path, newline='') as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None:
            return EmpiricalMeasure()
        x_cols = [i for i, name in enumerate(header) if name.startswith('x')]
        y_cols = [i for i, name in enumerate(header) if name.startswith('y')]
        w_col = header.index('w') if 'w' in header else None
        if not x_cols or not y_cols:
            raise ConfigError(f"{path}: header needs x_* and y_* columns, got {header}")
        samples = []
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                samples.append(Sample(
                    [float(row[i]) for i in x_cols],
                    [float(row[i]) for i in y_cols],
                    float(row[w_col]) if w_col is not None else 1.0,
                ))
            except (IndexError, ValueError) as e:
                raise ConfigError(f"{path}:{line}: {e}") from e
    return EmpiricalMeasure(tuple(samples))


def load_measure(path: PathLike) -> EmpiricalMeasure:
    path = Path(path)
    if path.suffix.lower() == '.csv':
        return _read_measure_csv(path)
    return measure_from_json(_read_json(path))


def save_measure(measure: EmpiricalMeasure, path: PathLike):
    path = Path(path)
    if path.suffix.lower() != '.csv':
        write_json(path, measure_to_json(measure))
        return
    p = len(measure.samples[0].x) if len(measure) else 0
    q = len(measure.samples[0].y) if len(measure) else 0
    header = [f"x_{i}" for i in range(p)] + [f"y_{i}" for i in range(q)] + ['w']
    rows = [[*s.x.tolist(), *s.y.tolist(), s.w] for s in measure.samples]
    write_csv(path, header, rows)


# ==================== Vectors ====================

def write_vector_binary(path: PathLike, vector) -> None:
    """
    Raw little-endian float64 values, no header.
    """
    values = np.asarray(vector, dtype=np.float64).reshape(-1)
    Path(path).write_bytes(struct.pack(f'<{len(values)}d', *values.tolist()))


def read_vector_binary(path: PathLike) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) % 8:
        raise ConfigError(f"{path}: {len(data)} bytes is not a whole number of float64 values")
    return np.array(struct.unpack(f'<{len(data) // 8}d', data), dtype=np.float64)


def load_vector(path: PathLike) -> np.ndarray:
    """A vector from ``.bin`` (raw float64) or JSON (array, or object with ``theta``)."""
    path = Path(path)
    if path.suffix.lower() == '.bin':
        return read_vector_binary(path)
    data = _read_json(path)
    if isinstance(data, dict):
        data = data.get('theta')
    try:
        return np.array(data, dtype=np.float64).reshape(-1)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{path}: not a numeric vector: {e}") from e


# ==================== Reports ====================

def _float(value: float) -> Union[float, str]:
    return value if math.isfinite(value) else repr(value)


def to_jsonable(obj: Any) -> Any:
    """Dataclasses, numpy values and enums as plain JSON types; inf and nan become strings."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        result = {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
        for name in ('passed', 'stabilized', 'unstable'):
            if hasattr(type(obj), name) and isinstance(getattr(type(obj), name), property):
                result[name] = to_jsonable(getattr(obj, name))
        return result
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _float(float(obj))
    return obj


def _read_json(path: Path) -> Any:
    try:
        with open(path) as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON: {e}") from e


def write_json(path: PathLike, obj: Any):
    Path(path).write_text(json.dumps(to_jsonable(obj), indent=2) + "\n")


def format_number(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), '.17g')
    return str(value)


def write_csv(path: PathLike, header: list[str], rows: Iterable[Iterable]):
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_number(v) for v in row])
