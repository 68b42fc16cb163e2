import json
import math

import numpy as np
import pytest

from models import ApproachSide, ConfigError, ConvergenceStep, EmpiricalMeasure
from numerics.activation import generalized_derivative
from serialization import (
    activation_descriptor, activation_from_descriptor, format_number, load_measure, load_vector,
    loss_from_descriptor, read_vector_binary, save_measure, to_jsonable, write_csv, write_json,
    write_vector_binary
)


def test_activation_descriptors():
    assert activation_from_descriptor("relu").name == "relu"
    leaky = activation_from_descriptor({'kind': 'leaky_relu', 'gamma': 0.2})
    assert generalized_derivative(leaky, 0.0) == 0.2
    right = activation_from_descriptor({'kind': 'hard_tanh', 'approach_side': 'right'})
    assert right.approach_side is ApproachSide.RIGHT
    pinned = activation_from_descriptor({'kind': 'relu', 'kink_values': {'0': 1.0}})
    assert generalized_derivative(pinned, 0.0) == 1.0
    descriptor = activation_descriptor(leaky)
    assert descriptor['kind'] == 'leaky_relu'
    assert descriptor['approach_side'] == 'left'


@pytest.mark.parametrize("descriptor", [
    {'kind': 'sigmoid'},
    {'kind': 'custom_pwl'},
    {'kind': 'relu', 'approach_side': 'up'},
    {'kind': 'leaky_relu', 'gamma': 'steep'},
])
def test_bad_activation_descriptors(descriptor):
    with pytest.raises(ConfigError):
        activation_from_descriptor(descriptor)


def test_loss_descriptors():
    assert loss_from_descriptor("mse").name == "mse"
    assert loss_from_descriptor({'kind': 'ridge_mse', 'lambda': 0.5}).name == "ridge_mse"
    with pytest.raises(ConfigError):
        loss_from_descriptor({'kind': 'weighted_mse'})
    with pytest.raises(ConfigError):
        loss_from_descriptor({'kind': 'hinge'})


def test_measure_csv(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text("x_0,x_1,y_0,w\n0.5,1.0,2.0,0.25\n-1,0,1,2\n")
    measure = load_measure(path)
    assert len(measure) == 2
    np.testing.assert_array_equal(measure.samples[0].x, [0.5, 1.0])
    assert measure.samples[1].w == 2.0

    out = tmp_path / "copy.csv"
    save_measure(measure, out)
    assert out.read_text().splitlines()[0] == "x_0,x_1,y_0,w"
    copy = load_measure(out)
    np.testing.assert_array_equal(copy.inputs, measure.inputs)
    assert [s.w for s in copy.samples] == [0.25, 2.0]


def test_measure_json_default_weight(tmp_path):
    path = tmp_path / "data.json"
    path.write_text(json.dumps({'samples': [{'x': [1.0], 'y': [2.0]}]}))
    measure = load_measure(path)
    assert measure.total_mass == 1.0


def test_malformed_measure(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x_0,y_0\n1.0,abc\n")
    with pytest.raises(ConfigError):
        load_measure(path)
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_measure(path)


def test_binary_vectors(tmp_path):
    path = tmp_path / "theta.bin"
    write_vector_binary(path, [1.0, -0.5, 2.0 ** -40])
    assert path.stat().st_size == 24
    assert path.read_bytes()[:8] == b"\x00\x00\x00\x00\x00\x00\xf0\x3f"
    np.testing.assert_array_equal(read_vector_binary(path), [1.0, -0.5, 2.0 ** -40])
    path.write_bytes(b'\x00' * 7)
    with pytest.raises(ConfigError):
        read_vector_binary(path)


def test_json_vectors(tmp_path):
    path = tmp_path / "theta.json"
    path.write_text(json.dumps({'theta': [1, 2, 3]}))
    np.testing.assert_array_equal(load_vector(path), [1.0, 2.0, 3.0])


def test_jsonable_reports(tmp_path):
    step = ConvergenceStep(n=4, gradient=np.array([0.1, math.inf]), discrepancy=0.0, risk_gap=math.nan)
    data = to_jsonable(step)
    assert data['gradient'] == [0.1, 'inf']
    assert data['risk_gap'] == 'nan'
    path = tmp_path / "report.json"
    write_json(path, {'step': step, 'side': ApproachSide.LEFT})
    assert json.loads(path.read_text())['side'] == 'left'


def test_csv_numbers(tmp_path):
    assert format_number(0.1) == "0.10000000000000001"
    assert format_number(3) == "3"
    assert format_number(True) == "true"
    path = tmp_path / "table.csv"
    write_csv(path, ['n', 'value'], [[1, 0.5], [2, 0.25]])
    assert path.read_text() == "n,value\n1,0.5\n2,0.25\n"
