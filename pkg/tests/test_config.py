import json

import numpy as np
import pytest

from config import ExperimentConfig, threads
from models import ConfigError
from serialization import write_vector_binary


def test_fixture_defaults():
    exp = ExperimentConfig(fixture="pinned-relu-2-3-2").resolve()
    assert exp.arch.widths == (2, 3, 2)
    assert exp.family.eta.name == "smoothstep"
    assert exp.family.delta == 0.5
    assert len(exp.measure) == 3


def test_config_file_overrides_fixture(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({
        'fixture': 'relu-1-2-1',
        'activation': {'kind': 'leaky_relu', 'gamma': 0.3},
        'theta': {'values': [1, 0, 1, 0, 1, 1, 0]},
        'n_schedule': [1, 2, 4],
    }))
    config = ExperimentConfig.load(path)
    exp = config.resolve()
    assert exp.activation.name == "leaky_relu"
    np.testing.assert_array_equal(exp.theta, [1, 0, 1, 0, 1, 1, 0])
    assert config.n_schedule == [1, 2, 4]


def test_relative_files_follow_the_config(tmp_path):
    (tmp_path / "data.csv").write_text("x_1,y_1\n0.5,1.0\n")
    write_vector_binary(tmp_path / "theta.bin", [1.0, 0.0])
    path = tmp_path / "run.json"
    path.write_text(json.dumps({'widths': [1, 1], 'dataset': 'data.csv', 'theta': {'file': 'theta.bin'}}))
    exp = ExperimentConfig.load(path).resolve()
    np.testing.assert_array_equal(exp.theta, [1.0, 0.0])
    assert len(exp.measure) == 1


def test_random_theta_follows_the_seed():
    a = ExperimentConfig(widths=[2, 3, 2], fixture="relu-2-3-2", theta={'random': {}}, seed=5).resolve()
    b = ExperimentConfig(widths=[2, 3, 2], fixture="relu-2-3-2", theta={'random': {}}, seed=5).resolve()
    np.testing.assert_array_equal(a.theta, b.theta)


@pytest.mark.parametrize("changes", [
    {'n_dirs': 0},
    {'n_pairs': 0},
    {'n_schedule': [4, 2]},
    {'radii': [1e-6, 1e-4]},
    {'format': 'xml'},
    {'dataset': 'missing.csv'},
    {'grid': [1.0, -1.0, 0.1]},
    {'theta': {'values': [1.0]}},
    {'eta': 'cosine'},
    {'delta': 0.9},
    {'n_dirs': '4'},
    {'n_pairs': 2.5},
    {'n_schedule': 'abc'},
    {'ball_radius': 'one'},
    {'seed': '3'},
])
def test_invalid_configs(changes, tmp_path):
    config = ExperimentConfig(fixture="relu-2-3-2", base_dir=tmp_path).with_overrides(**changes)
    with pytest.raises(ConfigError):
        config.resolve()


def test_unknown_fields_and_fixtures(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({'widthz': [1, 1]})
    with pytest.raises(ConfigError):
        ExperimentConfig(fixture="no-such-fixture").resolve()
    with pytest.raises(ConfigError):
        ExperimentConfig.load(tmp_path / "absent.json")


def test_grid_points():
    points = ExperimentConfig().grid_points()
    assert len(points) == 2001
    assert points[0] == -1.0 and points[-1] == 1.0


def test_thread_setting(monkeypatch):
    assert threads() == 1
    monkeypatch.setenv("GENGRAD_THREADS", "3")
    assert threads() == 3
    monkeypatch.setenv("GENGRAD_THREADS", "zero")
    with pytest.raises(ConfigError):
        threads()
