import logging
import math

import numpy as np
import pytest

from analysis.convergence import (
    blending_limits, check_schedule, convergence_experiment, doubling_schedule, limits_agree
)
from analysis.finite_difference import fd_gradient, kink_margin, smooth_region_agreement
from analysis.probes import (
    lipschitz_probe, probe_spread, project_ball, sample_ball, uniform_bound_probe
)
from analysis.subgradient import (
    FINAL_GAP_TOLERANCE, layer_lipschitz_constant, left_approach_sequence,
    limiting_subgradient_check, sign_condition
)
from fixtures import get_fixture, random_theta
from models import Architecture, EmpiricalMeasure
from numerics.activation import ApproximantFamily, relu
from numerics.risk import mse_loss


def test_fd_gradient_of_squared_norm():
    grad = fd_gradient(lambda t: float(np.dot(t, t)), [1.0, 2.0], 1e-6)
    np.testing.assert_allclose(grad, [2.0, 4.0], rtol=1e-8)
    np.testing.assert_array_equal(fd_gradient(lambda t: 3.0, [1.0, 2.0]), [0.0, 0.0])
    with pytest.raises(ValueError):
        fd_gradient(lambda t: 0.0, [1.0], 0.0)


def test_smooth_region_agreement_away_from_kinks():
    fixture = get_fixture("smooth-softplus-2-3-2")
    assert smooth_region_agreement(fixture.theta, fixture.arch, fixture.measure,
                                   fixture.loss, fixture.activation) <= 1e-6


def test_smooth_region_warns_on_kink(pinned, caplog):
    with caplog.at_level(logging.WARNING, logger="analysis.finite_difference"):
        smooth_region_agreement(pinned.theta, pinned.arch, pinned.measure, pinned.loss, pinned.activation)
    assert "straddle" in caplog.text


def test_margin_without_hidden_layers(affine):
    assert kink_margin(affine.theta, affine.arch, affine.measure, affine.activation) == math.inf


def test_schedules():
    assert doubling_schedule(3) == [1, 2, 4, 8]
    assert len(doubling_schedule()) == 17
    for bad in ([], [0, 1], [2, 2], [4, 2]):
        with pytest.raises(ValueError):
            check_schedule(bad)


def test_convergence_single_unit():
    arch = Architecture((1, 1, 1))
    measure = EmpiricalMeasure.from_arrays([[0.3]], [[0.0]])
    report = convergence_experiment([1.0, 0.0, 1.0, 0.0], arch, measure, mse_loss(),
                                    ApproximantFamily(relu()), [1, 2, 4, 8])
    assert report.stabilization_index == 2
    assert report.history[0].discrepancy > 0
    for step in report.history[1:]:
        assert step.discrepancy == 0.0
        assert step.risk_gap == 0.0


def test_convergence_on_pinned_units(pinned):
    report = convergence_experiment(pinned.theta, pinned.arch, pinned.measure, pinned.loss,
                                    ApproximantFamily(relu()), doubling_schedule(10))
    assert report.stabilized
    np.testing.assert_array_equal(report.history[-1].gradient, report.limit)
    assert not report.findings


def test_empty_kink_set_stabilizes_immediately():
    fixture = get_fixture("smooth-softplus-2-3-2")
    report = convergence_experiment(fixture.theta, fixture.arch, fixture.measure, fixture.loss,
                                    ApproximantFamily(fixture.activation), [1, 2, 4])
    assert report.stabilization_index == 1


def test_unstabilized_run_is_a_finding():
    arch = Architecture((1, 1, 1))
    measure = EmpiricalMeasure.from_arrays([[1e-6]], [[0.0]])
    report = convergence_experiment([1.0, 0.0, 1.0, 0.0], arch, measure, mse_loss(),
                                    ApproximantFamily(relu()), [1, 2, 4])
    assert report.stabilization_index is None
    assert not report.stabilized
    assert "no stabilization" in report.findings[0]


def test_blending_functions_share_the_limit(pinned):
    reports = blending_limits(pinned.theta, pinned.arch, pinned.measure, pinned.loss,
                              ApproximantFamily(relu()), doubling_schedule(10))
    assert set(reports) == {"smoothstep", "bump"}
    assert limits_agree(reports)


@pytest.mark.parametrize("name", ["pinned-relu-1-2-1", "pinned-relu-2-3-2", "zero-relu-2-3-2"])
def test_witness_on_kinks(name):
    fixture = get_fixture(name)
    witness = limiting_subgradient_check(fixture.theta, fixture.arch, fixture.measure,
                                         fixture.loss, fixture.activation, n_dirs=8)
    assert witness.passed, witness.findings
    assert not witness.degenerate
    assert witness.sign_condition
    assert all(b < a for a, b in zip(witness.distances, witness.distances[1:]))
    assert witness.grad_gaps[-1] <= FINAL_GAP_TOLERANCE


def test_witness_is_degenerate_without_kinks():
    fixture = get_fixture("smooth-softplus-2-3-2")
    witness = limiting_subgradient_check(fixture.theta, fixture.arch, fixture.measure,
                                         fixture.loss, fixture.activation, n_dirs=4)
    assert witness.degenerate
    assert len(witness.sequence) == 1
    assert witness.grad_gaps == [0.0]


def test_witness_rejects_bad_arguments(pinned):
    with pytest.raises(ValueError):
        limiting_subgradient_check(pinned.theta, pinned.arch, pinned.measure, pinned.loss,
                                   pinned.activation, n_dirs=0)
    with pytest.raises(ValueError):
        limiting_subgradient_check(pinned.theta, pinned.arch, pinned.measure, pinned.loss,
                                   pinned.activation, radii=(1e-6, 1e-4))


def test_left_approach_sequence_closeness(pinned):
    box = pinned.measure.bounding_box()
    epsilons = [0.1, 0.01, 0.001]
    sequence = left_approach_sequence(pinned.theta, pinned.arch, box, epsilons, pinned.activation)
    for epsilon, vartheta in zip(epsilons, sequence):
        assert 0 < np.linalg.norm(vartheta - pinned.theta) < epsilon
        assert sign_condition(pinned.theta, vartheta, pinned.arch, pinned.activation, box)
    with pytest.raises(ValueError):
        left_approach_sequence(pinned.theta, pinned.arch, (1.0, 1.0), epsilons, pinned.activation)
    with pytest.raises(ValueError):
        left_approach_sequence(pinned.theta, pinned.arch, box, [0.0], pinned.activation)


def test_layer_lipschitz_constant_is_positive(pinned):
    C = layer_lipschitz_constant(pinned.theta, pinned.arch, pinned.activation, (-1.0, 1.0))
    assert 0 < C < math.inf


def test_sample_ball_stays_inside(rng):
    center = np.array([1.0, -1.0, 0.5])
    points = sample_ball(center, 0.5, 1000, rng)
    assert np.all(np.linalg.norm(points - center, axis=1) <= 0.5 + 1e-12)


def test_project_ball():
    center = np.array([1.0, 0.0])
    np.testing.assert_array_equal(project_ball(center, 2.0, np.array([2.0, 1.0])), [2.0, 1.0])
    np.testing.assert_allclose(project_ball(center, 2.0, np.array([5.0, 0.0])), [3.0, 0.0])


def test_lipschitz_estimate_on_affine_model(affine):
    # sup of ||grad L|| over the unit ball around (1, 0)
    bound = 2 * (1 + math.sqrt(5)) * math.sqrt(5)
    estimate = lipschitz_probe(affine.arch, affine.measure, affine.loss, affine.activation,
                               affine.theta, 1.0, 2000, seed=0)
    assert 0.99 * bound <= estimate <= bound * (1 + 1e-9)
    again = lipschitz_probe(affine.arch, affine.measure, affine.loss, affine.activation,
                            affine.theta, 1.0, 2000, seed=0)
    assert again == estimate
    assert lipschitz_probe(affine.arch, affine.measure, affine.loss, affine.activation,
                           affine.theta, 0.0, 10) == 0.0
    with pytest.raises(ValueError):
        lipschitz_probe(affine.arch, affine.measure, affine.loss, affine.activation, affine.theta, 1.0, 0)


@pytest.mark.parametrize("name", ["affine-1-1", "relu-1-2-1", "relu-2-3-2", "leaky-2-3-2"])
def test_lipschitz_constant_is_stable_across_seeds(name):
    fixture = get_fixture(name)
    first, second = (
        lipschitz_probe(fixture.arch, fixture.measure, fixture.loss, fixture.activation,
                        fixture.theta, 1.0, 10_000, seed=s)
        for s in (0, 1)
    )
    assert math.isfinite(first) and first > 0
    assert probe_spread(first, second) <= 0.1


def test_probe_spread():
    assert probe_spread(0.0, 0.0) == 0.0
    assert probe_spread(10.0, 9.0) == pytest.approx(0.1)


def test_uniform_bound_probe_at_a_point(pinned):
    report = uniform_bound_probe(pinned.arch, ApproximantFamily(relu()), (pinned.theta, 0.0),
                                 [1, 2, 4], measure=pinned.measure, loss=pinned.loss)
    assert report.samples == 1 * len(pinned.measure) * 3
    assert len(report.layers) == 2
    assert report.layers[-1].derivative_sup == 1.0
    assert all(math.isfinite(layer.jacobian_sup) for layer in report.layers)
    assert report.gradient_sup is not None and math.isfinite(report.gradient_sup)


def test_uniform_bound_probe_over_a_box(pinned):
    report = uniform_bound_probe(pinned.arch, ApproximantFamily(relu()), (pinned.theta, 0.5),
                                 [1, 16], samples=4, seed=7)
    assert report.gradient_sup is None
    assert all(math.isfinite(layer.value_sup) for layer in report.layers)
    with pytest.raises(ValueError):
        uniform_bound_probe(pinned.arch, ApproximantFamily(relu()), (pinned.theta, -1.0), [1])


@pytest.mark.parametrize("name", ["affine-1-1", "relu-1-2-1", "relu-2-3-2", "leaky-2-3-2"])
def test_random_parameters_stabilize(name):
    fixture = get_fixture(name)
    fam = ApproximantFamily(fixture.activation)
    for draw in range(20):
        theta = random_theta(fixture.arch, seed=1000 + draw)
        reports = blending_limits(theta, fixture.arch, fixture.measure, fixture.loss, fam,
                                  doubling_schedule(20))
        assert limits_agree(reports)
        assert reports["smoothstep"].stabilization_index <= 2 ** 20


@pytest.mark.parametrize("name", ["relu-1-2-1", "relu-2-3-2", "leaky-2-3-2"])
def test_random_parameters_agree_with_finite_differences(name):
    fixture = get_fixture(name)
    checked = 0
    for draw in range(50):
        theta = random_theta(fixture.arch, seed=2000 + draw)
        margin = kink_margin(theta, fixture.arch, fixture.measure, fixture.activation)
        if margin < 1e-5 * max(1.0, float(np.linalg.norm(theta))):
            continue
        checked += 1
        assert smooth_region_agreement(theta, fixture.arch, fixture.measure, fixture.loss,
                                       fixture.activation) <= 1e-4
    assert checked > 0
