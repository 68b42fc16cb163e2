import numpy as np
import pytest
from hypothesis import given, seed, settings
from hypothesis import strategies as st

from models import Architecture, DimensionError, EmpiricalMeasure
from numerics.activation import ApproximantFamily, relu
from numerics.risk import (
    LossFunction, loss_growth_probe, mse_loss, ridge_mse_loss, risk, risk_smoothed,
    weighted_mse_loss
)


def test_affine_risk(affine):
    assert risk(affine.theta, affine.arch, affine.measure, affine.loss, affine.activation) == 1.0


def test_zero_mass_measure():
    arch = Architecture((2, 3, 2))
    assert risk(np.ones(17), arch, EmpiricalMeasure(), mse_loss(), relu()) == 0.0


def test_dimension_mismatch(affine):
    measure = EmpiricalMeasure.from_arrays([[1.0, 2.0]], [[0.0]])
    with pytest.raises(DimensionError):
        risk(affine.theta, affine.arch, measure, mse_loss(), relu())


@pytest.mark.parametrize("xs, ys, weights", [
    ([[1.0], [2.0]], [[0.0], [0.0]], [1.0]),
    ([[1.0], [2.0]], [[0.0], [0.0]], [1.0, 1.0, 1.0]),
    ([[1.0], [2.0]], [[0.0]], None),
])
def test_measure_sample_counts_must_agree(xs, ys, weights):
    with pytest.raises(DimensionError):
        EmpiricalMeasure.from_arrays(xs, ys, weights)


def test_measure_from_arrays_keeps_every_weight():
    measure = EmpiricalMeasure.from_arrays([[1.0], [2.0]], [[0.0], [1.0]], [0.5, 2.0])
    assert [s.w for s in measure.samples] == [0.5, 2.0]
    assert measure.total_mass == 2.5


@seed(4)
@settings(max_examples=25, deadline=None)
@given(exponent=st.integers(min_value=-4, max_value=4))
def test_mass_scaling_is_exact_for_powers_of_two(pinned, exponent):
    c = 2.0 ** exponent
    base = risk(pinned.theta, pinned.arch, pinned.measure, pinned.loss, pinned.activation)
    scaled = risk(pinned.theta, pinned.arch, pinned.measure.scaled(c), pinned.loss, pinned.activation)
    assert scaled == c * base


def test_sample_order_only_changes_rounding(pinned):
    base = risk(pinned.theta, pinned.arch, pinned.measure, pinned.loss, pinned.activation)
    permuted = pinned.measure.permuted([2, 0, 1])
    assert risk(pinned.theta, pinned.arch, permuted, pinned.loss, pinned.activation) == pytest.approx(base)


def test_weighted_mse():
    loss = weighted_mse_loss([1.0, 0.0])
    z, y = np.array([2.0, 5.0]), np.array([1.0, 1.0])
    assert loss.value(z, y, np.zeros(3)) == 1.0
    np.testing.assert_array_equal(loss.grad_z(z, y, np.zeros(3)), [2.0, 0.0])
    with pytest.raises(ValueError):
        weighted_mse_loss([-1.0])


def test_ridge_adds_parameter_term(affine):
    plain = risk(affine.theta, affine.arch, affine.measure, mse_loss(), relu())
    ridge = risk(affine.theta, affine.arch, affine.measure, ridge_mse_loss(0.5), relu())
    assert ridge == plain + 0.5 * 1.0
    assert risk(affine.theta, affine.arch, affine.measure, ridge_mse_loss(0.0), relu()) == plain


def test_smoothed_risk_matches_once_stable(pinned_small):
    fam = ApproximantFamily(relu())
    exact = risk(pinned_small.theta, pinned_small.arch, pinned_small.measure, pinned_small.loss, relu())
    for n in (1, 8, 1024):
        assert risk_smoothed(pinned_small.theta, pinned_small.arch, pinned_small.measure,
                             pinned_small.loss, fam, n) == exact
    with pytest.raises(ValueError):
        risk_smoothed(pinned_small.theta, pinned_small.arch, pinned_small.measure,
                      pinned_small.loss, fam, 0)


def test_growth_probe_accepts_mse(pinned):
    report = loss_growth_probe(mse_loss(), pinned.arch, pinned.measure, r=3.0)
    assert not report.flagged
    assert np.isfinite(report.empirical_sup)


def test_growth_probe_flags_double_exponential(affine):
    loss = LossFunction(
        name="expexp",
        value=lambda z, y, theta: float(np.sum(np.exp(np.exp(z)))),
        grad_z=lambda z, y, theta: np.exp(np.exp(z)) * np.exp(z),
        grad_theta=lambda z, y, theta: np.zeros(len(theta)),
    )
    report = loss_growth_probe(loss, affine.arch, affine.measure, r=3.0)
    assert report.flagged
    assert report.findings
