import numpy as np
import pytest
from hypothesis import given, seed, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fixtures import get_fixture
from models import Architecture, DimensionError, LayoutIndexError
from numerics.activation import ApproximantFamily, leaky_relu, relu
from numerics.network import (
    bias, bias_index, flatten, forward, forward_approx, forward_batch, unflatten,
    verify_trace, weight, weight_index
)

widths = st.lists(st.integers(min_value=1, max_value=4), min_size=2, max_size=4)


def test_param_count_and_offsets():
    arch = Architecture((2, 3, 2))
    assert arch.param_count == 17
    assert arch.offsets == (0, 9, 17)
    assert arch.depth == 2
    assert str(arch) == "2-3-2"


def test_layout_positions():
    arch = Architecture((2, 3, 2))
    assert weight_index(arch, 1, 1, 1) == 1
    assert weight_index(arch, 1, 3, 2) == 6
    assert bias_index(arch, 1, 1) == 7
    assert bias_index(arch, 1, 3) == 9
    assert weight_index(arch, 2, 1, 1) == 10
    assert bias_index(arch, 2, 2) == 17


def test_layout_rejects_out_of_range():
    arch = Architecture((2, 3, 2))
    with pytest.raises(LayoutIndexError):
        weight_index(arch, 3, 1, 1)
    with pytest.raises(LayoutIndexError):
        weight_index(arch, 1, 1, 3)
    with pytest.raises(LayoutIndexError):
        bias_index(arch, 2, 3)


@seed(1)
@settings(max_examples=50, deadline=None)
@given(widths=widths)
def test_layout_is_a_bijection(widths):
    arch = Architecture(tuple(widths))
    positions = []
    for k in range(1, arch.depth + 1):
        for i in range(1, arch.widths[k] + 1):
            for j in range(1, arch.widths[k - 1] + 1):
                positions.append(weight_index(arch, k, i, j))
            positions.append(bias_index(arch, k, i))
    assert sorted(positions) == list(range(1, arch.param_count + 1))


def test_accessors_read_flat_positions():
    arch = Architecture((2, 3, 2))
    theta = np.arange(1.0, 18.0)
    assert weight(theta, arch, 1, 2, 1) == 3.0
    assert bias(theta, arch, 2, 1) == 16.0
    with pytest.raises(DimensionError):
        weight(theta[:-1], arch, 1, 1, 1)


def test_unflatten_flatten():
    arch = Architecture((2, 3, 2))
    theta = np.arange(1.0, 18.0)
    layers = unflatten(theta, arch)
    W1, b1 = layers[0]
    np.testing.assert_array_equal(W1, [[1, 2], [3, 4], [5, 6]])
    np.testing.assert_array_equal(b1, [7, 8, 9])
    np.testing.assert_array_equal(flatten(layers, arch), theta)


def test_affine_network():
    arch = Architecture((1, 1))
    trace = forward([1.0, 0.0], arch, [2.0], relu())
    np.testing.assert_array_equal(trace.output, [2.0])
    assert trace.activations == ()


def test_relu_forward_by_hand(pinned_small):
    trace = forward(pinned_small.theta, pinned_small.arch, [1.5], relu())
    np.testing.assert_array_equal(trace.preacts[0], [2.0, 2.5])
    np.testing.assert_array_equal(trace.activations[0], [2.0, 2.5])
    np.testing.assert_array_equal(trace.output, [2.0 - 1.25 + 0.25])


def test_forward_rejects_wrong_input():
    arch = Architecture((2, 3, 2))
    with pytest.raises(DimensionError):
        forward(np.zeros(17), arch, [1.0], relu())


def test_forward_approx_far_from_kinks_matches_forward(pinned):
    fam = ApproximantFamily(relu())
    x = [1.5, 0.5]
    exact = forward(pinned.theta, pinned.arch, x, relu())
    smoothed = forward_approx(pinned.theta, pinned.arch, x, fam, 64)
    np.testing.assert_array_equal(exact.output, smoothed.output)


def _same_trace(a, b) -> bool:
    return (all(np.array_equal(p, q) for p, q in zip(a.preacts, b.preacts))
            and all(np.array_equal(p, q) for p, q in zip(a.activations, b.activations)))


def _equal_from(theta, arch, x, act, schedule):
    """Per schedule entry, whether the approximated trace is bit-equal to forward."""
    fam = ApproximantFamily(act)
    exact = forward(theta, arch, x, act)
    return [_same_trace(forward_approx(theta, arch, x, fam, n), exact) for n in schedule]


@pytest.mark.parametrize("shape, act", [
    ((1, 2, 1), relu()),
    ((2, 3, 2), relu()),
    ((2, 2, 2, 1), relu()),
    ((2, 3, 2), leaky_relu(0.1)),
])
def test_forward_approx_stabilizes_for_random_inputs(shape, act):
    arch = Architecture(shape)
    schedule = [2 ** e for e in range(21)]
    rng = np.random.default_rng(31)
    for _ in range(100):
        theta = rng.uniform(-1, 1, arch.param_count)
        x = rng.uniform(-1, 1, arch.input_dim)
        equal = _equal_from(theta, arch, x, act, schedule)
        assert any(equal)
        assert all(equal[equal.index(True):])


@pytest.mark.parametrize("name", ["pinned-relu-1-2-1", "pinned-relu-2-3-2", "zero-relu-2-3-2"])
def test_forward_approx_trace_with_units_on_the_kink(name):
    fixture = get_fixture(name)
    schedule = [2 ** e for e in range(21)]
    on_kink = 0
    for sample in fixture.measure.samples:
        exact = forward(fixture.theta, fixture.arch, sample.x, fixture.activation)
        on_kink += sum(int(np.count_nonzero(pre == 0.0)) for pre in exact.preacts[:-1])
        equal = _equal_from(fixture.theta, fixture.arch, sample.x, fixture.activation, schedule)
        assert any(equal)
        assert all(equal[equal.index(True):])
    assert on_kink > 0


@seed(2)
@settings(max_examples=30, deadline=None)
@given(theta=arrays(np.float64, (17,), elements=st.floats(-3, 3)),
       xs=arrays(np.float64, (5, 2), elements=st.floats(-3, 3)))
def test_batch_matches_single_forward(theta, xs):
    arch = Architecture((2, 3, 2))
    batch = forward_batch(theta, arch, xs, relu())
    for row, x in enumerate(xs):
        trace = forward(theta, arch, x, relu())
        for k in range(arch.depth):
            np.testing.assert_array_equal(batch[k][row], trace.preacts[k])
        assert verify_trace(trace, theta, arch)
