import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ensemble_oc.exceptions import InputError
from ensemble_oc.spaces import SpaceDescriptor, distance, sequence_distance


@pytest.mark.parametrize("p, a, b, expected", [
    (2, (0, 0), (0, 0), 0.0),
    (2, (3, 0), (0, 4), 5.0),
    (1, (1, 2), (-1, 0), 4.0),
    ("inf", (1, 2), (-1, 0), 2.0),
])
def test_distance_examples(p, a, b, expected):
    assert distance(SpaceDescriptor(2, p), a, b) == expected


def test_dimension_mismatch_rejected():
    with pytest.raises(InputError):
        distance(SpaceDescriptor(2), [1.0, 2.0, 3.0], [0.0, 0.0])


def test_bad_norm_order_rejected():
    with pytest.raises(InputError):
        SpaceDescriptor(2, 0.5)
    with pytest.raises(InputError):
        SpaceDescriptor(0)


def test_batched_distance_is_rowwise():
    space = SpaceDescriptor(2)
    a = np.array([[3.0, 0.0], [1.0, 1.0]])
    b = np.array([[0.0, 4.0], [1.0, 1.0]])
    np.testing.assert_array_equal(distance(space, a, b), [5.0, 0.0])


def test_sequence_distance_is_max_over_steps():
    space = SpaceDescriptor(1)
    assert sequence_distance(space, [[0.0], [1.0]], [[0.5], [-1.0]]) == 2.0


@pytest.mark.parametrize("p", [1.0, 2.0, 3.0, "inf"])
def test_metric_axioms(p):
    rng = np.random.default_rng(1)
    space = SpaceDescriptor(3, p)
    a, b, c = (rng.normal(size=(1000, 3)) * rng.uniform(0.01, 100, size=(1000, 1)) for _ in range(3))
    dab, dba = distance(space, a, b), distance(space, b, a)
    dac, dcb = distance(space, a, c), distance(space, c, b)
    assert np.all(dab >= 0)
    np.testing.assert_array_equal(distance(space, a, a), 0.0)
    np.testing.assert_allclose(dab, dba, rtol=1e-12)
    assert np.all(dab <= (dac + dcb) * (1 + 1e-12))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=2),
       st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=2))
def test_euclidean_distance_matches_hypot(a, b):
    d = distance(SpaceDescriptor(2), a, b)
    assert d == pytest.approx(np.hypot(a[0] - b[0], a[1] - b[1]), rel=1e-12, abs=1e-300)
