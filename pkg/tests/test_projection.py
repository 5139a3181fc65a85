import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from olcache.core import EPS_FEAS, InputError
from olcache.projection import project_capped_simplex, project_oracle, project_partition


def proj(z, C):
    return project_capped_simplex(z, C).fractions


@pytest.mark.parametrize(
    "z, C, expected",
    [
        ([0.5, 0.5, 0.5], 2, [0.5, 0.5, 0.5]),
        ([1.2, 0.3, 0.1], 1, [0.95, 0.05, 0.0]),
        ([0.5, 0.5, 0.5], 1, [1 / 3, 1 / 3, 1 / 3]),
        ([0.9], 1, [0.9]),
        ([2.0, 0.0], 1, [1.0, 0.0]),
    ],
)
def test_examples_agree_with_oracle(z, C, expected):
    assert np.allclose(project_oracle(z, C).fractions, expected, atol=1e-12)
    assert np.allclose(proj(z, C), expected, atol=1e-12)


def test_partition_sets():
    _, part = project_partition([1.2, 0.3, 0.1], 1)
    assert part.M1 == frozenset()
    assert part.M2 == {0, 1}
    assert part.M3 == {2}
    assert part.rho == pytest.approx(0.5)
    _, part = project_partition([3.0, 0.4, 0.3, 0.2], 1.5)
    assert part.M1 == {0}
    assert part.M1 | part.M2 | part.M3 == set(range(4))


def test_errors():
    with pytest.raises(InputError):
        project_capped_simplex([0.1, np.nan], 1)
    with pytest.raises(InputError):
        project_capped_simplex([0.1, 0.2], 0)
    with pytest.raises(InputError):
        project_oracle(np.zeros(17), 1)


def test_everything_pinned_when_capacity_covers_catalog():
    assert np.array_equal(proj([3.0, 2.0, -1.0], 3), [1.0, 1.0, 0.0])


def _random_instance(rng, n_max=12, one_above=True):
    n = int(rng.integers(1, n_max + 1))
    C = float(rng.integers(1, n + 1))
    z = rng.uniform(-0.5, 1.5, n)
    if one_above:
        z = np.minimum(z, 1.0)
        z[rng.integers(n)] = rng.uniform(-0.5, 1.5)
    return z, C


def test_matches_oracle_random():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        z, C = _random_instance(rng)
        assert np.abs(proj(z, C) - project_oracle(z, C).fractions).max() <= 1e-9


def test_matches_oracle_with_many_coordinates_above_one():
    rng = np.random.default_rng(7)
    for _ in range(500):
        n = int(rng.integers(1, 13))
        C = rng.uniform(0.2, n)
        z = rng.uniform(-1, 3, n)
        assert np.abs(proj(z, C) - project_oracle(z, C).fractions).max() <= 1e-9


vectors = st.integers(1, 30).flatmap(
    lambda n: arrays(np.float64, n, elements=st.floats(-2, 3, allow_nan=False))
)


@st.composite
def instances(draw):
    z = draw(vectors)
    C = draw(st.floats(0.1, float(z.size)))
    return z, C


@settings(max_examples=300, deadline=None)
@given(instances())
def test_feasible_and_idempotent(inst):
    z, C = inst
    y = proj(z, C)
    assert y.min() >= 0 and y.max() <= 1
    assert y.sum() <= C + EPS_FEAS
    assert np.abs(proj(y, C) - y).max() <= 1e-9


@settings(max_examples=300, deadline=None)
@given(instances(), st.integers(0, 2**32 - 1))
def test_non_expansive(inst, seed):
    a, C = inst
    b = a + np.random.default_rng(seed).normal(0, 0.5, a.size)
    assert np.linalg.norm(proj(a, C) - proj(b, C)) <= np.linalg.norm(a - b) + 1e-9


@settings(max_examples=300, deadline=None)
@given(instances())
def test_order_preserved(inst):
    z, C = inst
    y = proj(z, C)
    order = np.argsort(-z, kind="stable")
    assert np.all(np.diff(y[order]) <= 1e-9)


@settings(max_examples=200, deadline=None)
@given(instances(), st.integers(0, 2**32 - 1))
def test_closer_than_random_feasible_points(inst, seed):
    z, C = inst
    rng = np.random.default_rng(seed)
    d = np.linalg.norm(z - proj(z, C))
    for _ in range(20):
        y = rng.random(z.size)
        y *= min(1.0, C / y.sum())
        assert d <= np.linalg.norm(z - y) + 1e-9


@settings(max_examples=200, deadline=None)
@given(instances())
def test_kkt_conditions(inst):
    z, C = inst
    y, part = project_partition(z, C)
    rho = part.rho
    assert rho >= -1e-9
    for n in part.M2:
        assert y[n] == pytest.approx(z[n] - rho / 2, abs=1e-9)
    for n in part.M1:
        assert y[n] == 1.0 and z[n] - rho / 2 >= 1 - 1e-9
    for n in part.M3:
        assert y[n] == 0.0 and z[n] - rho / 2 <= 1e-9
    if rho > 1e-9:
        assert y.sum() == pytest.approx(C, abs=1e-9)
