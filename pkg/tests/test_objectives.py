import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wbsubgrad.errors import ConfigurationError
from wbsubgrad.objectives import (abs_deviation, noisy_estimation, objective_preset,
                                  quadratic_estimation, zero_objective)

finite = st.floats(-50, 50, allow_nan=False)


@settings(max_examples=100, deadline=None)
@given(a=finite, x=finite, y=finite)
def test_subgradient_inequality(a, x, y):
    # f(y) >= f(x) + g(x)(y - x) for both built-in convex locals
    for obj in (quadratic_estimation([a], subgrad_bound=1e9), abs_deviation([a])):
        f = obj.locals[0]
        g = float(np.ravel(f.subgrad(np.array([x])))[0])
        lhs = float(f.value(np.array([y])))
        rhs = float(f.value(np.array([x]))) + g * (y - x)
        assert lhs >= rhs - 1e-9 * (1 + abs(rhs))


def test_quadratic_minimizer_is_mean():
    obj = quadratic_estimation(np.arange(1, 21))
    assert obj.minimizer[0] == 10.5
    assert obj.subgrad_bound == 25


def test_abs_kink_subgradient_is_zero():
    obj = abs_deviation([0.0, 3.0])
    g = obj.subgradients(np.array([[0.0], [5.0]]))
    assert g.tolist() == [[0.0], [1.0]]
    assert obj.subgrad_bound == 1


def test_abs_minimizer_minimizes():
    a = np.array([3.0, -1.0, 7.0, 2.0, 2.5])
    obj = abs_deviation(a)
    grid = np.linspace(-5, 10, 3001)
    best = min(obj.total(np.full((5, 1), v)) for v in grid)
    assert obj.total(np.full((5, 1), obj.minimizer[0])) <= best + 1e-12


def test_zero_objective():
    obj = zero_objective(4, dim=2)
    assert np.array_equal(obj.subgradients(np.ones((4, 2))), np.zeros((4, 2)))
    assert obj.total(np.ones((4, 2))) == 0


def test_noisy_preset_is_seeded():
    a = noisy_estimation(20, seed=5)
    b = noisy_estimation(20, seed=5)
    c = noisy_estimation(20, seed=6)
    assert np.array_equal(a.minimizer, b.minimizer)
    assert not np.array_equal(a.minimizer, c.minimizer)


def test_preset_lookup():
    assert objective_preset("zero", 3).name == "zero"
    assert objective_preset("quadratic_estimation", 3, a=[1, 2, 3]).minimizer[0] == 2
    with pytest.raises(ConfigurationError):
        objective_preset("nope", 3)


def test_vector_quadratic():
    a = np.array([[1.0, -1.0], [3.0, 5.0]])
    obj = quadratic_estimation(a)
    assert obj.dim == 2
    assert np.array_equal(obj.minimizer, [2.0, 2.0])
    assert np.array_equal(obj.subgradients(np.zeros((2, 2))), -a)
