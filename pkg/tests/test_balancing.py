import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import g4, sample_graphs, two_node
from wbsubgrad.balancing import (WeightVector, balance_residual, build_P, exact_weight_bound,
                                 format_certificate, init_weights, perron_vector,
                                 perron_weight_bound, run_to_balance, safe_weight_bound,
                                 weight_step)
from wbsubgrad.digraph import GraphStats, compute_stats, cycle_graph
from wbsubgrad.errors import ConfigurationError, NonConvergenceError


def power_iteration(P, iters=20000):
    """Independent dominant-eigenvector oracle (plain repeated products)."""
    v = np.ones(P.shape[0])
    for _ in range(iters):
        v = P @ v
        v /= v.sum()
    return v


@pytest.mark.parametrize("D, dstar, expected", [(2, 2, 1 / 32), (1, 1, 1.0), (2, 1, 1.0)])
def test_safe_weight_bound(D, dstar, expected):
    assert safe_weight_bound(GraphStats(D, dstar)) == expected


def test_init_weights_examples():
    g = g4()
    assert np.all(init_weights(g, compute_stats(g)).weights == 0.015625)
    c3 = cycle_graph(3)
    assert np.all(init_weights(c3, compute_stats(c3)).weights == 0.5)


def test_init_weights_rejects_bad_safety():
    g = g4()
    with pytest.raises(ConfigurationError):
        init_weights(g, compute_stats(g), safety=0.0)
    with pytest.raises(ConfigurationError):
        init_weights(g, compute_stats(g), bound="nope")


@pytest.mark.parametrize("bound", ["degree", "perron", "exact"])
def test_safety_one_keeps_products_at_most_one(bound):
    for g in sample_graphs():
        w = init_weights(g, compute_stats(g), safety=1.0, bound=bound)
        for _ in range(1000):
            assert np.max(w.weights * g.out_degree) <= 1.0 + 1e-12
            w = weight_step(g, w)


def test_bounds_are_ordered():
    for g in sample_graphs():
        degree = safe_weight_bound(compute_stats(g))
        perron = perron_weight_bound(g)
        exact = exact_weight_bound(g)
        assert degree <= perron * (1 + 1e-9)
        assert perron <= exact * (1 + 1e-9)


def test_weight_step_examples():
    c3 = cycle_graph(3)
    w = WeightVector(np.full(3, 0.3))
    assert np.array_equal(weight_step(c3, w).weights, w.weights)
    out = weight_step(g4(), WeightVector(np.full(3, 0.1))).weights
    assert np.allclose(out, [0.075, 0.1, 0.15], rtol=0, atol=1e-16)


def test_weight_step_equals_matrix_product():
    rng = np.random.default_rng(3)
    for g in sample_graphs():
        w = rng.random(g.n) + 0.1
        assert np.allclose(weight_step(g, WeightVector(w)).weights, build_P(g).entries @ w,
                           rtol=0, atol=1e-14)


def test_build_P_examples():
    assert np.array_equal(build_P(two_node()).entries, np.full((2, 2), 0.5))
    perm = np.roll(np.eye(3), 1, axis=0)  # row i picks up node i-1
    assert np.array_equal(build_P(cycle_graph(3)).entries, 0.5 * (np.eye(3) + perm))
    P = build_P(g4()).entries
    assert np.allclose(P[0], [0.5, 0, 0.25])
    assert np.allclose(P @ [1, 1, 2], [1, 1, 2], rtol=0, atol=1e-15)


def test_similar_matrix_is_column_stochastic():
    # P itself is neither row nor column stochastic (G4 columns sum to
    # 1.5, 1, 0.75); D P D^-1 = (I + A D^-1)/2 is column stochastic.
    for g in sample_graphs():
        d = g.out_degree
        M = d[:, None] * build_P(g).entries / d[None, :]
        assert np.allclose(M.sum(axis=0), 1.0, rtol=0, atol=1e-12)
    assert np.allclose(build_P(g4()).column_sums(), [1.5, 1.0, 0.75])


def test_balance_residual_examples():
    g = g4()
    assert balance_residual(g, WeightVector([1.0, 1.0, 2.0])) == 0.0
    assert balance_residual(g, WeightVector([1.0, 1.0, 1.0])) == 1.0


def test_run_to_balance_examples():
    res = run_to_balance(cycle_graph(3), WeightVector(np.full(3, 0.7)))
    assert res.rounds == 0
    res = run_to_balance(g4(), WeightVector(np.full(3, 0.015625)), tol=1e-12)
    oracle = power_iteration(build_P(g4()).entries)
    w = res.weights.weights
    assert np.allclose(w / w.sum(), oracle, rtol=1e-8)
    assert np.allclose(w / w[0], [1, 1, 2], rtol=1e-8)


def test_residual_decays_geometrically():
    from wbsubgrad.analysis import log_linear_fit
    from wbsubgrad.experiment import generate_graph
    g = generate_graph(20, 0.15, 7)
    res = run_to_balance(g, WeightVector(np.ones(20)), tol=1e-12)
    tail = res.residuals[len(res.residuals) // 2:]
    fit = log_linear_fit(np.arange(len(tail)), tail)
    assert fit.slope < 0 and fit.r2 > 0.98


def test_run_to_balance_exhausts():
    from wbsubgrad.experiment import generate_graph
    with pytest.raises(NonConvergenceError):
        run_to_balance(generate_graph(10, 0.2, 1), WeightVector(np.ones(10)), 1e-12, 3)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6), scale=st.floats(1e-3, 1e3))
def test_limit_invariant_to_rescaling(seed, scale):
    from wbsubgrad.experiment import generate_graph
    g = generate_graph(8, 0.3, seed)
    a = run_to_balance(g, WeightVector(np.ones(8)), tol=1e-13).weights.weights
    b = run_to_balance(g, WeightVector(np.full(8, scale)), tol=1e-13 * scale).weights.weights
    assert np.allclose(a / a.sum(), b / b.sum(), rtol=1e-9)


def test_perron_vector_balances():
    for g in sample_graphs():
        v = perron_vector(g)
        assert balance_residual(g, v) < 1e-12


def test_certificate_format():
    text = format_certificate(g4(), WeightVector([1.0, 1.0, 2.0]))
    assert text.splitlines() == ["1 1", "2 1", "3 2", "residual 0"]


def test_weight_vector_must_be_positive():
    with pytest.raises(ConfigurationError):
        WeightVector([1.0, 0.0])
