import math

import numpy as np
import pytest

from conftest import g4, sample_graphs, two_node
from wbsubgrad.balancing import WeightVector
from wbsubgrad.digraph import cycle_graph
from wbsubgrad.engine import (SQRT, TRACE_HEADER, RunState, StepSchedule, auxiliary_y,
                              build_Q, ergodic_average, ergodic_averages, estimate_step,
                              format_trace_rows, run, step_size)
from wbsubgrad.errors import ConfigurationError, InitializationError, SubgradientBoundError
from wbsubgrad.experiment import generate_graph
from wbsubgrad.objectives import abs_deviation, quadratic_estimation, zero_objective


def state(x, w, step=0.0, t=0):
    return RunState(t, np.asarray(x, dtype=float).reshape(len(x), -1), WeightVector(w), step)


def test_step_sizes():
    assert step_size(0) == 1.0
    assert step_size(3) == 0.5
    assert step_size(17, StepSchedule.constant(0.1)) == 0.1
    assert StepSchedule.parse("const:0.25")(9) == 0.25
    assert StepSchedule.parse("sqrt") == SQRT
    with pytest.raises(ConfigurationError):
        StepSchedule.parse("harmonic")
    with pytest.raises(ConfigurationError):
        StepSchedule.constant(-1.0)


def test_two_node_zero_objective_step():
    nxt = estimate_step(two_node(), state([0, 2], [0.25, 0.25]), zero_objective(2))
    assert nxt.estimates.ravel().tolist() == [0.5, 1.5]
    assert nxt.weights.weights.tolist() == [0.25, 0.25]
    assert nxt.round == 1


def test_two_node_abs_step():
    nxt = estimate_step(two_node(), state([0, 2], [0.25, 0.25], step=0.1), abs_deviation([0, 0]))
    assert np.allclose(nxt.estimates.ravel(), [0.5, 1.4], rtol=0, atol=1e-15)


def test_consensus_state_is_fixed_under_balanced_weights():
    g = g4()
    nxt = estimate_step(g, state([3.0, 3.0, 3.0], [0.1, 0.1, 0.2]), zero_objective(3))
    assert np.allclose(nxt.estimates, 3.0, rtol=0, atol=1e-15)


def test_build_Q_examples():
    Q = build_Q(g4(), WeightVector([0.1, 0.1, 0.2]))
    assert np.allclose(Q.entries, [[0.8, 0, 0.2], [0.1, 0.9, 0], [0.1, 0.1, 0.8]], atol=1e-15)
    assert np.allclose(Q.column_sums(), 1, atol=1e-15)
    assert np.allclose(Q.row_sums(), 1, atol=1e-15)
    Q3 = build_Q(cycle_graph(3), WeightVector(np.full(3, 0.4))).entries
    assert np.allclose(np.diag(Q3), 0.6)
    assert all(math.isclose(Q3[i, (i - 1) % 3], 0.4) for i in range(3))


def test_build_Q_column_sums_for_safe_weights():
    rng = np.random.default_rng(1)
    for g in sample_graphs():
        w = rng.random(g.n) / g.out_degree * 0.99
        assert np.allclose(build_Q(g, w).column_sums(), 1, rtol=0, atol=1e-12)


def test_zero_coefficient_is_reported():
    # safety 1 on a cycle gives w_i d_i = 1 exactly
    with pytest.raises(InitializationError, match="self-coefficient"):
        run(cycle_graph(5), zero_objective(5), rounds=3, safety=1.0)


def test_subgradient_bound_enforced():
    obj = quadratic_estimation(np.arange(1, 6), subgrad_bound=1.0)
    with pytest.raises(SubgradientBoundError):
        run(cycle_graph(5), obj, rounds=5)


def test_two_node_consensus_run():
    tr = run(two_node(), zero_objective(2), x0=[0, 2], rounds=200)
    assert np.max(np.abs(tr.x[200] - 1.0)) < 1e-8


def test_random_graph_consensus_is_exponential():
    from wbsubgrad.analysis import log_linear_fit
    g = generate_graph(10, 0.3, 11)
    x0 = np.arange(10.0)
    tr = run(g, zero_objective(10), x0=x0, rounds=400, bound="exact")
    err = np.max(np.abs(tr.x[:, :, 0] - x0.mean()), axis=1)
    assert err[-1] < 1e-8
    k = np.arange(20, 150)
    fit = log_linear_fit(k, err[k])
    assert fit.slope < 0 and fit.r2 > 0.99


def test_matrix_recursion_oracle():
    g = generate_graph(12, 0.2, 5)
    obj = quadratic_estimation(np.arange(1, 13))
    tr = run(g, obj, rounds=300, bound="exact")
    for t in range(tr.rounds):
        Q = build_Q(g, tr.w[t]).entries
        pred = Q @ tr.x[t] - tr.alpha[t] * tr.g[t]
        assert np.max(np.abs(pred - tr.x[t + 1])) <= 1e-12
        assert np.allclose(Q.sum(axis=0), 1, rtol=0, atol=1e-12)


def test_trace_is_immutable_and_replayable():
    g = g4()
    a = run(g, abs_deviation([1, 2, 3]), rounds=50)
    b = run(g, abs_deviation([1, 2, 3]), rounds=50)
    assert a.same_as(b)
    with pytest.raises(ValueError):
        a.x[0, 0, 0] = 1.0
    assert a.state(10).round == 10


def test_ergodic_average_examples():
    tr = run(two_node(), zero_objective(2), x0=[4.0, 4.0], rounds=6, w0=[0.25, 0.25])
    assert np.allclose(ergodic_average(tr, 6), 4.0)
    assert np.array_equal(ergodic_average(tr, 0), tr.x[0])
    assert np.allclose(ergodic_averages(tr)[6], ergodic_average(tr, 6), rtol=0, atol=1e-15)


def test_ergodic_average_two_rounds_by_hand():
    # nodes start at 0, node 0 reaches 1 after one round:
    # x_0 = (0, 1), alpha = (1, 1/sqrt 2) -> (1/sqrt2)/(1 + 1/sqrt2)
    tr = run(two_node(), zero_objective(2), x0=[0.0, 2.0], rounds=1, w0=[0.5, 0.5])
    assert tr.x[1, 0, 0] == 1.0
    expected = (1 / math.sqrt(2)) / (1 + 1 / math.sqrt(2))
    assert math.isclose(ergodic_average(tr, 1)[0, 0], expected, rel_tol=1e-12)
    assert math.isclose(expected, 0.41421356, rel_tol=1e-7)


def test_auxiliary_y_zero_objective():
    tr = run(g4(), zero_objective(3), x0=[1.0, 2.0, 6.0], rounds=30)
    aux = auxiliary_y(tr)
    assert np.all(aux.y == 3.0)


def test_auxiliary_y_recursion_matches_closed_form():
    g = generate_graph(20, 0.15, 2)
    tr = run(g, quadratic_estimation(np.arange(1, 21)), rounds=5000, bound="exact")
    aux = auxiliary_y(tr)
    assert np.max(np.abs(aux.y - aux.y_closed)) <= 1e-12


def test_vector_estimates():
    g = g4()
    a = np.array([[1.0, -2.0], [2.0, 0.0], [6.0, 2.0]])
    tr = run(g, quadratic_estimation(a), rounds=10)
    assert tr.x.shape == (11, 3, 2)
    one = run(g, quadratic_estimation(a[:, :1]), rounds=10)
    assert np.array_equal(tr.x[:, :, 0], one.x[:, :, 0])


def test_trace_rows():
    tr = run(g4(), zero_objective(3), x0=[0.0, 1.0, 2.0], rounds=2)
    rows = list(format_trace_rows(tr, stride=1))
    assert TRACE_HEADER == "t,node,component,x,w,g,alpha"
    assert len(rows) == 3 * 3
    last = rows[-1].split(",")
    assert last[0] == "2" and last[5] == ""


def test_rejects_bad_inputs():
    with pytest.raises(ConfigurationError):
        run(g4(), zero_objective(4), rounds=3)
    with pytest.raises(ConfigurationError):
        run(g4(), zero_objective(3), rounds=0)
