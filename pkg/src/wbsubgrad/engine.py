"""Centralized execution of the weight-balancing subgradient method.

Every round each node mixes its own estimate, scaled by ``1 - w_i d_i^out``,
with the weighted estimates ``w_j x_j`` of its in-neighbors, then steps along
its local negative subgradient. The weights advance in the same round from
the same snapshot. In matrix form::

    x(t+1) = Q(t) x(t) - alpha(t) g(t)
    w(t+1) = P w(t)

with ``Q(t)_ii = 1 - w_i(t) d_i^out`` and ``Q(t)_ij = w_j(t)`` for
``j in N^in(i)``. ``Q(t)`` is column stochastic for every ``t`` and becomes
doubly stochastic as the weights balance.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator, Sequence

import numpy as np

from . import balancing
from .balancing import PropagationMatrix, WeightVector
from .digraph import DiGraph, compute_stats, ordered_in_sum, require_strongly_connected
from .errors import ConfigurationError, InitializationError, SubgradientBoundError
from .objectives import ObjectiveSpec


# -- step sizes -------------------------------------------------------------

@dataclass(frozen=True)
class StepSchedule:
    """Step-size sequence ``alpha(t)``.

    ``kind`` is ``"sqrt"`` (``1/sqrt(t+1)``), ``"const"`` (``value``) or
    ``"custom"`` (``series[t]``, or a callable of ``t``).
    """

    kind: str = "sqrt"
    value: float = 0.0
    series: Sequence[float] | Callable[[int], float] | None = None

    def __post_init__(self):
        if self.kind not in ("sqrt", "const", "custom"):
            raise ConfigurationError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "const" and not self.value >= 0:
            raise ConfigurationError(f"constant step must be non-negative, got {self.value}")
        if self.kind == "custom" and self.series is None:
            raise ConfigurationError("custom schedule needs a series")

    def __call__(self, t: int) -> float:
        if self.kind == "sqrt":
            return 1.0 / math.sqrt(t + 1)
        if self.kind == "const":
            return float(self.value)
        a = self.series(t) if callable(self.series) else self.series[t]
        a = float(a)
        if not a >= 0:
            raise ConfigurationError(f"step size at t={t} is negative: {a}")
        return a

    def describe(self) -> str:
        if self.kind == "sqrt":
            return "sqrt"
        if self.kind == "const":
            return f"const:{self.value!r}"
        return "custom"

    @classmethod
    def parse(cls, text: str) -> "StepSchedule":
        """Parse ``sqrt`` or ``const:c``."""
        text = text.strip()
        if text == "sqrt":
            return cls("sqrt")
        if text.startswith("const:"):
            try:
                c = float(text[len("const:"):])
            except ValueError:
                raise ConfigurationError(f"bad constant in schedule {text!r}") from None
            return cls("const", c)
        raise ConfigurationError(f"schedule must be 'sqrt' or 'const:c', got {text!r}")

    @classmethod
    def constant(cls, c: float) -> "StepSchedule":
        return cls("const", c)


SQRT = StepSchedule("sqrt")


def step_size(t: int, schedule: StepSchedule = SQRT) -> float:
    return schedule(t)


# -- state and trace --------------------------------------------------------

@dataclass(frozen=True)
class RunState:
    round: int
    estimates: np.ndarray  # (n, d)
    weights: WeightVector
    step: float


@dataclass(frozen=True)
class RunTrace:
    """Full history of a run, rounds ``0..T``.

    ``x[t]`` and ``w[t]`` are the round-``t`` estimates and weights,
    ``alpha[t]`` the round-``t`` step, and ``g[t]`` (``t < T``) the
    subgradients used to move from round ``t`` to ``t+1``.
    """

    x: np.ndarray       # (T+1, n, d)
    w: np.ndarray       # (T+1, n)
    g: np.ndarray       # (T, n, d)
    alpha: np.ndarray   # (T+1,)
    graph: DiGraph
    config_digest: dict = field(default_factory=dict)

    def __post_init__(self):
        T = self.rounds
        if self.w.shape[0] != T + 1 or self.alpha.shape[0] != T + 1 or self.g.shape[0] != T:
            raise ValueError("trace arrays have inconsistent lengths")
        for arr in (self.x, self.w, self.g, self.alpha):
            arr.flags.writeable = False

    @property
    def rounds(self) -> int:
        return self.x.shape[0] - 1

    @property
    def n(self) -> int:
        return self.x.shape[1]

    @property
    def dim(self) -> int:
        return self.x.shape[2]

    def state(self, t: int) -> RunState:
        return RunState(t, self.x[t], WeightVector(self.w[t], t), float(self.alpha[t]))

    @property
    def states(self) -> Iterator[RunState]:
        return (self.state(t) for t in range(self.rounds + 1))

    @property
    def subgrads(self) -> np.ndarray:
        return self.g

    def same_as(self, other: "RunTrace") -> bool:
        """Bitwise equality of every recorded array."""
        return all(np.array_equal(a.view(np.uint64), b.view(np.uint64))
                   for a, b in ((self.x, other.x), (self.w, other.w),
                                (self.g, other.g), (self.alpha, other.alpha)))


# -- one round --------------------------------------------------------------

def build_Q(g: DiGraph, w: WeightVector | np.ndarray) -> PropagationMatrix:
    arr = w.weights if isinstance(w, WeightVector) else np.asarray(w, dtype=np.float64)
    coef = 1.0 - arr * g.out_degree
    _check_coefficients(coef, getattr(w, "round", None))
    q = np.diag(coef)
    for i, nbrs in enumerate(g.in_neighbors):
        for j in nbrs:
            q[i, j] = arr[j]
    return PropagationMatrix(q, balancing.ESTIMATE_Q)


def _check_coefficients(coef: np.ndarray, t) -> None:
    if np.all(coef > 0):
        return
    i = int(np.argmin(coef))
    when = "" if t is None else f" at round {t}"
    raise InitializationError(
        f"self-coefficient 1 - w_i*d_i^out = {coef[i]!r} <= 0 at node {i}{when}; "
        "initial weights are too large for this graph")


def _check_subgrads(grads: np.ndarray, bound: float, t: int) -> None:
    worst = float(np.max(np.abs(grads))) if grads.size else 0.0
    if not worst <= bound:
        i = int(np.argmax(np.max(np.abs(grads), axis=1)))
        raise SubgradientBoundError(
            f"subgradient at node {i}, round {t} has magnitude {worst!r} "
            f"above the declared bound L = {bound!r}")


def advance(g: DiGraph, x: np.ndarray, w: np.ndarray, alpha: float,
            obj: ObjectiveSpec, t: int = 0):
    """One joint round from the round-``t`` snapshot ``(x, w)``.

    Returns ``(x_next, w_next, grads)``.
    """
    coef = 1.0 - w * g.out_degree
    _check_coefficients(coef, t)
    grads = obj.subgradients(x)
    _check_subgrads(grads, obj.subgrad_bound, t)
    mixed = ordered_in_sum(g, w[:, None] * x)
    x_next = (x * coef[:, None] + mixed) - alpha * grads
    w_next = balancing.weight_update(g, w)
    return x_next, w_next, grads


def estimate_step(g: DiGraph, state: RunState, obj: ObjectiveSpec,
                  schedule: StepSchedule | None = None) -> RunState:
    """Apply the estimate and weight updates once.

    The new state's step is ``schedule(t+1)`` when a schedule is given,
    otherwise the current step is carried over.
    """
    x = np.asarray(state.estimates, dtype=np.float64).reshape(g.node_count, -1)
    x_next, w_next, _ = advance(g, x, state.weights.weights, state.step, obj, state.round)
    t1 = state.round + 1
    step = schedule(t1) if schedule is not None else state.step
    return RunState(t1, x_next, WeightVector(w_next, t1), step)


# -- whole runs -------------------------------------------------------------

def as_estimates(x0, n: int, dim: int) -> np.ndarray:
    if x0 is None:
        return np.zeros((n, dim))
    x = np.array(x0, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(n, -1)
    if x.shape != (n, dim):
        raise ConfigurationError(f"x0 must have shape ({n}, {dim}), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ConfigurationError("x0 must be finite")
    return x


def initial_weights(g: DiGraph, safety: float, bound: str, w0=None) -> np.ndarray:
    if w0 is not None:
        w = w0.weights if isinstance(w0, WeightVector) else np.asarray(w0, dtype=np.float64)
        return np.array(WeightVector(w).weights)
    return np.array(balancing.init_weights(g, compute_stats(g), safety, bound).weights)


def make_digest(g: DiGraph, obj: ObjectiveSpec, x0: np.ndarray, rounds: int,
                schedule: StepSchedule, safety: float, bound: str, w0: np.ndarray,
                seed=None) -> dict:
    edges = g.sorted_edges()
    h = hashlib.sha256(json.dumps(edges).encode()).hexdigest()
    return {
        "n": g.node_count,
        "edges": len(edges),
        "graph_sha256": h,
        "objective": obj.name,
        "dim": obj.dim,
        "L": obj.subgrad_bound,
        "rounds": rounds,
        "schedule": schedule.describe(),
        "safety": safety,
        "weight_bound": bound,
        "w0": float(w0[0]) if np.all(w0 == w0[0]) else "custom",
        "x0_l1": float(np.abs(x0).sum()),
        "seed": seed,
    }


def run(g: DiGraph, obj: ObjectiveSpec, x0=None, rounds: int = 1000,
        schedule: StepSchedule = SQRT, safety: float = balancing.DEFAULT_SAFETY,
        bound: str = "degree", w0=None, seed=None) -> RunTrace:
    """Run ``rounds`` joint rounds and record everything.

    Parameters
    ----------
    g : DiGraph
        Strongly connected communication graph.
    obj : ObjectiveSpec
        Local objectives, one per node.
    x0 : array_like, optional
        Initial estimates, ``(n,)`` or ``(n, d)``; zeros by default.
    rounds : int
        Number of rounds ``T`` (at least 1).
    schedule : StepSchedule
        Step sizes; ``1/sqrt(t+1)`` by default.
    safety, bound : float, str
        Uniform initial weight ``safety * bound`` (see
        :func:`wbsubgrad.balancing.init_weights`). Ignored if ``w0`` is given.
    w0 : array_like, optional
        Explicit initial weights.
    seed : optional
        Recorded in the digest only; the run itself is deterministic.
    """
    require_strongly_connected(g)
    if rounds < 1:
        raise ConfigurationError("rounds must be at least 1")
    if obj.n != g.node_count:
        raise ConfigurationError(f"objective has {obj.n} nodes, graph has {g.node_count}")
    n, d = g.node_count, obj.dim
    x = as_estimates(x0, n, d)
    w = initial_weights(g, safety, bound, w0)
    xs = np.empty((rounds + 1, n, d))
    ws = np.empty((rounds + 1, n))
    gs = np.empty((rounds, n, d))
    alphas = np.array([schedule(t) for t in range(rounds + 1)], dtype=np.float64)
    xs[0], ws[0] = x, w
    for t in range(rounds):
        x, w, grads = advance(g, x, w, alphas[t], obj, t)
        if not np.all(np.isfinite(x)):
            raise FloatingPointError(f"non-finite estimate at round {t + 1}")
        xs[t + 1], ws[t + 1], gs[t] = x, w, grads
    digest = make_digest(g, obj, xs[0], rounds, schedule, safety, bound, ws[0], seed)
    return RunTrace(xs, ws, gs, alphas, g, digest)


# -- derived sequences ------------------------------------------------------

def ergodic_averages(trace: RunTrace) -> np.ndarray:
    """``xhat[T]`` for every ``T``: alpha-weighted running means, shape ``(T+1, n, d)``."""
    a = trace.alpha
    num = np.cumsum(a[:, None, None] * trace.x, axis=0)
    return num / np.cumsum(a)[:, None, None]


def ergodic_average(trace: RunTrace, T: int) -> np.ndarray:
    """``sum_{t<=T} alpha(t) x_i(t) / sum_{t<=T} alpha(t)`` for every node."""
    if not 0 <= T <= trace.rounds:
        raise ValueError(f"T={T} outside trace rounds 0..{trace.rounds}")
    a = trace.alpha[:T + 1]
    return np.tensordot(a, trace.x[:T + 1], axes=1) / a.sum()


@dataclass(frozen=True)
class AuxiliarySequence:
    y: np.ndarray          # recursion, (T+1, d)
    y_closed: np.ndarray   # closed form, (T+1, d)
    y_hat: np.ndarray      # alpha-weighted average of y(0..T), (d,)


def auxiliary_y(trace: RunTrace, T: int | None = None) -> AuxiliarySequence:
    """Network-average sequence driven by the mean subgradient.

    ``y(0)`` is the mean initial estimate and
    ``y(t+1) = y(t) - alpha(t)/n * sum_i g_i(t)``, evaluated step by step
    with a carried rounding term. The closed form
    ``y(t) = y(0) - (1/n) sum_{s<t} alpha(s) sum_i g_i(s)`` is computed
    separately with compensated summation.
    """
    T = trace.rounds if T is None else T
    if not 0 <= T <= trace.rounds:
        raise ValueError(f"T={T} outside trace rounds 0..{trace.rounds}")
    n, d = trace.n, trace.dim
    y = np.empty((T + 1, d))
    y[0] = trace.x[0].mean(axis=0)
    gsum = trace.g[:T].sum(axis=1)  # (T, d)
    # the recursion carries its rounding error forward (TwoSum), otherwise
    # 1e5 steps at |y| ~ 10 drift by several 1e-12
    carry = np.zeros(d)
    for t in range(T):
        step = -(trace.alpha[t] / n * gsum[t])
        hi = y[t] + step
        v = hi - y[t]
        carry += (y[t] - (hi - v)) + (step - v)
        y[t + 1] = hi + carry
        carry -= y[t + 1] - hi
    closed = np.empty_like(y)
    y0 = np.array([math.fsum(trace.x[0, :, k]) / n for k in range(d)])
    closed[0] = y0
    total = np.zeros(d)
    comp = np.zeros(d)
    for t in range(T):
        # Neumaier compensated running sum of alpha(s) * sum_i g_i(s)
        term = trace.alpha[t] * gsum[t]
        s = total + term
        big = np.abs(total) >= np.abs(term)
        comp += np.where(big, (total - s) + term, (term - s) + total)
        total = s
        closed[t + 1] = y0 - (total + comp) / n
    a = trace.alpha[:T + 1]
    y_hat = (a @ y) / a.sum()
    return AuxiliarySequence(y, closed, y_hat)


# -- CSV --------------------------------------------------------------------

TRACE_HEADER = "t,node,component,x,w,g,alpha"


def _g17(v: float) -> str:
    return "%.17g" % v


def format_trace_rows(trace: RunTrace, stride: int = 1) -> Iterator[str]:
    T, n, d = trace.rounds, trace.n, trace.dim
    rounds = list(range(0, T + 1, stride))
    if rounds[-1] != T:
        rounds.append(T)
    for t in rounds:
        a = _g17(trace.alpha[t])
        for i in range(n):
            w = _g17(trace.w[t, i])
            for k in range(d):
                g = _g17(trace.g[t, i, k]) if t < T else ""
                yield f"{t},{i},{k},{_g17(trace.x[t, i, k])},{w},{g},{a}"


def write_trace_csv(trace: RunTrace, path: str | Path, stride: int = 1) -> None:
    """Write one row per (round, node, component); rounds thinned by ``stride``."""
    with open(path, "w", newline="\n") as fh:
        fh.write(TRACE_HEADER + "\n")
        for row in format_trace_rows(trace, stride):
            fh.write(row + "\n")
