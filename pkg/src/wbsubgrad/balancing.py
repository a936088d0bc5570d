"""Node-weight balancing on a directed graph.

Each node keeps a positive weight ``w_i`` and updates it from its
in-neighbors' weights,

    w_i(t+1) = w_i(t)/2 + (sum_{j in N^in(i)} w_j(t)/2) / d_i^out,

i.e. ``w(t+1) = P w(t)`` with ``P = (I + D^-1 A)/2``. The limit satisfies
``w_i d_i^out = sum_{j in N^in(i)} w_j`` (outgoing weight equals incoming
weight), which is what the estimate update needs to become doubly stochastic.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .digraph import DiGraph, GraphStats, ordered_in_sum, require_strongly_connected
from .errors import ConfigurationError, NonConvergenceError

DEFAULT_SAFETY = 0.5
DEFAULT_TOL = 1e-9
DEFAULT_MAX_ROUNDS = 10**6

WEIGHT_BOUNDS = ("degree", "perron", "exact")

WEIGHT_P = "weight_P"
ESTIMATE_Q = "estimate_Q"


@dataclass(frozen=True)
class WeightVector:
    """Per-node weights at a given round."""

    weights: np.ndarray
    round: int = 0

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        if w.ndim != 1:
            raise ConfigurationError("weights must be one-dimensional")
        if not np.all(w > 0):
            raise ConfigurationError("weights must be strictly positive")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return len(self.weights)


@dataclass(frozen=True)
class PropagationMatrix:
    """A column-stochastic propagation matrix tagged by what it propagates."""

    entries: np.ndarray
    kind: str

    def column_sums(self) -> np.ndarray:
        return self.entries.sum(axis=0)

    def row_sums(self) -> np.ndarray:
        return self.entries.sum(axis=1)


def safe_weight_bound(stats: GraphStats) -> float:
    """Uniform initial weight ``(1/d*)^(2D+1)`` that keeps ``w_i d_i^out <= 1``."""
    return (1.0 / stats.max_out_degree) ** (2 * stats.diameter + 1)


def perron_vector(g: DiGraph) -> np.ndarray:
    """Right Perron vector of ``P``, normalized to sum to one."""
    vals, vecs = np.linalg.eig(build_P(g).entries)
    k = int(np.argmin(np.abs(vals - 1.0)))
    v = np.abs(vecs[:, k].real)
    return v / v.sum()


def perron_weight_bound(g: DiGraph) -> float:
    """Largest uniform initial weight certified by the Perron vector ``v`` of ``P``.

    Since ``P^t v = v`` and ``P^t`` is nonnegative, ``(P^t 1)_i <= v_i / min(v)``
    for every ``t``. A uniform start ``c`` therefore keeps
    ``d_i^out w_i(t) <= c d_i^out v_i / min(v)``, so any
    ``c < min(v) / max_i(d_i^out v_i)`` is safe. This is never smaller than
    :func:`safe_weight_bound` and is usually orders of magnitude larger.
    """
    v = perron_vector(g)
    return float(v.min() / np.max(g.out_degree * v))


def exact_weight_bound(g: DiGraph, tol: float = 1e-13,
                       max_rounds: int = DEFAULT_MAX_ROUNDS) -> float:
    """Largest safe uniform initial weight, ``1 / sup_t max_i d_i^out (P^t 1)_i``.

    A uniform start ``c`` gives ``w_i(t) d_i^out = c d_i^out (P^t 1)_i``, so
    the supremum over the whole trajectory of the all-ones start fixes the
    threshold exactly. The iteration runs until the trajectory has converged
    (relative balance residual below ``tol``); past that point the iterates
    only move by round-off.
    """
    require_strongly_connected(g)
    d = g.out_degree
    z = np.ones(g.node_count)
    peak = float(np.max(d * z))
    for _ in range(max_rounds):
        z = weight_update(g, z)
        peak = max(peak, float(np.max(d * z)))
        if balance_residual(g, z) <= tol * float(np.max(z)):
            return 1.0 / peak
    raise NonConvergenceError("weight trajectory did not settle while bounding it")


def init_weights(g: DiGraph, stats: GraphStats, safety: float = DEFAULT_SAFETY,
                 bound: str = "degree") -> WeightVector:
    """Uniform initial weights ``safety * bound``.

    ``bound`` selects the safe level: ``"degree"`` is the diameter/degree
    formula :func:`safe_weight_bound`, ``"perron"`` the Perron-vector
    certificate :func:`perron_weight_bound`, and ``"exact"`` the exact
    trajectory supremum :func:`exact_weight_bound`. All three keep
    ``w_i(t) d_i^out < 1`` for every ``t`` whenever ``safety < 1``; they
    differ in how much mixing they leave on the table.
    """
    if not 0.0 < safety <= 1.0:
        raise ConfigurationError(f"safety must lie in (0, 1], got {safety}")
    if bound == "degree":
        c = safe_weight_bound(stats)
    elif bound == "perron":
        c = perron_weight_bound(g)
    elif bound == "exact":
        c = exact_weight_bound(g)
    else:
        raise ConfigurationError(f"unknown weight bound {bound!r}")
    return WeightVector(np.full(g.node_count, safety * c), 0)


def weight_update(g: DiGraph, w: np.ndarray) -> np.ndarray:
    """Array form of one weight round; neighbor sums in ascending id order."""
    incoming = ordered_in_sum(g, w)
    return 0.5 * w + (0.5 * incoming) / g.out_degree


def weight_step(g: DiGraph, w: WeightVector) -> WeightVector:
    if len(w) != g.node_count:
        raise ConfigurationError("weight vector does not match graph size")
    return WeightVector(weight_update(g, w.weights), w.round + 1)


def build_P(g: DiGraph) -> PropagationMatrix:
    n = g.node_count
    p = 0.5 * np.eye(n)
    for i, nbrs in enumerate(g.in_neighbors):
        for j in nbrs:
            p[i, j] = 0.5 / g.out_degree[i]
    return PropagationMatrix(p, WEIGHT_P)


def balance_residual(g: DiGraph, w: WeightVector | np.ndarray) -> float:
    """``max_i |w_i d_i^out - sum_{j in N^in(i)} w_j|``; zero iff ``w`` balances ``g``."""
    arr = w.weights if isinstance(w, WeightVector) else np.asarray(w, dtype=np.float64)
    return float(np.max(np.abs(arr * g.out_degree - ordered_in_sum(g, arr))))


@dataclass(frozen=True)
class BalanceResult:
    weights: WeightVector
    rounds: int
    residual: float
    residuals: np.ndarray  # residual before each round, then the final one


def run_to_balance(g: DiGraph, w0: WeightVector, tol: float = DEFAULT_TOL,
                   max_rounds: int = DEFAULT_MAX_ROUNDS) -> BalanceResult:
    """Iterate :func:`weight_step` until the balance residual is at most ``tol``.

    Raises
    ------
    NonConvergenceError
        If ``max_rounds`` rounds pass without reaching ``tol``.
    """
    if tol <= 0:
        raise ConfigurationError("tol must be positive")
    require_strongly_connected(g)
    w = np.array(w0.weights)
    history = []
    for k in range(max_rounds + 1):
        r = balance_residual(g, w)
        history.append(r)
        if r <= tol:
            return BalanceResult(WeightVector(w, w0.round + k), k, r, np.array(history))
        if k == max_rounds:
            break
        w = weight_update(g, w)
    raise NonConvergenceError(
        f"balance residual {history[-1]:.3e} > {tol:.1e} after {max_rounds} rounds")


def format_certificate(g: DiGraph, w: WeightVector) -> str:
    """``label weight`` lines plus a trailing ``residual`` line, 17 significant digits."""
    lines = [f"{lab} {x:.17g}" for lab, x in zip(g.labels, w.weights)]
    lines.append(f"residual {balance_residual(g, w):.17g}")
    return "\n".join(lines) + "\n"


def write_certificate(g: DiGraph, w: WeightVector, path: str | Path) -> None:
    Path(path).write_text(format_certificate(g, w))
