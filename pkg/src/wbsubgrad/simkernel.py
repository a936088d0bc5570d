"""Per-node message-passing execution.

Each :class:`NodeActor` knows only its own estimate, weight, out-degree and
local objective. In every synchronous round it broadcasts ``(w_i x_i, w_i)``
to its out-neighbors; after all broadcasts are delivered each node updates
from its inbox. The arithmetic matches :mod:`wbsubgrad.engine` operation for
operation (inbox sums in ascending sender id), so :func:`simulate` reproduces
:func:`wbsubgrad.engine.run` bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import balancing
from .digraph import DiGraph, require_strongly_connected
from .engine import (SQRT, RunTrace, StepSchedule, as_estimates, initial_weights,
                     make_digest)
from .errors import (ConfigurationError, InitializationError, SubgradientBoundError,
                     SynchronyError)
from .objectives import LocalObjective, ObjectiveSpec


@dataclass(frozen=True, slots=True)
class Broadcast:
    """What node ``sender`` tells every out-neighbor at round ``round``."""

    sender: int
    weighted_estimate: np.ndarray  # w_j(t) * x_j(t)
    weight: float                  # w_j(t)
    round: int


@dataclass(frozen=True, slots=True)
class NodeActor:
    id: int
    out_degree: float
    local_objective: LocalObjective
    subgrad_bound: float
    x: np.ndarray
    w: float
    round: int = 0
    last_subgrad: np.ndarray | None = None

    def broadcast(self) -> Broadcast:
        return Broadcast(self.id, self.w * self.x, self.w, self.round)


def node_round(actor: NodeActor, inbox: Iterable[Broadcast], alpha: float,
               expected_senders: Sequence[int] | None = None) -> tuple[NodeActor, Broadcast]:
    """Advance one node by one round using only its inbox.

    ``expected_senders`` comes from the link layer (who is wired to this
    node); when given, a missing sender is a synchrony violation.
    """
    msgs = list(inbox)
    senders = tuple(m.sender for m in msgs)
    if expected_senders is None or senders != tuple(expected_senders):
        msgs.sort(key=lambda m: m.sender)
        senders = tuple(m.sender for m in msgs)
        if len(set(senders)) != len(senders):
            raise SynchronyError(f"node {actor.id}: duplicate sender in round {actor.round}")
        if expected_senders is not None and set(senders) != set(expected_senders):
            missing = sorted(set(expected_senders) - set(senders))
            extra = sorted(set(senders) - set(expected_senders))
            raise SynchronyError(
                f"node {actor.id}, round {actor.round}: missing {missing}, unexpected {extra}")

    coef = 1.0 - actor.w * actor.out_degree
    if not coef > 0:
        raise InitializationError(
            f"self-coefficient 1 - w_i*d_i^out = {coef!r} <= 0 at node {actor.id} "
            f"at round {actor.round}; initial weights are too large for this graph")
    grad = np.asarray(actor.local_objective.subgrad(actor.x), dtype=np.float64)
    if grad.size and not abs(grad).max() <= actor.subgrad_bound:
        raise SubgradientBoundError(
            f"subgradient at node {actor.id}, round {actor.round} exceeds "
            f"L = {actor.subgrad_bound!r}")

    # scalar +0.0 start gives the same bits as a zero-array accumulator
    mixed = 0.0
    weight_in = 0.0
    for m in msgs:
        if m.round != actor.round:
            raise SynchronyError(
                f"node {actor.id} at round {actor.round} got round-{m.round} message "
                f"from {m.sender}")
        mixed = mixed + m.weighted_estimate
        weight_in = weight_in + m.weight
    x_next = (actor.x * coef + mixed) - alpha * grad
    w_next = 0.5 * actor.w + (0.5 * weight_in) / actor.out_degree
    nxt = NodeActor(actor.id, actor.out_degree, actor.local_objective, actor.subgrad_bound,
                    x_next, w_next, actor.round + 1, grad)
    return nxt, Broadcast(nxt.id, w_next * x_next, w_next, nxt.round)


def spawn_actors(g: DiGraph, obj: ObjectiveSpec, x0: np.ndarray,
                 w0: np.ndarray) -> list[NodeActor]:
    """Give each node its startup knowledge: out-degree, objective, initial state."""
    return [NodeActor(i, float(len(g.out_neighbors[i])), obj.locals[i], obj.subgrad_bound,
                      np.array(x0[i]), float(w0[i]))
            for i in range(g.node_count)]


MessageLog = Callable[[Broadcast], None]


def simulate(g: DiGraph, obj: ObjectiveSpec, x0=None, rounds: int = 1000,
             schedule: StepSchedule = SQRT, safety: float = balancing.DEFAULT_SAFETY,
             bound: str = "degree", w0=None, seed=None,
             message_log: MessageLog | None = None) -> RunTrace:
    """Run the protocol with one actor per node and a global round barrier.

    Arguments mirror :func:`wbsubgrad.engine.run`. ``message_log`` (if given)
    is called with every broadcast once per round. ``trace.config_digest``
    gains ``messages_per_round``, the delivered-message count of each round.
    """
    require_strongly_connected(g)
    if rounds < 1:
        raise ConfigurationError("rounds must be at least 1")
    if obj.n != g.node_count:
        raise ConfigurationError(f"objective has {obj.n} nodes, graph has {g.node_count}")
    n, d = g.node_count, obj.dim
    x_init = as_estimates(x0, n, d)
    w_init = initial_weights(g, safety, bound, w0)
    actors = spawn_actors(g, obj, x_init, w_init)
    outbox = [a.broadcast() for a in actors]

    xs = np.empty((rounds + 1, n, d))
    ws = np.empty((rounds + 1, n))
    gs = np.empty((rounds, n, d))
    alphas = np.array([schedule(t) for t in range(rounds + 1)], dtype=np.float64)
    xs[0], ws[0] = x_init, w_init
    delivered = set()
    for t in range(rounds):
        if message_log is not None:
            for msg in outbox:
                message_log(msg)
        # barrier: every round-t broadcast reaches its out-neighbors first
        inboxes: list[list[Broadcast]] = [[] for _ in range(n)]
        count = 0
        for msg in outbox:
            for dst in g.out_neighbors[msg.sender]:
                inboxes[dst].append(msg)
                count += 1
        delivered.add(count)
        alpha = float(alphas[t])
        new_actors, outbox = [], []
        for i, actor in enumerate(actors):
            nxt, msg = node_round(actor, inboxes[i], alpha, g.in_neighbors[i])
            new_actors.append(nxt)
            outbox.append(msg)
            xs[t + 1, i], ws[t + 1, i], gs[t, i] = nxt.x, nxt.w, nxt.last_subgrad
        actors = new_actors
        if not np.all(np.isfinite(xs[t + 1])):
            raise FloatingPointError(f"non-finite estimate at round {t + 1}")
    digest = make_digest(g, obj, x_init, rounds, schedule, safety, bound, w_init, seed)
    digest["messages_per_round"] = sorted(delivered)
    return RunTrace(xs, ws, gs, alphas, g, digest)


class MessageLogWriter:
    """Collects broadcasts as ``t,sender,weight,weighted_estimate_0,...`` CSV rows."""

    def __init__(self, dim: int = 1):
        self.dim = dim
        self.rows: list[str] = []

    def __call__(self, msg: Broadcast) -> None:
        vals = ",".join("%.17g" % v for v in np.ravel(msg.weighted_estimate))
        self.rows.append(f"{msg.round},{msg.sender},{'%.17g' % msg.weight},{vals}")

    def header(self) -> str:
        cols = ",".join(f"weighted_estimate_{k}" for k in range(self.dim))
        return f"t,sender,weight,{cols}"

    def write(self, path: str | Path) -> None:
        Path(path).write_text("\n".join([self.header()] + self.rows) + "\n")
