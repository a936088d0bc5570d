"""Directed graphs with dense integer node ids.

Nodes are ``0..n-1``. Edge ``(i, j)`` points from ``i`` to ``j``, so ``j``
receives ``i``'s broadcast. Neighbor lists are kept sorted because every
neighbor sum in the package runs in ascending node-id order.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Hashable, Iterable, Sequence

import numpy as np

from .errors import ConfigurationError, NotStronglyConnectedError


class DiGraph:
    """Immutable simple directed graph.

    Parameters
    ----------
    node_count : int
        Number of nodes ``n``; ids are ``0..n-1``.
    edges : iterable of (int, int)
        Directed edges ``(src, dst)``. Self-loops and duplicates raise
        :class:`ConfigurationError`.
    labels : sequence, optional
        External label for each id (defaults to the ids themselves).
    """

    _FIELDS = ("node_count", "edges", "in_neighbors", "out_neighbors", "labels")

    def __init__(self, node_count: int, edges: Iterable[tuple[int, int]],
                 labels: Sequence[Hashable] | None = None):
        n = int(node_count)
        if n < 1:
            raise ConfigurationError(f"node_count must be positive, got {n}")
        edge_list = [(int(i), int(j)) for i, j in edges]
        seen = set()
        for i, j in edge_list:
            if not (0 <= i < n and 0 <= j < n):
                raise ConfigurationError(f"edge ({i}, {j}) outside 0..{n - 1}")
            if i == j:
                raise ConfigurationError(f"self-loop at node {i}")
            if (i, j) in seen:
                raise ConfigurationError(f"duplicate edge ({i}, {j})")
            seen.add((i, j))
        ins: list[list[int]] = [[] for _ in range(n)]
        outs: list[list[int]] = [[] for _ in range(n)]
        for i, j in edge_list:
            outs[i].append(j)
            ins[j].append(i)
        if labels is None:
            labels = tuple(range(n))
        elif len(labels) != n:
            raise ConfigurationError("labels must have one entry per node")
        object.__setattr__(self, "node_count", n)
        object.__setattr__(self, "edges", frozenset(seen))
        object.__setattr__(self, "in_neighbors", tuple(tuple(sorted(a)) for a in ins))
        object.__setattr__(self, "out_neighbors", tuple(tuple(sorted(a)) for a in outs))
        object.__setattr__(self, "labels", tuple(labels))

    def __setattr__(self, name, value):
        if name in DiGraph._FIELDS:
            raise AttributeError("DiGraph is immutable")
        object.__setattr__(self, name, value)

    def __repr__(self):
        return f"DiGraph(n={self.node_count}, edges={len(self.edges)})"

    def __eq__(self, other):
        if not isinstance(other, DiGraph):
            return NotImplemented
        return self.node_count == other.node_count and self.edges == other.edges

    def __hash__(self):
        return hash((self.node_count, self.edges))

    @property
    def n(self) -> int:
        return self.node_count

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    @cached_property
    def out_degree(self) -> np.ndarray:
        """``d_i^out`` as a float64 array (read-only)."""
        d = np.array([len(a) for a in self.out_neighbors], dtype=np.float64)
        d.flags.writeable = False
        return d

    @cached_property
    def in_degree(self) -> np.ndarray:
        d = np.array([len(a) for a in self.in_neighbors], dtype=np.float64)
        d.flags.writeable = False
        return d

    @cached_property
    def in_index(self) -> np.ndarray:
        """In-neighbor ids padded with ``n`` into a rectangular array.

        Row ``i`` lists ``N^in(i)`` ascending; the pad value ``n`` indexes a
        zero row appended by :func:`ordered_in_sum`.
        """
        n = self.node_count
        width = max((len(a) for a in self.in_neighbors), default=0)
        idx = np.full((n, width), n, dtype=np.intp)
        for i, nbrs in enumerate(self.in_neighbors):
            idx[i, :len(nbrs)] = nbrs
        idx.flags.writeable = False
        return idx

    def adjacency(self) -> np.ndarray:
        """Matrix with ``A[i, j] = 1`` iff ``j`` is an in-neighbor of ``i``."""
        a = np.zeros((self.node_count, self.node_count))
        for i, j in self.edges:
            a[j, i] = 1.0
        return a

    def transpose(self) -> "DiGraph":
        return DiGraph(self.node_count, ((j, i) for i, j in self.edges), self.labels)


def ordered_in_sum(g: DiGraph, values: np.ndarray) -> np.ndarray:
    """Sum ``values[j]`` over ``j in N^in(i)`` for every ``i``.

    Terms are added left to right in ascending ``j`` starting from ``0.0``,
    which gives the same bits as a scalar loop over the sorted neighbor
    list. Padding adds ``+0.0``, which is exact because an accumulator that
    starts at ``+0.0`` never becomes ``-0.0``.
    """
    values = np.asarray(values, dtype=np.float64)
    pad = np.zeros((1,) + values.shape[1:])
    ext = np.concatenate([values, pad], axis=0)
    acc = np.zeros_like(values)
    for k in range(g.in_index.shape[1]):
        acc = acc + ext[g.in_index[:, k]]
    return acc


@dataclass(frozen=True)
class GraphStats:
    """Diameter ``D`` and largest out-degree ``d*`` of a strongly connected graph."""

    diameter: int
    max_out_degree: int


def _reachable(adj: Sequence[Sequence[int]], start: int) -> list[int]:
    dist = [-1] * len(adj)
    dist[start] = 0
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def validate_strongly_connected(g: DiGraph) -> bool:
    """True iff every ordered pair of nodes is joined by a directed path."""
    if g.node_count == 1:
        # a lone node has d_out = 0 and cannot run the protocol
        return False
    fwd = _reachable(g.out_neighbors, 0)
    bwd = _reachable(g.in_neighbors, 0)
    return min(fwd) >= 0 and min(bwd) >= 0


def require_strongly_connected(g: DiGraph) -> None:
    if not validate_strongly_connected(g):
        raise NotStronglyConnectedError(
            f"graph with {g.node_count} nodes and {len(g.edges)} edges "
            "is not strongly connected")


def compute_stats(g: DiGraph) -> GraphStats:
    """All-pairs BFS diameter and maximum out-degree."""
    require_strongly_connected(g)
    diameter = 0
    for s in range(g.node_count):
        diameter = max(diameter, max(_reachable(g.out_neighbors, s)))
    return GraphStats(diameter=diameter, max_out_degree=int(g.out_degree.max()))


# -- constructors -----------------------------------------------------------

def cycle_graph(n: int) -> DiGraph:
    """Directed cycle ``0 -> 1 -> ... -> n-1 -> 0``."""
    return DiGraph(n, [(i, (i + 1) % n) for i in range(n)])


def complete_graph(n: int) -> DiGraph:
    return DiGraph(n, [(i, j) for i in range(n) for j in range(n) if i != j])


def from_labeled_edges(pairs: Iterable[tuple[Hashable, Hashable]]) -> DiGraph:
    """Build a graph from labeled edges, assigning ids in first-appearance order."""
    ids: dict[Hashable, int] = {}
    edges = []
    for src, dst in pairs:
        for lab in (src, dst):
            if lab not in ids:
                ids[lab] = len(ids)
        edges.append((ids[src], ids[dst]))
    if not ids:
        raise ConfigurationError("graph has no edges")
    return DiGraph(len(ids), edges, labels=list(ids))


def parse_edges(text: str) -> DiGraph:
    """Parse the ``SRC DST`` per-line edge format; ``#`` lines are comments."""
    pairs = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ConfigurationError(f"line {lineno}: expected 'SRC DST', got {raw!r}")
        pairs.append((parts[0], parts[1]))
    return from_labeled_edges(pairs)


def read_edges(path: str | Path) -> DiGraph:
    return parse_edges(Path(path).read_text())


def _appearance_order(g: DiGraph) -> list[tuple[int, int]]:
    """Edges ordered so that first appearances follow id order when possible.

    Re-reading such a file reproduces the same ids. Edges that cannot be
    placed that way are appended in id order.
    """
    remaining = g.sorted_edges()
    ordered = []
    nxt = 0
    while remaining:
        for k, (i, j) in enumerate(remaining):
            new = [v for v in dict.fromkeys((i, j)) if v >= nxt]
            if new == list(range(nxt, nxt + len(new))):
                ordered.append(remaining.pop(k))
                nxt += len(new)
                break
        else:
            ordered.extend(remaining)
            break
    return ordered


def format_edges(g: DiGraph) -> str:
    """Edge-file text: the id/label map as ``#`` comments, then the edges."""
    lines = ["# id label"]
    lines += [f"# {i} {lab}" for i, lab in enumerate(g.labels)]
    lines += [f"{g.labels[i]} {g.labels[j]}" for i, j in _appearance_order(g)]
    return "\n".join(lines) + "\n"


def write_edges(g: DiGraph, path: str | Path) -> None:
    Path(path).write_text(format_edges(g))
