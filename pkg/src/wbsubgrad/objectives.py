"""Local convex objectives with value and subgradient oracles.

An :class:`ObjectiveSpec` bundles one :class:`LocalObjective` per node, a
declared subgradient bound ``L`` and, when known, the global minimizer. The
built-in presets also carry vectorized oracles; these must agree bit for bit
with the per-node oracles because the centralized engine uses the batched
form and the message-passing kernel uses the per-node form.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError

Oracle = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class LocalObjective:
    value: Callable[[np.ndarray], float]
    subgrad: Oracle


@dataclass(frozen=True)
class ObjectiveSpec:
    """Sum of ``n`` local objectives ``F(x) = sum_i f_i(x)``.

    Attributes
    ----------
    locals : sequence of LocalObjective
        ``f_i`` for each node, in node-id order.
    subgrad_bound : float
        Declared ``L``; every visited subgradient must satisfy ``|g|_inf <= L``.
    minimizer : ndarray or None
        A global minimizer ``x*`` of ``F`` (shape ``(d,)``), if known.
    name : str
        Preset name recorded in run digests.
    params : dict
        Preset parameters recorded in run digests.
    batch_subgrad, batch_value : callable or None
        Optional vectorized oracles over an ``(n, d)`` array.
    """

    locals: Sequence[LocalObjective]
    subgrad_bound: float
    minimizer: np.ndarray | None = None
    name: str = "custom"
    params: dict = field(default_factory=dict)
    dim: int = 1
    batch_subgrad: Callable[[np.ndarray], np.ndarray] | None = None
    batch_value: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if not self.subgrad_bound > 0:
            raise ConfigurationError("subgradient bound L must be positive")
        if self.minimizer is not None:
            object.__setattr__(self, "minimizer",
                               np.asarray(self.minimizer, dtype=np.float64).reshape(self.dim))

    @property
    def n(self) -> int:
        return len(self.locals)

    def subgradients(self, x: np.ndarray) -> np.ndarray:
        """Subgradients at every node's point; ``x`` has shape ``(n, d)``."""
        if self.batch_subgrad is not None:
            return self.batch_subgrad(x)
        return np.stack([np.asarray(f.subgrad(xi), dtype=np.float64).reshape(self.dim)
                         for f, xi in zip(self.locals, x)])

    def values(self, x: np.ndarray) -> np.ndarray:
        """``f_i(x_i)`` for every node."""
        if self.batch_value is not None:
            return self.batch_value(x)
        return np.array([float(f.value(xi)) for f, xi in zip(self.locals, x)])

    def total(self, x: np.ndarray) -> float:
        """``F`` at an ``(n, d)`` array of per-node points."""
        return float(np.sum(self.values(x)))


def _quadratic_local(a: np.ndarray) -> LocalObjective:
    return LocalObjective(lambda x: 0.5 * float(np.sum((x - a) ** 2)),
                          lambda x: x - a)


def quadratic_estimation(a, subgrad_bound: float = 25.0, name: str = "quadratic_estimation",
                         params: dict | None = None) -> ObjectiveSpec:
    """``f_i(x) = |x - a_i|^2 / 2``; the minimizer of the sum is ``mean(a)``.

    The gradient is unbounded globally, so ``subgrad_bound`` is a declaration
    that is checked on the points a run actually visits.
    """
    a = np.atleast_2d(np.asarray(a, dtype=np.float64).T).T
    if a.ndim != 2:
        raise ConfigurationError("a must be (n,) or (n, d)")
    a.flags.writeable = False
    return ObjectiveSpec(
        locals=[_quadratic_local(ai) for ai in a],
        subgrad_bound=subgrad_bound,
        minimizer=a.mean(axis=0),
        name=name,
        params=dict(params or {"a": a.tolist()}),
        dim=a.shape[1],
        batch_subgrad=lambda x: x - a,
        batch_value=lambda x: 0.5 * np.sum((x - a) ** 2, axis=1),
    )


def _abs_local(a: np.ndarray) -> LocalObjective:
    # np.sign(0) == 0, a valid and deterministic choice at the kink
    return LocalObjective(lambda x: float(np.sum(np.abs(x - a))),
                          lambda x: np.sign(x - a))


def abs_deviation(a) -> ObjectiveSpec:
    """``f_i(x) = |x - a_i|_1``; nonsmooth, ``L = 1``, minimized at the median."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64).T).T
    a.flags.writeable = False
    return ObjectiveSpec(
        locals=[_abs_local(ai) for ai in a],
        subgrad_bound=1.0,
        minimizer=np.median(a, axis=0),
        name="abs_deviation",
        params={"a": a.tolist()},
        dim=a.shape[1],
        batch_subgrad=lambda x: np.sign(x - a),
        batch_value=lambda x: np.sum(np.abs(x - a), axis=1),
    )


def zero_objective(n: int, dim: int = 1) -> ObjectiveSpec:
    """``f_i = 0``: the estimate update reduces to average consensus."""
    zero = LocalObjective(lambda x: 0.0, lambda x: np.zeros_like(x, dtype=np.float64))
    return ObjectiveSpec(
        locals=[zero] * n,
        subgrad_bound=1.0,
        minimizer=np.zeros(dim),
        name="zero",
        params={"n": n},
        dim=dim,
        batch_subgrad=lambda x: np.zeros_like(x, dtype=np.float64),
        batch_value=lambda x: np.zeros(len(x)),
    )


def noisy_estimation(n: int, truth: float = 10.5, seed: int = 0,
                     subgrad_bound: float = 25.0) -> ObjectiveSpec:
    """Quadratic estimation with ``a_i = truth + N_i``, ``N_i ~ N(0, 1)`` from PCG64(seed)."""
    a = truth + np.random.default_rng(seed).standard_normal(n)
    return quadratic_estimation(a, subgrad_bound, name="quadratic_noisy",
                                params={"n": n, "truth": truth, "seed": seed})


OBJECTIVE_PRESETS = ("quadratic_estimation", "abs_deviation", "zero")


def objective_preset(name: str, n: int, a=None, dim: int = 1) -> ObjectiveSpec:
    """Objective preset by name; ``a`` defaults to ``1..n``."""
    if a is None:
        a = np.arange(1, n + 1, dtype=np.float64)
    if name == "quadratic_estimation":
        return quadratic_estimation(a)
    if name == "abs_deviation":
        return abs_deviation(a)
    if name == "zero":
        return zero_objective(n, dim)
    raise ConfigurationError(f"unknown objective preset {name!r}; "
                             f"choose from {', '.join(OBJECTIVE_PRESETS)}")
