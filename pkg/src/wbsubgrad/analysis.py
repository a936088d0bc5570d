"""Centralized diagnostics over recorded runs.

Nothing here feeds back into the algorithm. These functions rebuild the
transition matrices from a trace, measure how fast their products approach
``J/n``, and evaluate the consensus and optimality bounds with empirically
fitted geometric constants ``(C, lambda)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .engine import RunTrace, auxiliary_y, build_Q, ergodic_averages
from .errors import ConfigurationError
from .objectives import ObjectiveSpec

DEFAULT_SLACK = 1.5
DEFAULT_FLOOR = 1e-13


# -- products of transition matrices ---------------------------------------

@dataclass(frozen=True)
class PhiSeries:
    """Deviation of ``Phi(t:s) = Q(t)...Q(s)`` from ``J/n``.

    ``deviations[k]`` is ``max_ij |Phi(s+k-1:s)_ij - 1/n|``, i.e. ``k`` is
    the number of factors (``k = 0`` is the empty product ``I``).
    ``column_error[k]`` is ``max_j |sum_i Phi_ij - 1|``.
    """

    s: int
    deviations: np.ndarray
    column_error: np.ndarray

    @property
    def factors(self) -> np.ndarray:
        return np.arange(len(self.deviations))

    def at(self, t: int) -> float:
        """Deviation of ``Phi(t:s)``."""
        return float(self.deviations[t - self.s + 1])


def phi_series(trace: RunTrace, s: int = 0, t_max: int | None = None,
               stop_below: float | None = None) -> PhiSeries:
    """Form ``Phi(t:s)`` for ``t = s-1, s, ..., t_max`` and record deviations.

    Stops early once the deviation drops below ``stop_below`` (if given).
    """
    t_max = trace.rounds if t_max is None else t_max
    if not 0 <= s <= t_max <= trace.rounds:
        raise ValueError(f"need 0 <= s <= t_max <= {trace.rounds}, got s={s}, t_max={t_max}")
    n = trace.n
    phi = np.eye(n)
    devs = [1.0 - 1.0 / n]
    cols = [0.0]
    for t in range(s, t_max + 1):
        phi = build_Q(trace.graph, trace.w[t]).entries @ phi
        devs.append(float(np.max(np.abs(phi - 1.0 / n))))
        cols.append(float(np.max(np.abs(phi.sum(axis=0) - 1.0))))
        if stop_below is not None and devs[-1] < stop_below:
            break
    return PhiSeries(s, np.array(devs), np.array(cols))


# -- regression -------------------------------------------------------------

@dataclass(frozen=True)
class LogLinearFit:
    slope: float
    intercept: float
    r2: float


def log_linear_fit(x: np.ndarray, y: np.ndarray) -> LogLinearFit:
    """Least-squares line through ``(x, log y)``; ``y`` must be positive."""
    x = np.asarray(x, dtype=np.float64)
    ly = np.log(np.asarray(y, dtype=np.float64))
    slope, intercept = np.polyfit(x, ly, 1)
    resid = ly - (slope * x + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return LogLinearFit(float(slope), float(intercept), r2)


@dataclass(frozen=True)
class GeometricFit:
    """``deviation(k) ~ C * lam**k`` fitted on factor counts ``window``."""

    C: float
    lam: float
    window: tuple[int, int]
    r2: float

    def bound(self, k, slack: float = 1.0):
        return slack * self.C * self.lam ** np.asarray(k, dtype=np.float64)


def positive_window(series: PhiSeries, floor: float = DEFAULT_FLOOR,
                    start: int = 1) -> tuple[int, int]:
    """Factor counts ``[start, stop)`` before the deviation first falls to ``floor``."""
    devs = series.deviations
    stop = start
    while stop < len(devs) and devs[stop] > floor:
        stop += 1
    return start, stop


def fit_geometric(series: PhiSeries, window: tuple[int, int] | None = None,
                  floor: float = DEFAULT_FLOOR) -> GeometricFit:
    """Fit ``C`` and ``lambda`` by least squares on log-deviation vs factor count.

    The default window starts at one factor and ends before the deviation
    first reaches ``floor`` (round-off level).
    """
    if window is None:
        window = positive_window(series, floor)
    lo, hi = window
    k = np.arange(lo, hi)
    devs = series.deviations[lo:hi]
    if np.any(devs <= 0):
        # fit on the positive prefix only
        first = int(np.argmax(devs <= 0))
        k, devs = k[:first], devs[:first]
    if len(k) < 10:
        raise ValueError(f"need at least 10 positive deviations to fit, got {len(k)}")
    fit = log_linear_fit(k, devs)
    return GeometricFit(math.exp(fit.intercept), math.exp(fit.slope),
                        (int(k[0]), int(k[-1]) + 1), fit.r2)


# -- pointwise diagnostics --------------------------------------------------

def consensus_violation(estimates) -> float:
    """``max_{i,j} |x_i - x_j|_inf``."""
    x = np.asarray(estimates, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    return float(np.max(x.max(axis=0) - x.min(axis=0)))


def consensus_violations(trace: RunTrace) -> np.ndarray:
    """Consensus violation for every round of a trace."""
    return np.max(trace.x.max(axis=1) - trace.x.min(axis=1), axis=1)


def optimality_gap(obj: ObjectiveSpec, point, minimizer=None) -> float:
    """``sum_i f_i(point_i) - sum_i f_i(x*)``.

    ``point`` is ``(n, d)`` per-node points or a single ``(d,)`` point used at
    every node. The gap can be negative when the nodes disagree.
    """
    xstar = obj.minimizer if minimizer is None else np.asarray(minimizer, dtype=np.float64)
    if xstar is None:
        raise ConfigurationError(f"objective {obj.name!r} has no known minimizer")
    p = np.asarray(point, dtype=np.float64)
    if p.ndim <= 1:
        p = np.broadcast_to(p.reshape(-1)[: obj.dim], (obj.n, obj.dim))
    star = np.broadcast_to(xstar.reshape(obj.dim), (obj.n, obj.dim))
    return obj.total(p) - obj.total(star)


def running_max(values, width: int) -> np.ndarray:
    """Trailing running maximum over ``width`` entries."""
    v = np.asarray(values, dtype=np.float64)
    out = np.empty_like(v)
    for i in range(len(v)):
        out[i] = v[max(0, i - width + 1): i + 1].max()
    return out


# -- bounds -----------------------------------------------------------------

def discounted_steps(alpha: np.ndarray, lam: float) -> np.ndarray:
    """``S(t) = sum_{s<t} lam^(t-1-s) alpha(s)`` for ``t = 0..len(alpha)-1``."""
    out = np.zeros(len(alpha))
    for t in range(1, len(alpha)):
        out[t] = lam * out[t - 1] + alpha[t - 1]
    return out


def disagreement_rhs(alpha: np.ndarray, n: int, L: float, C: float, lam: float,
               x0_l1: float) -> np.ndarray:
    """Per-round bound on ``|x_i(t) - y(t)|``:
    ``C lam^t |x(0)|_1 + n L C sum_{s<t} lam^(t-s-1) alpha(s)``."""
    t = np.arange(len(alpha))
    return C * lam ** t * x0_l1 + n * L * C * discounted_steps(alpha, lam)


def ergodic_rhs(alpha: np.ndarray, n: int, L: float, C: float, lam: float,
             x0_l1: float) -> np.ndarray:
    """Ergodic bound on ``|xhat_i(T) - yhat(T)|`` for every ``T``."""
    per_round = disagreement_rhs(alpha, n, L, C, lam, x0_l1)
    return 2.0 * np.cumsum(alpha * per_round) / np.cumsum(alpha)


def gap_rhs(alpha: np.ndarray, n: int, L: float, C: float, lam: float, x0_l1: float,
             y0_err_sq: float, y_minus_x: np.ndarray) -> np.ndarray:
    """Bound on ``F(xhat(T)) - F(x*)`` for every ``T``.

    ``y0_err_sq`` is ``(y(0) - x*)^2`` and ``y_minus_x[t]`` is
    ``sum_i |y(t) - x_i(t)|``.
    """
    a_sum = np.cumsum(alpha)
    t = np.arange(len(alpha))
    disc = lam * discounted_steps(alpha, lam)  # sum_{s<t} lam^(t-s) alpha(s)
    tail = C * lam ** t * x0_l1 + L * n * C * disc
    return (n / (2 * a_sum) * y0_err_sq
            + n * L ** 2 / (2 * a_sum) * np.cumsum(alpha ** 2)
            + 2 * L / a_sum * np.cumsum(alpha * y_minus_x)
            + L / a_sum * np.cumsum(alpha * tail))


def sqrt_ergodic_rhs(T, n: int, L: float, C: float, lam: float, x0_l1: float = 0.0):
    """Pairwise ergodic consensus bound for ``alpha(t) = 1/sqrt(t+1)``.

    With ``x(0) = 0`` this is ``2 L n C 4/(1-lam) log T / sqrt T``; otherwise
    the ``2 C/(1-lam) |x(0)|_1 / sqrt T`` term from the same derivation is added.
    """
    T = np.asarray(T, dtype=np.float64)
    k = 4.0 / (1.0 - lam)
    return (2 * L * n * C * k * np.log(T) / np.sqrt(T)
            + 2 * C / (1.0 - lam) * x0_l1 / np.sqrt(T))


def sqrt_gap_rhs(T, n: int, L: float, C: float, lam: float, y0_err_sq: float,
             x0_l1: float = 0.0):
    """Optimality bound for ``alpha(t) = 1/sqrt(t+1)`` (``T >= 4``).

    With ``x(0) = 0`` the first term is ``n (x*)^2 / (2 sqrt T)``.
    """
    T = np.asarray(T, dtype=np.float64)
    k = 4.0 / (1.0 - lam)
    r = np.log(T) / np.sqrt(T)
    return (n * y0_err_sq / (2 * np.sqrt(T))
            + n * L ** 2 / 2 * 2 * r
            + 2 * L ** 2 * n * C * k * r
            + n * L ** 2 * C * k * r
            + 3 * L * C / (1.0 - lam) * x0_l1 / np.sqrt(T))


# -- report -----------------------------------------------------------------

@dataclass
class DiagnosticsReport:
    checkpoints: np.ndarray
    consensus_violation: np.ndarray      # every round
    ergodic_violation: np.ndarray        # at checkpoints
    optimality_gap: np.ndarray           # at checkpoints, signed
    rate_statistic: np.ndarray           # |gap| sqrt(T) / log T
    ergodic_rate_statistic: np.ndarray   # ergodic_violation sqrt(T) / log T
    estimate_error: np.ndarray           # max_i |xhat_i(T) - x*|_inf
    bound_ergodic: np.ndarray
    bound_gap: np.ndarray
    bound_sqrt_ergodic: np.ndarray
    bound_sqrt_gap: np.ndarray
    fitted_C: float
    fitted_lambda: float
    fit: GeometricFit
    phi: PhiSeries
    slack: float
    L: float
    n: int
    extra: dict = field(default_factory=dict)

    @property
    def sqrt_ergodic_holds(self) -> np.ndarray:
        return self.ergodic_violation <= self.slack * self.bound_sqrt_ergodic

    @property
    def sqrt_gap_holds(self) -> np.ndarray:
        return self.optimality_gap <= self.slack * self.bound_sqrt_gap

    @property
    def ergodic_holds(self) -> np.ndarray:
        return self.ergodic_violation <= self.slack * self.bound_ergodic

    @property
    def gap_holds(self) -> np.ndarray:
        return self.optimality_gap <= self.slack * self.bound_gap

    def all_bounds_hold(self) -> bool:
        checks = [self.ergodic_holds, self.gap_holds]
        if np.all(np.isfinite(self.bound_sqrt_ergodic)):
            checks += [self.sqrt_ergodic_holds, self.sqrt_gap_holds]
        return bool(all(np.all(c) for c in checks))


def fit_trace(trace: RunTrace, s: int = 0, t_max: int | None = None,
              floor: float = DEFAULT_FLOOR) -> tuple[PhiSeries, GeometricFit]:
    """Phi series from round ``s`` (until round-off) and its geometric fit."""
    series = phi_series(trace, s, t_max, stop_below=floor)
    return series, fit_geometric(series, floor=floor)


def rate_report(trace: RunTrace, obj: ObjectiveSpec, checkpoints: Sequence[int],
                slack: float = DEFAULT_SLACK, fit: GeometricFit | None = None,
                phi_rounds: int | None = None) -> DiagnosticsReport:
    """Ergodic violations, gaps, rate statistics and bound right-hand sides.

    Parameters
    ----------
    trace : RunTrace
        A recorded run.
    obj : ObjectiveSpec
        The objective of that run (for gaps, ``L`` and ``x*``).
    checkpoints : sequence of int
        Rounds ``T`` to evaluate, each ``>= 4`` and within the trace.
    slack : float
        Multiplier on every bound when judging it.
    fit : GeometricFit, optional
        Precomputed ``(C, lambda)``; otherwise fitted from ``Phi(t:0)``.
    phi_rounds : int, optional
        Last round used when forming ``Phi(t:0)`` for the fit.
    """
    cps = np.array(sorted(set(int(T) for T in checkpoints)))
    if len(cps) == 0 or cps[0] < 4 or cps[-1] > trace.rounds:
        raise ConfigurationError(
            f"checkpoints must lie in 4..{trace.rounds}, got {list(checkpoints)}")
    if fit is None:
        series, fit = fit_trace(trace, 0, phi_rounds)
    else:
        series = phi_series(trace, 0, min(trace.rounds, fit.window[1]))
    C, lam = fit.C, fit.lam
    n, L = trace.n, obj.subgrad_bound
    T_max = int(cps[-1])
    alpha = trace.alpha[:T_max + 1]
    x0_l1 = float(np.abs(trace.x[0]).sum())

    xhat = ergodic_averages(trace)[cps]
    erg = np.array([consensus_violation(xh) for xh in xhat])
    if obj.minimizer is not None:
        gaps = np.array([optimality_gap(obj, xh) for xh in xhat])
        err = np.array([float(np.max(np.abs(xh - obj.minimizer))) for xh in xhat])
        xstar = obj.minimizer
    else:
        gaps = np.full(len(cps), np.nan)
        err = np.full(len(cps), np.nan)
        xstar = None
    logT, sqT = np.log(cps), np.sqrt(cps)
    rate = np.abs(gaps) * sqT / logT
    erg_rate = erg * sqT / logT

    aux = auxiliary_y(trace, T_max)
    y_minus_x = np.max(np.abs(aux.y[:, None, :] - trace.x[:T_max + 1]), axis=2).sum(axis=1)
    b14 = ergodic_rhs(alpha, n, L, C, lam, x0_l1)[cps]
    if xstar is not None:
        y0_err_sq = float(np.max((aux.y[0] - xstar) ** 2))
        b23 = gap_rhs(alpha, n, L, C, lam, x0_l1, y0_err_sq, y_minus_x)[cps]
    else:
        y0_err_sq = float("nan")
        b23 = np.full(len(cps), np.nan)
    if trace.config_digest.get("schedule") == "sqrt":
        b27 = sqrt_ergodic_rhs(cps, n, L, C, lam, x0_l1)
        b28 = sqrt_gap_rhs(cps, n, L, C, lam, y0_err_sq, x0_l1)
    else:
        b27 = np.full(len(cps), np.nan)
        b28 = np.full(len(cps), np.nan)
    return DiagnosticsReport(
        checkpoints=cps, consensus_violation=consensus_violations(trace),
        ergodic_violation=erg, optimality_gap=gaps, rate_statistic=rate,
        ergodic_rate_statistic=erg_rate, estimate_error=err,
        bound_ergodic=b14, bound_gap=b23, bound_sqrt_ergodic=b27, bound_sqrt_gap=b28,
        fitted_C=C, fitted_lambda=lam, fit=fit, phi=series, slack=slack, L=L, n=n)


REPORT_HEADER = "T,ergodic_violation,optimality_gap,rate_statistic,bound_rhs_eq27,bound_rhs_eq28"


def format_report(report: DiagnosticsReport) -> str:
    g = "%.17g"
    lines = [f"# fitted_C={g % report.fitted_C} fitted_lambda={g % report.fitted_lambda} "
             f"fit_window={report.fit.window[0]}:{report.fit.window[1]} "
             f"L={g % report.L} n={report.n} slack={g % report.slack}",
             REPORT_HEADER]
    for row in zip(report.checkpoints, report.ergodic_violation, report.optimality_gap,
                   report.rate_statistic, report.bound_sqrt_ergodic, report.bound_sqrt_gap):
        lines.append(",".join([str(int(row[0]))] + [g % v for v in row[1:]]))
    return "\n".join(lines) + "\n"


def write_report_csv(report: DiagnosticsReport, path: str | Path) -> None:
    Path(path).write_text(format_report(report))
