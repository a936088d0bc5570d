"""Experiment configuration, presets and the end-to-end runner."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import analysis, balancing, engine, simkernel
from .digraph import (DiGraph, cycle_graph, parse_edges, read_edges,
                      validate_strongly_connected, write_edges)
from .engine import StepSchedule
from .errors import (BoundViolationError, ConfigurationError, EquivalenceError,
                     InitializationError, NotStronglyConnectedError, SubgradientBoundError)
from .objectives import ObjectiveSpec, abs_deviation, noisy_estimation, quadratic_estimation, zero_objective

log = logging.getLogger(__name__)

GENERATOR_NAME = "numpy.random.PCG64"
PINNED_N = 20
PINNED_PROB = 0.15
PINNED_SEED = 2015

DEFAULT_WEIGHT_BOUND = "exact"

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_BOUND = 3
EXIT_EQUIVALENCE = 4
EXIT_RUNTIME = 5


def generate_graph(n: int, extra_edge_prob: float, seed: int) -> DiGraph:
    """Directed ``n``-cycle plus random extra edges.

    Every ordered pair ``(i, j)``, ``i != j``, not on the cycle is visited in
    lexicographic order and added when a uniform draw from
    ``numpy.random.default_rng(seed)`` (PCG64) falls below ``extra_edge_prob``.
    """
    if n < 2:
        raise ConfigurationError(f"n must be at least 2, got {n}")
    if not 0.0 <= extra_edge_prob <= 1.0:
        raise ConfigurationError(f"extra_edge_prob must lie in [0, 1], got {extra_edge_prob}")
    rng = np.random.default_rng(seed)
    cycle = {(i, (i + 1) % n) for i in range(n)}
    edges = set(cycle)
    for i in range(n):
        for j in range(n):
            if i != j and (i, j) not in cycle and rng.random() < extra_edge_prob:
                edges.add((i, j))
    return DiGraph(n, edges)


def pinned_graph() -> DiGraph:
    """The pinned 20-node graph used by the ``paper_v`` presets."""
    text = resources.files("wbsubgrad.data").joinpath("pinned20.edges").read_text()
    return parse_edges(text)


PRESETS = ("paper_v", "paper_v_noisy", "consensus", "abs_deviation")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to replay a run.

    ``graph`` is an edge-file path, ``generate`` a ``(n, p, seed)`` triple;
    with neither, the preset's default graph is used.
    """

    preset: str = "paper_v"
    graph: str | None = None
    generate: tuple[int, float, int] | None = None
    rounds: int = 10_000
    schedule: str = "sqrt"
    safety: float = balancing.DEFAULT_SAFETY
    weight_bound: str | None = None
    checkpoints: tuple[int, ...] | None = None
    out: str | None = None
    verify_bounds: bool = False
    seed: int = 0
    trace_stride: int = 1
    message_log: bool = False
    slack: float = analysis.DEFAULT_SLACK

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ConfigurationError(f"unknown preset {self.preset!r}; choose from {', '.join(PRESETS)}")
        if self.graph is not None and self.generate is not None:
            raise ConfigurationError("give either a graph file or a generator, not both")
        if self.rounds < 4:
            raise ConfigurationError(f"rounds must be at least 4, got {self.rounds}")
        if not 0.0 < self.safety <= 1.0:
            raise ConfigurationError(f"safety must lie in (0, 1], got {self.safety}")
        if self.weight_bound not in (None,) + balancing.WEIGHT_BOUNDS:
            raise ConfigurationError(f"weight_bound must be one of {balancing.WEIGHT_BOUNDS}, "
                                     f"got {self.weight_bound!r}")
        if self.trace_stride < 1:
            raise ConfigurationError("trace_stride must be positive")
        StepSchedule.parse(self.schedule)

    @property
    def step_schedule(self) -> StepSchedule:
        return StepSchedule.parse(self.schedule)

    def resolved_checkpoints(self) -> list[int]:
        if self.checkpoints:
            cps = sorted(set(int(c) for c in self.checkpoints))
            bad = [c for c in cps if c < 4 or c > self.rounds]
            if bad:
                raise ConfigurationError(f"checkpoints {bad} outside 4..{self.rounds}")
            return cps
        cps = [10 ** k for k in range(1, 12) if 10 ** k <= self.rounds]
        return sorted(set(cps + [self.rounds]))

    def echo(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            lines.append(f"{f.name} = {'' if v is None else v}")
        return "\n".join(lines) + "\n"


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off", ""):
        return False
    raise ConfigurationError(f"not a boolean: {text!r}")


def parse_generate(text: str) -> tuple[int, float, int]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise ConfigurationError(f"generator must be 'n,p,seed', got {text!r}")
    try:
        return int(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigurationError(f"bad generator {text!r}") from None


def parse_checkpoints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(float(p)) for p in text.replace(" ", "").split(",") if p)
    except ValueError:
        raise ConfigurationError(f"bad checkpoint list {text!r}") from None


_CONVERTERS = {
    "rounds": int, "safety": float, "seed": int, "trace_stride": int, "slack": float,
    "verify_bounds": _parse_bool, "message_log": _parse_bool,
    "generate": parse_generate, "checkpoints": parse_checkpoints,
}


def parse_config(text: str, **overrides) -> ExperimentConfig:
    """Read ``key = value`` lines (``#`` starts a comment) into a config.

    Provenance lines from ``config.echo`` (``digest.*``, ``resolved.*``,
    ``generator``) are skipped, so an echoed config replays as is.
    """
    values = {}
    known = {f.name for f in fields(ExperimentConfig)}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"config line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if "." in key or key == "generator":
            continue  # provenance lines written by config.echo
        if key not in known:
            raise ConfigurationError(f"config line {lineno}: unknown key {key!r}")
        if value == "":
            values[key] = None
            continue
        values[key] = _CONVERTERS.get(key, str)(value)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**values)


# -- building a run ---------------------------------------------------------

@dataclass
class Setup:
    graph: DiGraph
    objective: ObjectiveSpec
    x0: np.ndarray
    weight_bound: str


def build_setup(cfg: ExperimentConfig) -> Setup:
    """Resolve the graph, objective, initial estimates and weight bound."""
    if cfg.graph is not None:
        g = read_edges(cfg.graph)
    elif cfg.generate is not None:
        g = generate_graph(*cfg.generate)
    elif cfg.preset == "consensus":
        g = cycle_graph(PINNED_N)
    else:
        g = pinned_graph()
    if not validate_strongly_connected(g):
        raise NotStronglyConnectedError(
            f"graph ({g.node_count} nodes, {len(g.edges)} edges) is not strongly connected")
    n = g.node_count
    if cfg.preset == "paper_v":
        obj = quadratic_estimation(np.arange(1, n + 1, dtype=np.float64))
        x0 = np.zeros(n)
    elif cfg.preset == "paper_v_noisy":
        obj = noisy_estimation(n, seed=cfg.seed)
        x0 = np.zeros(n)
    elif cfg.preset == "abs_deviation":
        obj = abs_deviation(np.arange(1, n + 1, dtype=np.float64))
        x0 = np.zeros(n)
    else:
        obj = zero_objective(n)
        x0 = np.arange(n, dtype=np.float64)
    bound = cfg.weight_bound or DEFAULT_WEIGHT_BOUND
    return Setup(g, obj, x0, bound)


@dataclass
class ExperimentResult:
    status: int
    message: str
    trace: engine.RunTrace | None = None
    report: analysis.DiagnosticsReport | None = None
    outputs: dict = field(default_factory=dict)


def execute(cfg: ExperimentConfig, setup: Setup | None = None):
    """Run the kernel and the centralized engine; return both traces and the report.

    Raises the package's exceptions instead of mapping them to exit codes.
    """
    setup = setup or build_setup(cfg)
    common = dict(x0=setup.x0, rounds=cfg.rounds, schedule=cfg.step_schedule,
                  safety=cfg.safety, bound=setup.weight_bound, seed=cfg.seed)
    logger = simkernel.MessageLogWriter(setup.objective.dim) if cfg.message_log else None
    sim = simkernel.simulate(setup.graph, setup.objective, message_log=logger, **common)
    ref = engine.run(setup.graph, setup.objective, **common)
    if not sim.same_as(ref):
        diff = np.max(np.abs(sim.x - ref.x))
        raise EquivalenceError(
            f"message-passing trace differs from centralized trace (max |dx| = {diff!r})")
    report = analysis.rate_report(sim, setup.objective, cfg.resolved_checkpoints(), cfg.slack)
    return sim, ref, report, logger


def write_outputs(cfg: ExperimentConfig, setup: Setup, trace: engine.RunTrace,
                  report: analysis.DiagnosticsReport, logger=None) -> dict:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = {name: out / name for name in ("trace.csv", "report.csv", "graph.edges", "config.echo")}
    engine.write_trace_csv(trace, paths["trace.csv"], cfg.trace_stride)
    analysis.write_report_csv(report, paths["report.csv"])
    write_edges(setup.graph, paths["graph.edges"])
    digest = "".join(f"digest.{k} = {v}\n" for k, v in sorted(trace.config_digest.items()))
    paths["config.echo"].write_text(
        cfg.echo() + f"resolved.weight_bound = {setup.weight_bound}\n"
        f"generator = {GENERATOR_NAME}\n" + digest)
    if logger is not None:
        paths["messages.csv"] = out / "messages.csv"
        logger.write(paths["messages.csv"])
    return paths


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Full pipeline with exit-status mapping.

    Exit status is 0 on success, 2 for invalid input (including a graph that
    is not strongly connected), 3 when ``verify_bounds`` finds a bound
    violated, 4 when the two executions disagree and 5 when a run-time
    contract (weight safety, subgradient bound) is broken.
    """
    try:
        setup = build_setup(cfg)
    except NotStronglyConnectedError as exc:
        return ExperimentResult(EXIT_VALIDATION, f"validation error: {exc}")
    except (ConfigurationError, OSError) as exc:
        return ExperimentResult(EXIT_VALIDATION, f"configuration error: {exc}")
    try:
        trace, _, report, logger = execute(cfg, setup)
    except EquivalenceError as exc:
        return ExperimentResult(EXIT_EQUIVALENCE, f"equivalence mismatch: {exc}")
    except (InitializationError, SubgradientBoundError) as exc:
        return ExperimentResult(EXIT_RUNTIME, f"run aborted: {exc}")
    except ConfigurationError as exc:
        return ExperimentResult(EXIT_VALIDATION, f"configuration error: {exc}")
    outputs = write_outputs(cfg, setup, trace, report, logger) if cfg.out else {}
    if cfg.verify_bounds and not report.all_bounds_hold():
        bad = [int(T) for T, ok27, ok28, ok14, ok23 in zip(
            report.checkpoints, report.sqrt_ergodic_holds, report.sqrt_gap_holds,
            report.ergodic_holds, report.gap_holds) if not (ok14 and ok23 and
            (not np.isfinite(report.bound_sqrt_ergodic).all() or (ok27 and ok28)))]
        err = BoundViolationError(f"bound violated at checkpoints {bad}")
        return ExperimentResult(EXIT_BOUND, f"bound violation: {err}", trace, report, outputs)
    return ExperimentResult(EXIT_OK, "ok", trace, report, outputs)


def with_overrides(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})
