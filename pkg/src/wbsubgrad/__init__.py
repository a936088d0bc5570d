"""Distributed subgradient optimization over directed graphs via weight balancing."""
from .analysis import (DiagnosticsReport, GeometricFit, PhiSeries, consensus_violation,
                       fit_geometric, optimality_gap, phi_series, rate_report)
from .balancing import (PropagationMatrix, WeightVector, balance_residual, build_P,
                        init_weights, run_to_balance, safe_weight_bound, weight_step)
from .digraph import DiGraph, GraphStats, compute_stats, read_edges, validate_strongly_connected
from .engine import (RunState, RunTrace, StepSchedule, auxiliary_y, build_Q, ergodic_average,
                     estimate_step, run, step_size)
from .experiment import ExperimentConfig, generate_graph, run_experiment
from .objectives import ObjectiveSpec, abs_deviation, quadratic_estimation, zero_objective
from .simkernel import Broadcast, NodeActor, node_round, simulate

__version__ = "0.1.0"
