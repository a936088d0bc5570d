import subprocess
import sys

import numpy as np
import pytest

from wbsubgrad.cli import main
from wbsubgrad.digraph import DiGraph, compute_stats, validate_strongly_connected, write_edges
from wbsubgrad.errors import ConfigurationError
from wbsubgrad.experiment import (EXIT_BOUND, EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION,
                                  ExperimentConfig, generate_graph, pinned_graph,
                                  parse_checkpoints, parse_config, parse_generate,
                                  run_experiment)


def test_pinned_graph_matches_generator():
    g = pinned_graph()
    assert g == generate_graph(20, 0.15, 2015)
    s = compute_stats(g)
    assert (g.n, len(g.edges), s.diameter, s.max_out_degree) == (20, 78, 4, 7)


def test_config_validation():
    with pytest.raises(ConfigurationError):
        ExperimentConfig(rounds=3)
    with pytest.raises(ConfigurationError):
        ExperimentConfig(safety=1.5)
    with pytest.raises(ConfigurationError):
        ExperimentConfig(preset="nope")


def test_parse_helpers():
    assert parse_generate("20,0.1,42") == (20, 0.1, 42)
    assert sorted(parse_checkpoints("100, 10,1000")) == [10, 100, 1000]
    with pytest.raises(ConfigurationError):
        parse_generate("20,0.1")


def test_parse_config_text():
    cfg = parse_config("""
        # a comment
        preset = abs_deviation
        rounds = 500   # trailing comment
        schedule = const:0.01
        generate = 10,0.2,3
        """, seed=7)
    assert (cfg.preset, cfg.rounds, cfg.schedule, cfg.generate, cfg.seed) == (
        "abs_deviation", 500, "const:0.01", (10, 0.2, 3), 7)
    with pytest.raises(ConfigurationError):
        parse_config("colour = blue")


def test_consensus_preset():
    res = run_experiment(ExperimentConfig(preset="consensus", rounds=10_000,
                                          checkpoints=(100, 10_000)))
    assert res.status == EXIT_OK
    assert np.max(np.abs(res.trace.x[-1] - 9.5)) < 1e-6


def test_disconnected_graph_is_rejected(tmp_path):
    path = tmp_path / "bad.edges"
    write_edges(DiGraph(4, [(0, 1), (1, 0), (2, 3), (3, 2)]), path)
    res = run_experiment(ExperimentConfig(graph=str(path), rounds=10))
    assert res.status == EXIT_VALIDATION
    assert res.message.startswith("validation error")


def test_unsafe_weights_abort(tmp_path):
    res = run_experiment(ExperimentConfig(preset="consensus", rounds=10, safety=1.0,
                                          weight_bound="degree"))
    assert res.status == EXIT_RUNTIME
    assert "self-coefficient" in res.message


def test_bound_violation_exit(tmp_path):
    # slack far below 1 makes even a healthy run fail its bound audit
    res = run_experiment(ExperimentConfig(rounds=200, verify_bounds=True, slack=1e-9))
    assert res.status == EXIT_BOUND
    assert res.message.startswith("bound violation")


def test_outputs_and_replay(tmp_path):
    out = tmp_path / "run"
    cfg = ExperimentConfig(rounds=300, out=str(out), message_log=True, trace_stride=10)
    res = run_experiment(cfg)
    assert res.status == EXIT_OK
    names = sorted(p.name for p in out.iterdir())
    assert names == ["config.echo", "graph.edges", "messages.csv", "report.csv", "trace.csv"]
    trace_lines = (out / "trace.csv").read_text().splitlines()
    assert trace_lines[0] == "t,node,component,x,w,g,alpha"
    assert len(trace_lines) == 1 + 31 * 20
    report = (out / "report.csv").read_text().splitlines()
    assert report[0].startswith("# fitted_C=")
    assert report[1] == "T,ergodic_violation,optimality_gap,rate_statistic,bound_rhs_eq27,bound_rhs_eq28"
    echo = (out / "config.echo").read_text()
    assert "digest.graph_sha256" in echo and "generator = numpy.random.PCG64" in echo
    replay = parse_config(echo)
    assert replay == cfg


def test_cli_main(tmp_path, capsys):
    code = main(["--generate", "12,0.2,5", "--preset", "abs_deviation", "--rounds", "400",
                 "--checkpoints", "10,100,400", "--out", str(tmp_path / "o"), "--verify-bounds"])
    assert code == 0
    out = capsys.readouterr().out
    assert "fitted C" in out and "wrote" in out


def test_cli_rejects_conflicting_sources():
    with pytest.raises(SystemExit):
        main(["--graph", "x.edges", "--generate", "5,0.1,1"])


def test_cli_config_file_and_bad_value(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("preset = consensus\nrounds = 50\n")
    assert main(["--config", str(cfg)]) == 0
    assert main(["--config", str(cfg), "--schedule", "harmonic"]) == EXIT_VALIDATION
    assert "configuration error" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "wbsubgrad", "--preset", "consensus",
                           "--rounds", "20"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr


def test_generated_graphs_are_valid():
    for seed in range(30):
        assert validate_strongly_connected(generate_graph(9, 0.05, seed))
