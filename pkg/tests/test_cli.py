import json
from pathlib import Path

import pytest

from agentscale.cli import EXIT_CONFIG, EXIT_OK, main
from agentscale.scenarios import dynamic_load_scenario, write_scenario

FAST = [
    "--episodes", "2",
    "--ticks", "8",
    "--history-k", "2",
]


def run(argv):
    return main(argv)


def test_scenario_list(capsys):
    assert run(["scenario", "list"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "dynamic-load" in out
    assert "scalability" in out
    assert "priority-lhm" in out


def test_eval_heuristic_writes_outputs(tmp_path, capsys):
    out = tmp_path / "results"
    code = run(
        ["eval", "--policy", "heuristic", "--seed", "3", "--iterations", "2", "--out", str(out)]
    )
    assert code == EXIT_OK
    assert (out / "kpi.json").is_file()
    assert (out / "run_000.csv").is_file()
    assert (out / "run_001.csv").is_file()
    header = (out / "run_000.csv").read_text().splitlines()[0]
    assert header.startswith("iteration,episode,tick,service")


def test_eval_rerun_byte_identical(tmp_path):
    args = ["eval", "--policy", "heuristic", "--seed", "11", "--iterations", "2"]
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert run(args + ["--out", str(out_a)]) == EXIT_OK
    assert run(args + ["--out", str(out_b)]) == EXIT_OK
    for name in ("kpi.json", "run_000.csv", "run_001.csv"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes()


def test_train_then_eval_discrete(tmp_path, capsys):
    ckpt = tmp_path / "ckpt"
    code = run(["train", "--policy", "discrete", "--seed", "5", "--out", str(ckpt)] + FAST)
    assert code == EXIT_OK
    assert (ckpt / "manifest.json").is_file()
    manifest = json.loads((ckpt / "manifest.json").read_text())
    assert manifest["slots"] == ["slot_000.json", "slot_001.json", "slot_002.json"]

    out = tmp_path / "results"
    code = run(
        [
            "eval", "--policy", "discrete", "--seed", "6", "--iterations", "2",
            "--checkpoints", str(ckpt), "--out", str(out),
        ]
        + FAST
    )
    assert code == EXIT_OK
    assert (out / "kpi.json").is_file()


def test_eval_learning_policy_without_checkpoints_is_config_error(tmp_path, capsys):
    code = run(
        ["eval", "--policy", "discrete", "--seed", "1", "--out", str(tmp_path / "r")] + FAST
    )
    assert code == EXIT_CONFIG


def test_eval_with_scenario_file(tmp_path):
    scenario_path = tmp_path / "load.scenario"
    write_scenario(scenario_path, dynamic_load_scenario())
    out = tmp_path / "results"
    code = run(
        [
            "eval", "--policy", "heuristic", "--seed", "2", "--iterations", "1",
            "--scenario-file", str(scenario_path), "--out", str(out),
        ]
    )
    assert code == EXIT_OK


def test_unknown_scenario_is_config_error(tmp_path):
    code = run(
        [
            "eval", "--policy", "heuristic", "--seed", "2",
            "--scenario", "nope", "--out", str(tmp_path / "r"),
        ]
    )
    assert code == EXIT_CONFIG


def test_report_command(tmp_path, capsys):
    out = tmp_path / "results"
    run(["eval", "--policy", "heuristic", "--seed", "3", "--iterations", "1", "--out", str(out)])
    capsys.readouterr()
    assert run(["report", str(out / "kpi.json")]) == EXIT_OK
    table = capsys.readouterr().out
    assert "violations %" in table


def test_compare_emits_plots_and_csv(tmp_path, capsys):
    a = tmp_path / "a"
    b = tmp_path / "b"
    run(["eval", "--policy", "heuristic", "--seed", "3", "--iterations", "1", "--out", str(a)])
    run(["eval", "--policy", "heuristic", "--seed", "4", "--iterations", "1", "--out", str(b)])
    plots = tmp_path / "plots"
    code = run(["compare", str(a / "kpi.json"), str(b / "kpi.json"), "--out", str(plots)])
    assert code == EXIT_OK
    assert (plots / "dynamic-load_response.png").is_file()
    assert (plots / "dynamic-load_response.csv").is_file()
    assert (plots / "dynamic-load_utilization.png").is_file()
    csv_text = (plots / "dynamic-load_response.csv").read_text()
    assert csv_text.splitlines()[0] == "policy,service,tick,value"


def test_compare_mismatched_scenarios_is_config_error(tmp_path, capsys):
    a = tmp_path / "a"
    b = tmp_path / "b"
    run(["eval", "--policy", "heuristic", "--seed", "3", "--iterations", "1", "--out", str(a)])
    run(
        [
            "eval", "--policy", "heuristic", "--seed", "3", "--iterations", "1",
            "--scenario", "scalability", "--out", str(b),
        ]
    )
    code = run(["compare", str(a / "kpi.json"), str(b / "kpi.json")])
    assert code == EXIT_CONFIG


def test_missing_report_file_is_config_error(tmp_path):
    assert run(["report", str(tmp_path / "absent.json")]) == EXIT_CONFIG


def test_eval_workers_match_serial(tmp_path):
    base = ["eval", "--policy", "heuristic", "--seed", "13", "--iterations", "3"]
    serial, parallel = tmp_path / "serial", tmp_path / "parallel"
    assert run(base + ["--out", str(serial)]) == EXIT_OK
    assert run(base + ["--workers", "2", "--out", str(parallel)]) == EXIT_OK
    assert (serial / "kpi.json").read_bytes() == (parallel / "kpi.json").read_bytes()
