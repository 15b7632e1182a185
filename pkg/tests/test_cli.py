"""Command-line pipeline: exit codes, report shape, determinism.

Runs go through main(argv) in-process; stdout carries exactly one canonical
JSON document per run (wall time and notes are stderr only), so captured
output can be parsed and compared byte-for-byte across identical runs.
"""

import json

import pytest

from mfcontrol import main

FAST = ["--seed", "3", "--particles", "400", "--steps", "10"]


def run_cli(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def run_json(capsys, argv):
    code, out, _ = run_cli(capsys, argv)
    return code, json.loads(out)


# ---------------------------------------------------------------------------
# argument handling


def test_missing_subcommand_exits_2(capsys):
    assert main([]) == 2


def test_unknown_subcommand_exits_2(capsys):
    assert main(["transmogrify", "--seed", "1"]) == 2


def test_unknown_flag_exits_2(capsys):
    assert main(["simulate", "--scenario", "zero-drift", "--seed", "1",
                 "--frobnicate"]) == 2


def test_seed_is_required(capsys):
    assert main(["simulate", "--scenario", "zero-drift"]) == 2


def test_scenario_and_config_are_exclusive(capsys, tmp_path):
    cfg = tmp_path / "s.json"
    cfg.write_text("{}")
    assert main(["simulate", "--scenario", "zero-drift", "--config", str(cfg),
                 "--seed", "1"]) == 2


def test_version_flag(capsys):
    assert main(["--version"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("mfcontrol ")


def test_list_scenarios(capsys):
    code, out, _ = run_cli(capsys, ["list-scenarios"])
    assert code == 0
    lines = out.strip().splitlines()
    assert len(lines) == 6
    assert any(line.startswith("linear-quadratic") for line in lines)
    assert any("game" in line for line in lines)


@pytest.mark.parametrize("flag,value", [
    ("--particles", "50"),
    ("--steps", "0"),
    ("--tol", "0"),
    ("--basis-degree", "0"),
])
def test_invalid_run_parameters_exit_2(capsys, flag, value):
    assert main(["simulate", "--scenario", "zero-drift", "--seed", "1",
                 flag, value]) == 2


def test_unknown_builtin_exits_2(capsys):
    assert main(["simulate", "--scenario", "nope", "--seed", "1"]) == 2


def test_missing_config_file_exits_2(capsys):
    code, _, err = run_cli(capsys, ["simulate", "--config", "/no/such/file.json",
                                    "--seed", "1"])
    assert code == 2
    assert "configuration error" in err


def test_invalid_config_json_exits_2(capsys, tmp_path):
    cfg = tmp_path / "broken.json"
    cfg.write_text("{not json")
    assert main(["simulate", "--config", str(cfg), *FAST]) == 2


def test_blocked_validation_exits_2_unless_overridden(capsys, tmp_path):
    cfg = tmp_path / "degenerate.json"
    cfg.write_text(json.dumps({
        "kind": "control",
        "name": "no-noise",
        "dimension": 1,
        "initial": [0.0],
        "horizon": 1.0,
        "diffusion": {"kind": "constant", "base": 0.0},
        "statistics": {"mean": {"kind": "identity"}},
        "drift": {},
        "running_cost": {},
        "terminal_cost": {"kind": "linear", "coeff": 1.0},
        "actions": {"lo": -1.0, "hi": 1.0, "count": 3},
    }))
    assert main(["simulate", "--config", str(cfg), *FAST]) == 2
    # the override admits the run, but the runtime singularity guard is not
    # waivable: sigma = 0 is a computation failure, not a config error
    code, _, err = run_cli(capsys, ["simulate", "--config", str(cfg), *FAST,
                                    "--override-validation"])
    assert code == 1
    assert "computation failed" in err
    assert "singular" in err


# ---------------------------------------------------------------------------
# simulate


def test_simulate_emits_canonical_report(capsys):
    code, doc = run_json(capsys, ["simulate", "--scenario", "zero-drift", *FAST])
    assert code == 0
    assert doc["command"] == "simulate"
    assert doc["config"]["seed"] == 3
    assert doc["config"]["particles"] == 400
    assert doc["version"].startswith("mfcontrol ")
    assert doc["wall_time_seconds"] is None
    assert doc["validation"] is not None
    assert abs(doc["results"]["terminal_mean"]) < 0.2
    assert 0.8 < doc["results"]["terminal_std"] < 1.2


def test_simulate_reports_are_byte_identical(capsys):
    _, first, _ = run_cli(capsys, ["simulate", "--scenario", "zero-drift", *FAST])
    _, second, _ = run_cli(capsys, ["simulate", "--scenario", "zero-drift", *FAST])
    assert first == second
    assert first.endswith("\n")


def test_simulate_out_directory_matches_stdout(capsys, tmp_path):
    _, stdout_doc, _ = run_cli(capsys, ["simulate", "--scenario", "zero-drift", *FAST])
    outdir = tmp_path / "run"
    code, out, err = run_cli(capsys, ["simulate", "--scenario", "zero-drift", *FAST,
                                      "--out", str(outdir)])
    assert code == 0
    assert out == ""  # report goes to the file, not stdout
    assert "report written" in err
    assert (outdir / "report.json").read_text() == stdout_doc
    csv_lines = (outdir / "ensemble.csv").read_text().splitlines()
    assert csv_lines[0] == "time,mean_x0,std_x0,mean_running_sup"
    assert len(csv_lines) == 12  # header + N + 1 rows


def test_wall_time_goes_to_stderr_only(capsys):
    _, out, err = run_cli(capsys, ["simulate", "--scenario", "zero-drift", *FAST])
    assert "wall time" in err
    assert "wall time" not in out


# ---------------------------------------------------------------------------
# fixpoint


def test_fixpoint_constant_control(capsys):
    code, doc = run_json(capsys, ["fixpoint", "--scenario", "linear-quadratic",
                                  *FAST, "--control", "constant:0.5"])
    assert code == 0
    res = doc["results"]
    assert res["converged"] is True
    # constant drift: one productive application plus the confirming pass
    assert res["diagnostics"]["iterations"] == 1
    assert res["diagnostics"]["applications"] == 2
    assert abs(res["normalization_horizon"]["mean"] - 1.0) < 0.2
    assert "contraction" in res
    assert abs(res["statistics_horizon"]["mean"] - 0.5) < 0.2


def test_fixpoint_requires_one_control_per_player(capsys):
    assert main(["fixpoint", "--scenario", "linear-quadratic", *FAST]) == 2
    assert main(["fixpoint", "--scenario", "linear-quadratic", *FAST,
                 "--control", "constant:0.5", "--control", "constant:0.1"]) == 2
    assert main(["fixpoint", "--scenario", "separated-game", *FAST,
                 "--control", "constant:0.5"]) == 2


def test_fixpoint_game_takes_a_pair(capsys):
    code, doc = run_json(capsys, ["fixpoint", "--scenario", "separated-game",
                                  *FAST, "--control", "constant:-1",
                                  "--control", "constant:1"])
    assert code == 0
    assert doc["results"]["converged"] is True


def test_fixpoint_writes_trace_tables(capsys, tmp_path):
    outdir = tmp_path / "fp"
    code, _, _ = run_cli(capsys, ["fixpoint", "--scenario", "linear-quadratic",
                                  *FAST, "--control", "constant:0.5",
                                  "--out", str(outdir)])
    assert code == 0
    assert (outdir / "trace.csv").exists()
    stats = (outdir / "statistics.csv").read_text().splitlines()
    assert stats[0] == "time,mean"


# ---------------------------------------------------------------------------
# evaluate


def test_evaluate_lists_control_payoffs(capsys):
    code, doc = run_json(capsys, ["evaluate", "--scenario", "linear-quadratic",
                                  *FAST, "--control", "constant:0",
                                  "--control", "constant:-1"])
    assert code == 0
    rows = doc["results"]["controls"]
    assert [r["label"] for r in rows] == ["const[0]", "const[-1]"]
    # J(0) = 0 and J(-1) = -1/2 up to Monte Carlo noise at 400 particles
    assert abs(rows[0]["payoff"]) < 0.25
    assert abs(rows[1]["payoff"] + 0.5) < 0.25
    assert all(abs(r["normalization_horizon"] - 1.0) < 0.2 for r in rows)


def test_evaluate_requires_controls(capsys):
    assert main(["evaluate", "--scenario", "linear-quadratic", *FAST]) == 2


def test_evaluate_reads_controls_file(capsys, tmp_path):
    listing = tmp_path / "controls.json"
    listing.write_text(json.dumps(["constant:0.25", "parametric:0,1,0"]))
    code, doc = run_json(capsys, ["evaluate", "--scenario", "linear-quadratic",
                                  *FAST, "--controls-file", str(listing)])
    assert code == 0
    assert len(doc["results"]["controls"]) == 2

    bad = tmp_path / "notalist.json"
    bad.write_text(json.dumps({"u": "constant:1"}))
    assert main(["evaluate", "--scenario", "linear-quadratic", *FAST,
                 "--controls-file", str(bad)]) == 2


def test_evaluate_game_pairs_from_file(capsys, tmp_path):
    listing = tmp_path / "pairs.json"
    listing.write_text(json.dumps([{"u": "constant:-1", "v": "constant:1"}]))
    code, doc = run_json(capsys, ["evaluate", "--scenario", "separated-game",
                                  *FAST, "--controls-file", str(listing)])
    assert code == 0
    rows = doc["results"]["controls"]
    assert rows[0]["label"] == "(const[-1], const[1])"


def test_evaluate_game_rejects_odd_control_count(capsys):
    assert main(["evaluate", "--scenario", "separated-game", *FAST,
                 "--control", "constant:1"]) == 2


def test_evaluate_bad_control_spec_exits_2(capsys):
    assert main(["evaluate", "--scenario", "linear-quadratic", *FAST,
                 "--control", "banana:1"]) == 2


# ---------------------------------------------------------------------------
# optimize and game


def test_optimize_linear_quadratic(capsys):
    code, doc = run_json(capsys, ["optimize", "--scenario", "linear-quadratic",
                                  *FAST])
    assert code == 0
    res = doc["results"]
    assert res["converged"] is True
    assert abs(res["y0"] + 0.5) < 0.25
    assert res["outer_iterations"] >= 1


def test_optimize_rejects_games(capsys):
    assert main(["optimize", "--scenario", "separated-game", *FAST]) == 2


def test_game_certifies_separated_scenario(capsys):
    code, doc = run_json(capsys, ["game", "--scenario", "separated-game", *FAST])
    assert code == 0
    res = doc["results"]
    assert res["aborted"] is False
    assert res["isaacs"]["max_gap"] == 0.0
    assert res["deviations"]["passed"] is True
    assert abs(res["saddle"]["value"]) < 0.25


def test_game_aborts_on_bilinear_scenario(capsys):
    code, doc = run_json(capsys, ["game", "--scenario", "bilinear-game", *FAST])
    assert code == 1
    assert doc["results"]["aborted"] is True
    assert doc["results"]["isaacs"]["max_gap"] == 2.0


def test_game_rejects_single_player_scenarios(capsys):
    assert main(["game", "--scenario", "linear-quadratic", *FAST]) == 2


def test_game_writes_deviation_table(capsys, tmp_path):
    outdir = tmp_path / "game"
    code, _, _ = run_cli(capsys, ["game", "--scenario", "separated-game", *FAST,
                                  "--out", str(outdir)])
    assert code == 0
    lines = (outdir / "deviations.csv").read_text().splitlines()
    assert lines[0] == "side,label,payoff,stderr,slack,ok"
    assert len(lines) == 23  # header + 11 u rows + 11 v rows


# ---------------------------------------------------------------------------
# verify


def test_verify_reports_ten_criteria(capsys):
    code, doc = run_json(capsys, ["verify", *FAST])
    assert code in (0, 1)  # tiny scale need not pass every tolerance
    criteria = doc["results"]["criteria"]
    assert len(criteria) == 10
    assert [c["index"] for c in criteria] == list(range(1, 11))
    assert doc["results"]["passed_count"] == sum(c["passed"] for c in criteria)


def test_verify_runs_are_reproducible(capsys, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    code_a, _, _ = run_cli(capsys, ["verify", *FAST, "--out", str(a)])
    code_b, _, _ = run_cli(capsys, ["verify", *FAST, "--out", str(b)])
    assert code_a == code_b
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    assert (a / "criteria.csv").read_bytes() == (b / "criteria.csv").read_bytes()
