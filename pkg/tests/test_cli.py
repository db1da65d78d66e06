"""Command line behavior: exit codes, report files, and the repl loop."""

from __future__ import annotations

import json
import os

from click.testing import CliRunner

from oneedit.cli import cli, entrypoint
from oneedit.fixtures import FILES


def fixture_flags(fixture) -> list[str]:
    return [
        "--kg", fixture.files["kg"],
        "--schema", fixture.files["schema"],
        "--rules", fixture.files["rules"],
        "--aliases", fixture.files["aliases"],
    ]


class TestExitCodes:
    def test_fixture_generation_succeeds_and_prints_the_manifest(self, tmp_path, capsys):
        out = str(tmp_path / "fx")
        code = entrypoint([
            "fixture", "--seed", "7", "--out", out,
            "--subjects", "3", "--locality-cases", "5", "--users", "2",
        ])
        assert code == 0
        stdout = capsys.readouterr().out
        manifest = json.loads(stdout)
        assert manifest["seed"] == 7
        assert manifest["sizes"]["subjects"] == 3
        for name in ("kg", "schema", "rules", "aliases", "single_user", "multi_user_2"):
            assert os.path.exists(os.path.join(out, FILES[name]))
        assert not os.path.exists(os.path.join(out, FILES["multi_user_3"]))

    def test_usage_errors_exit_1(self, capsys):
        assert entrypoint(["eval"]) == 1          # --scenario is required
        assert entrypoint(["no-such-command"]) == 1
        assert entrypoint(["repl"]) == 1          # --kg/--schema missing
        assert "error:" in capsys.readouterr().err

    def test_infeasible_fixture_exits_2(self, tmp_path, capsys):
        code = entrypoint(["fixture", "--out", str(tmp_path / "x"), "--rules", "0"])
        assert code == 2
        assert "rules=0" in capsys.readouterr().err

    def test_unreadable_scenario_exits_2(self, tmp_path):
        assert entrypoint(["eval", "--scenario", str(tmp_path / "missing.json")]) == 2

    def test_failed_scenario_assertions_exit_3(self, tmp_path, small_fixture, capsys):
        doc = {
            "steps": [{"user": "u1", "utterance": "Set S00 head to B00"}],
            "config": {"augment_n": 0},
            "fixtures": {
                "kg": small_fixture.files["kg"],
                "schema": small_fixture.files["schema"],
                "rules": small_fixture.files["rules"],
                "cases": small_fixture.files["cases_single"],
            },
            "assertions": {"one_hop": {"min": "0.9"}},
        }
        path = tmp_path / "strict.json"
        path.write_text(json.dumps(doc))
        out = str(tmp_path / "reports")
        assert entrypoint(["eval", "--scenario", str(path), "--out", out]) == 3
        assert "one_hop" in capsys.readouterr().err
        # the report is still written for post-mortems
        assert os.path.exists(os.path.join(out, "report.json"))


class TestEvalCommand:
    def test_csv_row_lands_on_stdout_and_in_files(self, tmp_path, small_fixture, capsys):
        scenario = small_fixture.files["single_user"]
        out = str(tmp_path / "reports")
        code = entrypoint(["--augment-n", "20", "eval", "--scenario", scenario, "--out", out])
        assert code == 0
        stdout = capsys.readouterr().out
        lines = stdout.splitlines()
        assert lines[0] == "Method,Reliability,Locality,Reverse,One-Hop,Sub-Replace,Average"
        assert lines[1] == "codebook+controller,1.000,1.000,1.000,1.000,1.000,1.000"
        with open(os.path.join(out, "report.csv"), "r", encoding="utf-8") as fh:
            assert fh.read() == stdout
        with open(os.path.join(out, "report.json"), "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        assert doc["metrics"]["reliability"]["rendered"] == "1.000"

    def test_flag_overrides_relabel_the_ablation_row(self, small_fixture, capsys):
        scenario = small_fixture.files["single_user"]
        code = entrypoint([
            "--backend", "direct", "--noise-rate", "0",
            "eval", "--scenario", scenario, "--no-controller",
        ])
        assert code == 0
        row = capsys.readouterr().out.splitlines()[1]
        assert row.startswith("direct,1.000,1.000,0.000,0.000,0.000,")

    def test_method_label_flag_wins(self, small_fixture, capsys):
        scenario = small_fixture.files["single_user"]
        assert entrypoint(["eval", "--scenario", scenario, "--method", "row-7"]) == 0
        assert capsys.readouterr().out.splitlines()[1].startswith("row-7,")


class TestSweepCommand:
    def test_table_and_files(self, tmp_path, small_fixture, capsys):
        scenario = small_fixture.files["single_user"]
        out = str(tmp_path / "sweeps")
        code = entrypoint(["sweep", "--scenario", scenario, "--n", "0,20", "--out", out])
        assert code == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "n,One-Hop,Reliability,Locality,Reverse,Sub-Replace,Average"
        assert lines[1].startswith("0,0.000,")
        assert lines[2].startswith("20,1.000,")
        with open(os.path.join(out, "sweep.json"), "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        assert doc["n_values"] == [0, 20]
        assert os.path.exists(os.path.join(out, "sweep.csv"))

    def test_malformed_budget_lists_are_usage_errors(self, small_fixture):
        scenario = small_fixture.files["single_user"]
        assert entrypoint(["sweep", "--scenario", scenario, "--n", "8,2"]) == 1
        assert entrypoint(["sweep", "--scenario", scenario, "--n", "a,b"]) == 1
        assert entrypoint(["sweep", "--scenario", scenario, "--n", ""]) == 1


class TestRepl:
    def test_edit_query_history_rollback_quit(self, small_fixture):
        runner = CliRunner()
        script = "\n".join([
            "Set S00 head to B00",
            ":history",
            ":query S00 | head",
            "Who is the head of S00?",
            ":rollback e999999-00000000-u1",
            ":query S00",
            "",
            ":quit",
        ]) + "\n"
        result = runner.invoke(cli, fixture_flags(small_fixture) + ["repl"], input=script)
        assert result.exit_code == 0
        out = result.output
        assert "conflict=Coverage" in out
        assert "  + e" in out
        assert "Active" in out                      # :history row
        assert "B00 (weight" in out                 # :query hit
        assert "[generate] B00" in out              # question passthrough answers
        assert "error:" in out                      # bad rollback key is reported, not fatal
        assert "usage: :query" in out               # malformed meta command

    def test_strict_mode_rejections_are_printed(self, small_fixture):
        runner = CliRunner()
        result = runner.invoke(
            cli, fixture_flags(small_fixture) + ["--strict", "repl"],
            input="Set S00 head to B00\n:quit\n",
        )
        assert result.exit_code == 0
        assert "rejected:" in result.output
