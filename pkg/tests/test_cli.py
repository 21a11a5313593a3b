import json
import subprocess
import sys

import pytest

from bayescp.cli import main, merge_levels


def read_all(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir())}


class TestRun:
    def test_rows_per_level(self, tmp_path):
        assert main(["run", "--algo", "bayesian", "--seq", "alternating", "--T", "1000", "--out", str(tmp_path)]) == 0
        lines = (tmp_path / "bayesian.csv").read_text().splitlines()
        assert len(lines) == 1 + 1000 * 3

    def test_one_file_pair_per_algorithm(self, tmp_path):
        argv = ["run", "--algo", "ogd", "--algo", "erm", "--algo", "quantized", "--T", "100", "--out", str(tmp_path)]
        assert main(argv) == 0
        assert sorted(p.name for p in tmp_path.iterdir()) == [
            "erm.csv", "erm.json", "ogd.csv", "ogd.json", "quantized.csv", "quantized.json",
        ]

    def test_duplicate_algorithms_get_distinct_files(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"algorithms": [{"algorithm": "discounted", "beta": 0.9},
                                                  {"algorithm": "discounted", "beta": 0.5}],
                                   "sequence": {"kind": "iid_uniform", "T": 20}}))
        out = tmp_path / "out"
        assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
        assert {"discounted.csv", "discounted_2.csv"} <= {p.name for p in out.iterdir()}

    def test_config_with_flag_overrides(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({
            "algorithms": ["discounted"],
            "sequence": {"kind": "iid_uniform", "T": 50, "seed": 3},
            "levels": [0.2],
            "out": str(tmp_path / "from_config"),
        }))
        out = tmp_path / "flags"
        argv = ["run", "--config", str(cfg), "--T", "30", "--alpha", "0.95", "--beta", "0.8",
                "--grid-size", "7", "--out", str(out)]
        assert main(argv) == 0
        summary = json.loads((out / "discounted.json").read_text())
        assert summary["T"] == 30
        assert summary["levels"] == [0.2, 0.5, 0.7, 0.9, 0.95]
        assert summary["predictor"]["beta"] == 0.8 and summary["predictor"]["grid_size"] == 7
        assert summary["sequence"]["seed"] == 3
        assert not (tmp_path / "from_config").exists()

    def test_csv_scores(self, tmp_path):
        scores = tmp_path / "scores.csv"
        scores.write_text("score\n0.1\n0.9\n0.4\n")
        assert main(["run", "--csv", str(scores), "--out", str(tmp_path / "o")]) == 0
        assert json.loads((tmp_path / "o" / "bayesian.json").read_text())["T"] == 3

    def test_determinism(self, tmp_path):
        argv = ["run", "--algo", "discounted", "--algo", "multiogd", "--seq", "scripted_shift",
                "--T", "500", "--seed", "11", "--alpha", "0.3"]
        assert main(argv + ["--out", str(tmp_path / "a")]) == 0
        assert main(argv + ["--out", str(tmp_path / "b"), "--workers", "2"]) == 0
        assert read_all(tmp_path / "a") == read_all(tmp_path / "b")

    def test_levels_merge(self):
        assert merge_levels(None, [0.9, 0.1]) == [0.1, 0.5, 0.7, 0.9]


class TestExitCodes:
    def test_missing_config(self, tmp_path, capsys):
        assert main(["run", "--config", str(tmp_path / "missing.json")]) == 2
        assert "not found" in capsys.readouterr().err

    @pytest.mark.parametrize(
        "content",
        [
            "{not json",
            "[1, 2]",
            json.dumps({"algorithms": ["bayesian"], "colour": "red"}),
            json.dumps({"algorithms": ["nope"]}),
            json.dumps({"algorithms": [{"algorithm": "bayesian", "eta": 1}]}),
            json.dumps({"sequence": {"kind": "gaussian"}}),
            json.dumps({"levels": [1.5]}),
            json.dumps({"workers": 0}),
        ],
    )
    def test_invalid_config(self, tmp_path, content):
        cfg = tmp_path / "c.json"
        cfg.write_text(content)
        assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
        assert not (tmp_path / "o").exists()

    def test_bad_csv(self, tmp_path):
        scores = tmp_path / "s.csv"
        scores.write_text("0.1\nfoo\n")
        assert main(["run", "--csv", str(scores)]) == 2
        assert main(["run", "--csv", str(tmp_path / "none.csv")]) == 2

    def test_usage_errors(self):
        for argv in (["run", "--algo", "mvp"], ["run", "--T", "0"], ["verify", "all", "--instances", "0"],
                     ["verify", "theorem9"], []):
            with pytest.raises(SystemExit) as exc:
                main(argv)
            assert exc.value.code == 2

    def test_runtime_error(self, tmp_path, monkeypatch):
        import bayescp.cli as cli

        def boom(*_args, **_kwargs):
            raise RuntimeError("disk on fire")

        monkeypatch.setattr(cli, "run_episodes", boom)
        assert main(["run", "--T", "5", "--out", str(tmp_path)]) == 1


class TestVerify:
    @pytest.mark.parametrize("suite", ["theorem1", "theorem6", "sandwich"])
    def test_suites_pass(self, suite, capsys):
        assert main(["verify", suite, "--instances", "5", "--seed", "2"]) == 0
        out = capsys.readouterr().out
        assert out.startswith(f"PASS {suite}") and "max_deviation" in out

    def test_failure_exit(self, monkeypatch, capsys):
        import bayescp.cli as cli
        from bayescp.verify import BatteryResult

        monkeypatch.setattr(cli, "ftrl_battery", lambda n, s: BatteryResult("theorem1", n, 1.0, 2e-5, 3))
        assert main(["verify", "theorem1"]) == 1
        assert "FAIL theorem1" in capsys.readouterr().out


class TestFigure:
    def test_switching(self, tmp_path):
        assert main(["figure", "switching", "--out", str(tmp_path)]) == 0
        summary = json.loads((tmp_path / "switching_summary.json").read_text())
        assert set(summary["algorithms"]) == {"ogd", "erm", "quantized"}
        assert summary["algorithms"]["erm"]["final_regret"]["0.5"] >= 200
        assert (tmp_path / "switching_quantized_curves.csv").exists()

    def test_monotonicity(self, tmp_path):
        assert main(["figure", "monotonicity", "--T", "2000", "--out", str(tmp_path)]) == 0
        algos = json.loads((tmp_path / "monotonicity_summary.json").read_text())["algorithms"]
        assert set(algos) == {"bayesian", "quantized", "discounted", "erm", "multiogd"}
        for name in ("bayesian", "quantized", "discounted", "erm"):
            assert set(algos[name]["violations"].values()) == {0}
        assert sum(algos["multiogd"]["violations"].values()) > 0

    def test_iid_quantiles_deterministic(self, tmp_path):
        for d in ("a", "b"):
            assert main(["figure", "iid_quantiles", "--T", "300", "--seed", "5", "--out", str(tmp_path / d)]) == 0
        assert read_all(tmp_path / "a") == read_all(tmp_path / "b")

    def test_unknown(self, tmp_path):
        assert main(["figure", "heatmap", "--out", str(tmp_path)]) == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "bayescp", "run", "--T", "20", "--out", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "bayesian.csv").exists()
