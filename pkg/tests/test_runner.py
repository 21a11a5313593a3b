import csv
import json

import numpy as np
import pytest

from bayescp.oracle import coverage_error, regret
from bayescp.runner import CSV_COLUMNS, monotonicity_scan, run_episode, run_episodes

ALT = {"kind": "alternating", "T": 1000}


class TestMonotonicityScan:
    def test_counts_rounds(self):
        th = np.array([[0.1, 0.2, 0.3], [0.3, 0.2, 0.4], [0.5, 0.4, 0.3]])
        assert monotonicity_scan(th, [0.1, 0.5, 0.9]) == 2

    def test_unsorted_levels(self):
        th = np.array([[0.9, 0.1], [0.1, 0.9]])
        assert monotonicity_scan(th, [0.8, 0.2]) == 1

    def test_single_level(self):
        with pytest.raises(ValueError, match="need >= 2 levels"):
            monotonicity_scan(np.zeros((3, 1)), [0.5])


class TestRunEpisode:
    def test_bayesian_alternating(self):
        rep = run_episode({"algorithm": "bayesian"}, ALT, [0.5])
        assert rep.regret_curves[0.5][-1] <= 5 * np.sqrt(1000)
        assert len(rep.regret_curves[0.5]) == 1000 and len(rep.coverage_error_curves[0.5]) == 1000
        assert rep.monotonicity_violations is None

    def test_erm_alternating(self):
        rep = run_episode({"algorithm": "erm"}, ALT, [0.5])
        assert rep.regret_curves[0.5][-1] >= 200

    def test_curves_match_oracle(self):
        rep = run_episode({"algorithm": "ogd"}, {"kind": "iid_uniform", "T": 500, "seed": 4}, [0.3, 0.9])
        for a in rep.levels:
            recs = rep.records(a)
            assert rep.regret_curves[a][-1] == pytest.approx(regret(recs), abs=1e-9)
            assert rep.coverage_error_curves[a][-1] == pytest.approx(coverage_error(recs))

    def test_protocol_matches_batch(self):
        for algo in ("quantized", "multiogd"):
            a = run_episode({"algorithm": algo}, {"kind": "iid_uniform", "T": 300}, [0.2, 0.8])
            b = run_episode({"algorithm": algo}, {"kind": "iid_uniform", "T": 300}, [0.2, 0.8], protocol=True)
            assert np.array_equal(a.thresholds, b.thresholds)

    def test_scores_read_only(self):
        rep = run_episode({"algorithm": "bayesian"}, {"kind": "iid_uniform", "T": 10}, [0.5])
        with pytest.raises(ValueError):
            rep.scores[0] = 0.0

    @pytest.mark.parametrize("levels", [[], [0.5, 0.5], [1.2]])
    def test_bad_levels(self, levels):
        with pytest.raises(ValueError):
            run_episode({"algorithm": "bayesian"}, ALT, levels)

    def test_mismatched_R(self):
        with pytest.raises(ValueError, match="differs"):
            run_episode({"algorithm": "bayesian", "R": 2.0}, ALT, [0.5])


class TestOutput:
    def test_files(self, tmp_path):
        rep = run_episode({"algorithm": "bayesian"}, {"kind": "alternating", "T": 50}, [0.5, 0.9])
        csv_path, json_path = rep.write(tmp_path)
        rows = list(csv.reader(open(csv_path)))
        assert tuple(rows[0]) == CSV_COLUMNS
        assert len(rows) == 1 + 50 * 2
        assert rows[1] == ["1", "0.5", "0.5", "1.0", "0.25", "0"]
        summary = json.loads(json_path.read_text())
        assert summary["T"] == 50 and "wall_time" not in json.dumps(summary)
        assert set(summary["per_level"]) == {"0.5", "0.9"}
        curves = list(csv.reader(open(rep.write_curves(tmp_path))))
        assert len(curves) == 51 and len(curves[0]) == 5

    def test_replay_byte_identical(self, tmp_path):
        cfg = {"algorithm": "discounted", "beta": 0.9}
        seq = {"kind": "iid_uniform", "T": 400, "seed": 9}
        for d in ("a", "b"):
            run_episode(cfg, seq).write(tmp_path / d)
        for name in ("discounted.csv", "discounted.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_parallel_keeps_order(self):
        jobs = [({"algorithm": a}, {"kind": "iid_uniform", "T": 200}, [0.5, 0.7]) for a in ("ogd", "erm", "bayesian")]
        serial = run_episodes(jobs, 1)
        parallel = run_episodes(jobs, 3)
        assert [r.algorithm for r in parallel] == ["ogd", "erm", "bayesian"]
        for s, p in zip(serial, parallel):
            assert np.array_equal(s.thresholds, p.thresholds)
