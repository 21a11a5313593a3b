"""Episode driver: predictor vs. score sequence, metrics, and result files."""

from __future__ import annotations

import csv
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .core import check_alpha, quantile_loss_array
from .datagen import SequenceSpec, generate
from .predictors import PredictorRecord, make_predictor

logger = logging.getLogger(__name__)

DEFAULT_LEVELS = (0.5, 0.7, 0.9)
CSV_COLUMNS = ("t", "alpha", "threshold", "r_star", "loss", "covered")


def _fmt(x: float) -> str:
    return repr(float(x))


def monotonicity_scan(thresholds, levels) -> int:
    """Rounds in which some higher level received a strictly smaller threshold."""
    levels = [check_alpha(a) for a in levels]
    if len(set(levels)) < 2:
        raise ValueError("need >= 2 levels")
    thresholds = np.asarray(thresholds, dtype=float)
    order = np.argsort(levels, kind="stable")
    th = thresholds[:, order]
    running_max = np.maximum.accumulate(th, axis=1)
    return int(np.any(th[:, 1:] < running_max[:, :-1], axis=1).sum())


@dataclass
class EpisodeReport:
    algorithm: str
    predictor_config: dict
    sequence: dict
    levels: list[float]
    scores: np.ndarray
    thresholds: np.ndarray
    regret_curves: dict[float, np.ndarray] = field(default_factory=dict)
    coverage_error_curves: dict[float, np.ndarray] = field(default_factory=dict)
    monotonicity_violations: int | None = None
    wall_time: float = 0.0

    @property
    def T(self) -> int:
        return len(self.scores)

    def column(self, alpha: float) -> np.ndarray:
        return self.thresholds[:, self.levels.index(alpha)]

    def records(self, alpha: float | None = None) -> list[PredictorRecord]:
        out = []
        levels = self.levels if alpha is None else [alpha]
        for t in range(self.T):
            for a in levels:
                out.append(PredictorRecord.build(t + 1, a, float(self.column(a)[t]), float(self.scores[t])))
        return out

    def violations(self, levels) -> int:
        cols = np.column_stack([self.column(a) for a in levels])
        return monotonicity_scan(cols, levels)

    def summary(self) -> dict:
        """Machine-readable results; excludes wall time so reruns are byte-identical."""
        per_level = {}
        for a in self.levels:
            covered = self.scores <= self.column(a)
            per_level[_fmt(a)] = {
                "regret": float(self.regret_curves[a][-1]),
                "coverage": float(covered.mean()),
                "coverage_error": float(self.coverage_error_curves[a][-1]),
                "total_loss": float(quantile_loss_array(a, self.column(a), self.scores).sum()),
            }
        return {
            "algorithm": self.algorithm,
            "predictor": self.predictor_config,
            "sequence": self.sequence,
            "T": self.T,
            "levels": self.levels,
            "monotonicity_violations": self.monotonicity_violations,
            "per_level": per_level,
        }

    def write(self, out_dir: str | Path, stem: str | None = None) -> tuple[Path, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        stem = stem or self.algorithm
        csv_path = out_dir / f"{stem}.csv"
        json_path = out_dir / f"{stem}.json"
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for t in range(self.T):
                r_star = float(self.scores[t])
                for j, a in enumerate(self.levels):
                    thr = float(self.thresholds[t, j])
                    loss = ((1.0 if thr >= r_star else 0.0) - a) * (thr - r_star)
                    writer.writerow(
                        (t + 1, _fmt(a), _fmt(thr), _fmt(r_star), _fmt(loss), int(r_star <= thr))
                    )
        json_path.write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")
        return csv_path, json_path

    def write_curves(self, out_dir: str | Path, stem: str | None = None) -> Path:
        """Per-round regret and coverage-error curves, one column pair per level."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / f"{stem or self.algorithm}_curves.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            header = ["t"]
            for a in self.levels:
                header += [f"regret@{_fmt(a)}", f"coverage_error@{_fmt(a)}"]
            writer.writerow(header)
            for t in range(self.T):
                row = [t + 1]
                for a in self.levels:
                    row += [_fmt(self.regret_curves[a][t]), _fmt(self.coverage_error_curves[a][t])]
                writer.writerow(row)
        return path


def run_episode(
    predictor_config: dict,
    sequence: SequenceSpec | dict,
    levels=DEFAULT_LEVELS,
    *,
    protocol: bool = False,
) -> EpisodeReport:
    """Run predict-then-update for every round and compute all metrics.

    ``protocol=True`` drives the predictor through ``predict``/``update``
    calls; otherwise its batched ``run`` path is used. Both give identical
    thresholds.
    """
    if isinstance(sequence, dict):
        sequence = SequenceSpec.from_dict(sequence)
    levels = [check_alpha(a) for a in levels]
    if not levels:
        raise ValueError("need at least one query level")
    if len(set(levels)) != len(levels):
        raise ValueError("query levels must be distinct")
    scores = generate(sequence)
    scores.setflags(write=False)
    cfg = dict(predictor_config)
    cfg.setdefault("R", sequence.R)
    cfg.setdefault("horizon", len(scores))
    if float(cfg["R"]) != sequence.R:
        raise ValueError(f"predictor R = {cfg['R']} differs from sequence R = {sequence.R}")
    predictor = make_predictor(cfg)

    start = time.perf_counter()
    if protocol:
        thresholds = np.empty((len(scores), len(levels)))
        for i, r_star in enumerate(scores):
            for j, a in enumerate(levels):
                thresholds[i, j] = predictor.predict(a)
            predictor.update(float(r_star))
    else:
        thresholds = predictor.run(scores, levels)

    report = EpisodeReport(
        algorithm=cfg.get("name", cfg["algorithm"]),
        predictor_config=cfg,
        sequence=sequence.to_dict(),
        levels=levels,
        scores=scores,
        thresholds=thresholds,
    )
    t = np.arange(1, len(scores) + 1)
    for j, a in enumerate(levels):
        report.regret_curves[a] = kernels.regret_curve(scores, thresholds[:, j], a)
        covered = np.cumsum(scores <= thresholds[:, j])
        report.coverage_error_curves[a] = np.abs(a - covered / t)
    if len(levels) >= 2:
        report.monotonicity_violations = monotonicity_scan(thresholds, levels)
    report.wall_time = time.perf_counter() - start
    logger.info("%s: T=%d in %.3fs", report.algorithm, report.T, report.wall_time)
    return report


def _run_job(job):
    return run_episode(*job)


def run_episodes(jobs, workers: int = 1) -> list[EpisodeReport]:
    """Run ``(predictor_config, sequence, levels)`` jobs; results keep job order."""
    jobs = list(jobs)
    if workers <= 1 or len(jobs) <= 1:
        return [_run_job(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_job, jobs))
