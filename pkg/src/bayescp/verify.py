"""Randomized equivalence batteries: belief engines against the brute-force oracle."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass

import numpy as np

from .core import Prior
from .datagen import make_rng
from .engines import DiscountedBelief, ExactBelief, SqrtSchedule, discounted_lambda
from .oracle import DEFAULT_RESOLUTION, DiscountedObjective, FtrlObjective, minimize_objective

SANDWICH_LEVELS = tuple(round(0.05 * k, 2) for k in range(1, 20))


@dataclass
class BatteryResult:
    name: str
    instances: int
    max_deviation: float
    tolerance: float
    violations: int

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"{status} {self.name}: instances={self.instances} max_deviation={self.max_deviation:.3e} "
            f"tolerance={self.tolerance:.3e} violations={self.violations}"
        )


def random_prior(rng: np.random.Generator, R: float, two_piece: bool) -> Prior:
    if not two_piece:
        return Prior.uniform(R)
    knot = float(rng.uniform(0.2, 0.8)) * R
    mass = float(rng.uniform(0.2, 0.8))
    return Prior([(0.0, 0.0), (knot, mass), (R, 1.0)])


def ftrl_battery(instances: int = 200, seed: int = 0, resolution: int = DEFAULT_RESOLUTION) -> BatteryResult:
    """Exact-engine quantile vs. dense-scan FTRL minimizer with the ``1/sqrt(t)`` schedule."""
    if instances < 1:
        raise ValueError("instances must be >= 1")
    rng = make_rng(seed)
    worst, bad = 0.0, 0
    for k in range(instances):
        R = float(rng.choice([1.0, 2.5]))
        prior = random_prior(rng, R, two_piece=bool(k % 2))
        t = int(rng.integers(1, 31))
        alpha = float(rng.random())
        scores = rng.random(t - 1) * R
        engine = ExactBelief(prior, SqrtSchedule())
        engine.observe_many(scores)
        got = engine.quantile(alpha)
        want = minimize_objective(FtrlObjective(prior, alpha, scores, SqrtSchedule()(t)), resolution)
        dev = abs(got - want)
        worst = max(worst, dev / R)
        bad += dev > 2 * R / (resolution - 1)
    return BatteryResult("theorem1", instances, worst, 2 / (resolution - 1), bad)


def discounted_ftrl_battery(
    instances: int = 200,
    seed: int = 0,
    resolution: int = DEFAULT_RESOLUTION,
    grid_size: int = 1001,
) -> BatteryResult:
    """Discounted-engine quantile vs. dense-scan discounted FTRL minimizer on grid-rounded scores."""
    if instances < 1:
        raise ValueError("instances must be >= 1")
    rng = make_rng(seed)
    worst, bad = 0.0, 0
    for k in range(instances):
        R = float(rng.choice([1.0, 2.5]))
        prior = random_prior(rng, R, two_piece=bool(k % 2))
        t = int(rng.integers(1, 31))
        alpha = float(rng.random())
        beta = float(rng.uniform(0.5, 0.99))
        lam = discounted_lambda(beta)
        scores = rng.random(t - 1) * R
        engine = DiscountedBelief(prior, grid_size, beta, lam)
        engine.observe_many(scores)
        rounded = [engine.round(x) for x in scores]
        got = engine.quantile(alpha)
        want = minimize_objective(DiscountedObjective(prior, alpha, rounded, beta, lam), resolution)
        dev = abs(got - want)
        worst = max(worst, dev / R)
        bad += dev > 2 * R / (resolution - 1)
    return BatteryResult("theorem6", instances, worst, 2 / (resolution - 1), bad)


def sandwich_bounds(alpha: float, t: int) -> tuple[float, float]:
    """Deterministic bounds on ``#{i < t : r*_i <= r_t(alpha)} / (t-1)`` under ``1/sqrt(t)``."""
    slack = 1.0 / (math.sqrt(t) - 1.0)
    return alpha - slack, alpha + slack + 1.0 / (t - 1)


def sandwich_battery(sequences: int = 50, T: int = 500, seed: int = 0, levels=SANDWICH_LEVELS) -> BatteryResult:
    """Count rounds ``t >= 2`` where the pre-coverage of past scores leaves its bounds."""
    if sequences < 1:
        raise ValueError("instances must be >= 1")
    rng = make_rng(seed)
    levels = list(levels)
    violations = 0
    worst = -math.inf
    for _ in range(sequences):
        scores = rng.random(T)
        if len(np.unique(scores)) != T:
            raise RuntimeError("generated sequence has ties")
        thresholds = ExactBelief(Prior.uniform(1.0), SqrtSchedule()).run(scores, levels)
        past: list[float] = []
        for t in range(1, T + 1):
            if t >= 2:
                for j, a in enumerate(levels):
                    frac = bisect.bisect_right(past, thresholds[t - 1, j]) / (t - 1)
                    lo, hi = sandwich_bounds(a, t)
                    worst = max(worst, lo - frac, frac - hi)
                    violations += not (lo <= frac <= hi)
            bisect.insort(past, float(scores[t - 1]))
    return BatteryResult("sandwich", sequences, worst, 0.0, violations)
