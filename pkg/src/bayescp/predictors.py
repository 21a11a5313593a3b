"""Streaming conformal predictors behind one predict/update protocol.

Each round, callers may ``predict`` any number of confidence levels and then
call ``update`` exactly once with the realized score; ``update`` returns one
:class:`PredictorRecord` per level predicted during that round.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import Prior, ScoreDomain, check_alpha, quantile_loss, quantile_rank
from .engines import (
    ConstantSchedule,
    DiscountedBelief,
    ExactBelief,
    QuantizedBelief,
    SqrtSchedule,
    default_grid_size,
    schedule_from_dict,
)


@dataclass(frozen=True)
class PredictorRecord:
    t: int
    alpha: float
    threshold: float
    r_star: float
    loss: float
    covered: bool

    @classmethod
    def build(cls, t: int, alpha: float, threshold: float, r_star: float) -> "PredictorRecord":
        return cls(t, alpha, threshold, r_star, quantile_loss(alpha, threshold, r_star), r_star <= threshold)


class Predictor:
    """Base class: round bookkeeping and record emission."""

    name = "base"

    def __init__(self, R: float = 1.0):
        self.domain = ScoreDomain(R)
        self.R = self.domain.upper_bound
        self.t = 1
        self._pending: dict[float, float] = {}

    def predict(self, alpha: float) -> float:
        alpha = check_alpha(alpha)
        threshold = self._predict(alpha)
        self._pending[alpha] = threshold
        return threshold

    def update(self, r_star: float) -> list[PredictorRecord]:
        r_star = self.domain.validate(r_star)
        records = [PredictorRecord.build(self.t, a, thr, r_star) for a, thr in self._pending.items()]
        self._observe(r_star)
        self._pending = {}
        self.t += 1
        return records

    def run(self, scores, levels) -> np.ndarray:
        """Thresholds for every round and level, shape ``(T, L)``.

        Equivalent to calling ``predict`` on each level and then ``update``;
        subclasses override it with a batched kernel.
        """
        scores = np.asarray(scores, dtype=float)
        out = np.empty((len(scores), len(levels)))
        for i, r_star in enumerate(scores):
            for j, a in enumerate(levels):
                out[i, j] = self.predict(a)
            self.update(float(r_star))
        return out

    def _predict(self, alpha: float) -> float:
        raise NotImplementedError

    def _observe(self, r_star: float) -> None:
        raise NotImplementedError


class _BeliefPredictor(Predictor):
    def __init__(self, engine):
        super().__init__(engine.prior.R)
        self.engine = engine

    def _predict(self, alpha: float) -> float:
        return self.engine.quantile(alpha)

    def _observe(self, r_star: float) -> None:
        self.engine.observe(r_star)

    def run(self, scores, levels) -> np.ndarray:
        scores = np.asarray(scores, dtype=float)
        for r in scores:
            self.domain.validate(r)
        self._pending = {}
        out = self.engine.run(scores, [check_alpha(a) for a in levels])
        self.t += len(scores)
        return out


class BayesianPredictor(_BeliefPredictor):
    name = "bayesian"

    def __init__(self, prior: Prior | None = None, schedule=None):
        super().__init__(ExactBelief(prior, schedule or SqrtSchedule()))


class QuantizedPredictor(_BeliefPredictor):
    name = "quantized"

    def __init__(self, prior: Prior | None = None, grid_size: int = 100, schedule=None):
        super().__init__(QuantizedBelief(prior, grid_size, schedule or SqrtSchedule()))


class DiscountedPredictor(_BeliefPredictor):
    name = "discounted"

    def __init__(
        self,
        prior: Prior | None = None,
        grid_size: int = 100,
        beta: float = 0.99,
        lam: float | None = None,
    ):
        super().__init__(DiscountedBelief(prior, grid_size, beta, lam))


class ERMPredictor(Predictor):
    """Empirical quantile of past scores; the prior's quantile in round 1."""

    name = "erm"

    def __init__(self, prior: Prior | None = None):
        self.prior = prior if prior is not None else Prior.uniform()
        super().__init__(self.prior.R)
        # lam is never used: only the multiset and select() are.
        self._store = ExactBelief(self.prior, ConstantSchedule(0.0))

    def _predict(self, alpha: float) -> float:
        n = self._store.n_observed
        if n == 0:
            return self.prior.inverse_cdf(alpha)
        return self._store.select(quantile_rank(alpha, n))

    def _observe(self, r_star: float) -> None:
        self._store.observe(r_star)

    def run(self, scores, levels) -> np.ndarray:
        scores = np.asarray(scores, dtype=float)
        for r in scores:
            self.domain.validate(r)
        self._pending = {}
        out = self._store._kernel.run_erm(scores, [check_alpha(a) for a in levels])
        self.t += len(scores)
        return out


class OGDPredictor(Predictor):
    """Independent online subgradient descent per queried level.

    Each level starts at ``alpha * R`` and moves by ``eta_t = eta_scale * R / sqrt(t)``
    times the subgradient ``1[r >= r*] - alpha``. Iterates may leave ``[0, R]``.
    """

    name = "ogd"

    def __init__(self, R: float = 1.0, eta_scale: float = 1.0):
        super().__init__(R)
        self.eta_scale = float(eta_scale)
        self.iterates: dict[float, float] = {}

    def eta(self, t: int) -> float:
        return self.eta_scale * self.R / math.sqrt(t)

    def _predict(self, alpha: float) -> float:
        if alpha not in self.iterates:
            self.iterates[alpha] = alpha * self.R
        return self.iterates[alpha]

    def _observe(self, r_star: float) -> None:
        eta = self.eta(self.t)
        for alpha, r in self.iterates.items():
            g = (1.0 if r >= r_star else 0.0) - alpha
            self.iterates[alpha] = r - eta * g

    def run(self, scores, levels) -> np.ndarray:
        scores = np.asarray(scores, dtype=float)
        for r in scores:
            self.domain.validate(r)
        levels = [check_alpha(a) for a in levels]
        for a in levels:
            self._predict(a)
        self._pending = {}
        alphas = list(self.iterates)
        col = [alphas.index(a) for a in levels]
        it = np.array([self.iterates[a] for a in alphas])
        al = np.array(alphas)
        out = np.empty((len(scores), len(levels)))
        for i, r_star in enumerate(scores):
            out[i] = it[col]
            g = np.where(it >= r_star, 1.0, 0.0) - al
            it = it - self.eta(self.t) * g
            self.t += 1
        self.iterates = {a: float(v) for a, v in zip(alphas, it)}
        return out


class MultiOGDPredictor(Predictor):
    """OGD copies on an even grid of target levels with nearest-neighbour routing.

    Levels exactly halfway between two grid points route to the lower one.
    """

    name = "multiogd"

    def __init__(self, R: float = 1.0, grid_points: int = 21, eta_scale: float = 1.0):
        super().__init__(R)
        if grid_points < 2:
            raise ValueError("router grid needs at least 2 points")
        self.levels = np.linspace(0.0, 1.0, grid_points)
        self.eta_scale = float(eta_scale)
        self.iterates = self.levels * self.R

    def eta(self, t: int) -> float:
        return self.eta_scale * self.R / math.sqrt(t)

    def route(self, alpha: float) -> int:
        k = len(self.levels)
        lo = min(int(math.floor(alpha * (k - 1))), k - 1)
        while lo > 0 and self.levels[lo] > alpha:
            lo -= 1
        while lo + 1 < k and self.levels[lo + 1] <= alpha:
            lo += 1
        if lo == k - 1:
            return lo
        return lo + 1 if self.levels[lo + 1] - alpha < alpha - self.levels[lo] else lo

    def _predict(self, alpha: float) -> float:
        return float(self.iterates[self.route(alpha)])

    def _observe(self, r_star: float) -> None:
        g = np.where(self.iterates >= r_star, 1.0, 0.0) - self.levels
        self.iterates = self.iterates - self.eta(self.t) * g

    def run(self, scores, levels) -> np.ndarray:
        scores = np.asarray(scores, dtype=float)
        for r in scores:
            self.domain.validate(r)
        idx = [self.route(check_alpha(a)) for a in levels]
        self._pending = {}
        out = np.empty((len(scores), len(levels)))
        for i, r_star in enumerate(scores):
            out[i] = self.iterates[idx]
            self._observe(float(r_star))
            self.t += 1
        return out


ALGORITHMS = ("bayesian", "quantized", "discounted", "erm", "ogd", "multiogd")


def _load_prior(spec, R: float) -> Prior:
    if spec is None or spec == "uniform":
        return Prior.uniform(R)
    if isinstance(spec, (str, Path)):
        prior = Prior.load(spec)
    else:
        prior = Prior(spec)
    if prior.R != R:
        raise ValueError(f"prior upper bound {prior.R} does not match R = {R}")
    return prior


def make_predictor(config: dict) -> Predictor:
    """Build a predictor from a JSON-style config block.

    Recognized keys: ``algorithm``, ``R``, ``prior`` (knot list or path),
    ``schedule``, ``grid_size``, ``horizon`` (sets the default grid size to
    ``ceil(sqrt(horizon))``), ``beta``, ``lam``, ``eta_scale`` and
    ``router_grid_size``.
    """
    known = {
        "algorithm", "R", "prior", "schedule", "grid_size", "horizon",
        "beta", "lam", "eta_scale", "router_grid_size", "name",
    }
    unknown = set(config) - known
    if unknown:
        raise ValueError(f"unknown predictor config keys: {sorted(unknown)}")
    algo = config.get("algorithm")
    if algo not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algo!r}; expected one of {ALGORITHMS}")
    R = float(config.get("R", 1.0))
    grid_size = config.get("grid_size")
    if grid_size is None:
        horizon = config.get("horizon")
        grid_size = default_grid_size(int(horizon)) if horizon else 100
    grid_size = int(grid_size)
    eta_scale = float(config.get("eta_scale", 1.0))
    if algo == "ogd":
        return OGDPredictor(R, eta_scale)
    if algo == "multiogd":
        return MultiOGDPredictor(R, int(config.get("router_grid_size", 21)), eta_scale)
    prior = _load_prior(config.get("prior"), R)
    if algo == "erm":
        return ERMPredictor(prior)
    if algo == "discounted":
        return DiscountedPredictor(prior, grid_size, float(config.get("beta", 0.99)), config.get("lam"))
    schedule = schedule_from_dict(config.get("schedule"))
    if algo == "bayesian":
        return BayesianPredictor(prior, schedule)
    return QuantizedPredictor(prior, grid_size, schedule)
