"""Prior-regularized beliefs over past scores and their quantile heads.

Three flavours share one interface:

* :class:`ExactBelief` keeps every observed score (order-statistic tree).
* :class:`QuantizedBelief` rounds scores to an ``m``-point grid first.
* :class:`DiscountedBelief` keeps geometrically discounted grid weights and
  mixes the prior back in with constant weight.

The belief at round ``t`` is ``lam_t * prior + (1 - lam_t) * empirical`` and a
query for level ``alpha`` returns the smallest ``r`` whose mixed CDF reaches
``alpha``.
"""

from __future__ import annotations

import json
import logging
import math
from typing import Any

import numpy as np

from . import kernels
from .core import Prior, ScoreDomain, check_alpha

logger = logging.getLogger(__name__)

SNAPSHOT_FORMAT = "bayescp-engine"
SNAPSHOT_VERSION = 1


def discounted_lambda(beta: float) -> float:
    """Constant mixing weight ``sqrt(1-beta) / (beta + sqrt(1-beta))`` paired with discount ``beta``."""
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    s = math.sqrt(1.0 - beta)
    return s / (beta + s)


class SqrtSchedule:
    """``lam_t = 1 / sqrt(t)``; equals 1 at ``t = 1``."""

    kind = "sqrt"

    def __call__(self, t: int) -> float:
        if t < 1:
            raise ValueError("round index starts at 1")
        return 1.0 / math.sqrt(t)

    def to_dict(self) -> dict:
        return {"kind": self.kind}

    def __eq__(self, other: object) -> bool:
        return isinstance(other, SqrtSchedule)

    def __repr__(self) -> str:
        return "SqrtSchedule()"


class ConstantSchedule:
    """Fixed mixing weight for every round."""

    kind = "constant"

    def __init__(self, value: float):
        if not 0.0 <= value <= 1.0:
            raise ValueError("mixing weight must lie in [0, 1]")
        self.value = float(value)

    @classmethod
    def from_beta(cls, beta: float) -> "ConstantSchedule":
        return cls(discounted_lambda(beta))

    def __call__(self, t: int) -> float:
        if t < 1:
            raise ValueError("round index starts at 1")
        return self.value

    def to_dict(self) -> dict:
        return {"kind": self.kind, "value": self.value}

    def __eq__(self, other: object) -> bool:
        return isinstance(other, ConstantSchedule) and other.value == self.value

    def __repr__(self) -> str:
        return f"ConstantSchedule({self.value!r})"


def schedule_from_dict(data: dict | str | None):
    if data is None:
        return SqrtSchedule()
    if isinstance(data, str):
        data = {"kind": data}
    kind = data.get("kind")
    if kind == "sqrt":
        return SqrtSchedule()
    if kind == "constant":
        if "value" in data:
            return ConstantSchedule(data["value"])
        if "beta" in data:
            return ConstantSchedule.from_beta(data["beta"])
        raise ValueError("constant schedule needs 'value' or 'beta'")
    raise ValueError(f"unknown schedule kind {kind!r}")


def step_size(schedule: str | Any, t: int, beta: float | None = None) -> float:
    """Mixing weight for round ``t``.

    ``schedule`` is a schedule object or one of ``"sqrt"`` / ``"constant"``;
    the string form of the constant schedule derives its value from ``beta``.
    """
    if schedule == "sqrt":
        schedule = SqrtSchedule()
    elif schedule == "constant":
        if beta is None:
            raise ValueError("constant schedule needs beta")
        schedule = ConstantSchedule.from_beta(beta)
    return schedule(t)


def default_grid_size(horizon: int) -> int:
    """``ceil(sqrt(T))`` grid points, at least 2."""
    return max(2, math.ceil(math.sqrt(horizon)))


class _Belief:
    kind = ""

    def __init__(self, prior: Prior | None, schedule, kernel):
        self.prior = prior if prior is not None else Prior.uniform()
        self.domain = ScoreDomain(self.prior.R)
        self.schedule = schedule
        self._kernel = kernel
        self._warned = False

    @property
    def n_observed(self) -> int:
        return int(self._kernel.size)

    @property
    def t(self) -> int:
        """Index of the upcoming round."""
        return self.n_observed + 1

    def lam(self) -> float:
        return self.schedule(self.t)

    def _resolve_lam(self, lam: float | None) -> float:
        lam = self.lam() if lam is None else float(lam)
        if self.n_observed == 0 and lam < 1.0 and not self._warned:
            logger.warning(
                "mixing weight %s < 1 with no observations; using the prior alone", lam
            )
            self._warned = True
        return lam

    def observe(self, r_star: float) -> None:
        self._kernel.insert(self.domain.validate(r_star))

    def observe_many(self, scores) -> None:
        arr = np.asarray(scores, dtype=float)
        if arr.size and (not np.all(np.isfinite(arr)) or arr.min() < 0 or arr.max() > self.prior.R):
            raise ValueError(f"scores must lie in [0, {self.prior.R}]")
        self._kernel.insert_many(arr)

    def quantile(self, alpha: float, lam: float | None = None) -> float:
        """Smallest ``r`` with belief CDF ``>= alpha``."""
        return self._kernel.quantile(check_alpha(alpha), self._resolve_lam(lam))

    def cdf(self, r: float, lam: float | None = None) -> float:
        return self._kernel.cdf(float(r), self._resolve_lam(lam))

    def _lams(self, T: int) -> np.ndarray:
        start = self.t
        return np.array([self.schedule(start + i) for i in range(T)], dtype=float)

    def run(self, scores, levels) -> np.ndarray:
        """Query every level then observe, round by round; returns a ``(T, L)`` array."""
        scores = np.asarray(scores, dtype=float)
        if scores.size and (scores.min() < 0 or scores.max() > self.prior.R):
            raise ValueError(f"scores must lie in [0, {self.prior.R}]")
        levels = [check_alpha(a) for a in levels]
        if scores.size:
            self._resolve_lam(None)
        return self._kernel.run(scores, levels, self._lams(len(scores)))

    def _base_snapshot(self) -> dict:
        return {
            "format": SNAPSHOT_FORMAT,
            "version": SNAPSHOT_VERSION,
            "kind": self.kind,
            "prior": self.prior.knots,
            "schedule": self.schedule.to_dict(),
        }

    def dumps(self) -> str:
        return json.dumps(self.snapshot(), sort_keys=True)


class ExactBelief(_Belief):
    """Mixture of the prior with the empirical distribution of every past score."""

    kind = "exact"

    def __init__(self, prior: Prior | None = None, schedule=None):
        prior = prior if prior is not None else Prior.uniform()
        super().__init__(prior, schedule or SqrtSchedule(), kernels.ExactKernel(prior))

    def rank(self, r: float) -> int:
        return int(self._kernel.rank(float(r)))

    def select(self, k: int) -> float:
        return float(self._kernel.select(int(k)))

    def items(self):
        """Distinct observed scores in increasing order with multiplicities."""
        return self._kernel.items()

    def snapshot(self) -> dict:
        values, counts = self.items()
        data = self._base_snapshot()
        data["values"] = [float(v) for v in values]
        data["counts"] = [int(c) for c in counts]
        return data


class _GridMixin:
    grid_size: int
    prior: Prior

    def round(self, r: float) -> float:
        """Grid point the score ``r`` is stored as."""
        return kernels.grid_value(kernels.grid_index(float(r), self.prior.R, self.grid_size), self.prior.R, self.grid_size)

    def grid(self) -> np.ndarray:
        return np.array([kernels.grid_value(j, self.prior.R, self.grid_size) for j in range(self.grid_size)])


class QuantizedBelief(_GridMixin, _Belief):
    """Exact belief over scores rounded to ``m`` evenly spaced points on ``[0, R]``."""

    kind = "quantized"

    def __init__(self, prior: Prior | None = None, grid_size: int = 100, schedule=None):
        prior = prior if prior is not None else Prior.uniform()
        super().__init__(prior, schedule or SqrtSchedule(), kernels.GridKernel(prior, grid_size))
        self.grid_size = int(grid_size)

    def counts(self) -> np.ndarray:
        return self._kernel.counts()

    def snapshot(self) -> dict:
        data = self._base_snapshot()
        data["grid_size"] = self.grid_size
        data["counts"] = [int(c) for c in self.counts()]
        return data


class DiscountedBelief(_GridMixin, _Belief):
    """Prior mixed with geometrically discounted grid weights.

    After ``n`` observations the discounted distribution carries prior mass
    ``beta**n`` and cell weights summing to ``1 - beta**n``; the belief mixes
    it with the prior at the constant weight ``lam``.
    """

    kind = "discounted"

    def __init__(
        self,
        prior: Prior | None = None,
        grid_size: int = 100,
        beta: float = 0.99,
        lam: float | None = None,
    ):
        prior = prior if prior is not None else Prior.uniform()
        schedule = ConstantSchedule(discounted_lambda(beta) if lam is None else lam)
        super().__init__(prior, schedule, kernels.DiscountedKernel(prior, grid_size, beta))
        self.grid_size = int(grid_size)
        self.beta = float(beta)

    @property
    def prior_weight(self) -> float:
        return float(self._kernel.prior_weight)

    def weights(self) -> np.ndarray:
        return self._kernel.weights()

    def _resolve_lam(self, lam: float | None) -> float:
        # the discounted distribution itself starts as the prior, so nothing is degenerate
        return self.lam() if lam is None else float(lam)

    def run(self, scores, levels) -> np.ndarray:
        scores = np.asarray(scores, dtype=float)
        if scores.size and (scores.min() < 0 or scores.max() > self.prior.R):
            raise ValueError(f"scores must lie in [0, {self.prior.R}]")
        levels = [check_alpha(a) for a in levels]
        return self._kernel.run(scores, levels, self.lam())

    def snapshot(self) -> dict:
        cells, tree, scale = self._kernel.raw_state()
        data = self._base_snapshot()
        data.update(
            grid_size=self.grid_size,
            beta=self.beta,
            cells=cells,
            tree=tree,
            scale=scale,
            prior_weight=self.prior_weight,
            size=self.n_observed,
        )
        return data


def load_engine(data: dict | str) -> _Belief:
    """Rebuild an engine from :meth:`snapshot` output (dict or JSON text)."""
    if isinstance(data, str):
        data = json.loads(data)
    if data.get("format") != SNAPSHOT_FORMAT:
        raise ValueError("not an engine snapshot")
    if data.get("version") != SNAPSHOT_VERSION:
        raise ValueError(f"unsupported snapshot version {data.get('version')}")
    prior = Prior(data["prior"])
    schedule = schedule_from_dict(data["schedule"])
    kind = data["kind"]
    if kind == "exact":
        engine = ExactBelief(prior, schedule)
        for v, c in zip(data["values"], data["counts"]):
            for _ in range(int(c)):
                engine._kernel.insert(float(v))
        return engine
    if kind == "quantized":
        engine = QuantizedBelief(prior, data["grid_size"], schedule)
        for j, c in enumerate(data["counts"]):
            if c:
                engine._kernel.add_cell(j, int(c))
        return engine
    if kind == "discounted":
        engine = DiscountedBelief(prior, data["grid_size"], data["beta"], schedule.value)
        engine._kernel.load_raw_state(
            data["cells"], data["tree"], data["scale"], data["prior_weight"], data["size"]
        )
        return engine
    raise ValueError(f"unknown engine kind {kind!r}")


def belief_quantile(engine: ExactBelief, alpha: float, lam: float | None = None) -> float:
    return engine.quantile(alpha, lam)


def quantized_quantile(engine: QuantizedBelief, alpha: float, lam: float | None = None) -> float:
    return engine.quantile(alpha, lam)


def discounted_quantile(engine: DiscountedBelief, alpha: float, lam: float | None = None) -> float:
    return engine.quantile(alpha, lam)
