"""Scalar domain types, the quantile loss, empirical quantiles and priors."""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class DomainError(ValueError):
    """A score or confidence level fell outside its admissible range."""


@dataclass(frozen=True)
class ScoreDomain:
    """Score range ``[0, upper_bound]``."""

    upper_bound: float = 1.0

    def __post_init__(self) -> None:
        if not (self.upper_bound > 0 and math.isfinite(self.upper_bound)):
            raise DomainError(f"upper bound must be positive and finite, got {self.upper_bound}")

    def validate(self, r: float) -> float:
        r = float(r)
        if not (0.0 <= r <= self.upper_bound):
            raise DomainError(f"score {r} outside [0, {self.upper_bound}]")
        return r


def check_alpha(alpha: float) -> float:
    """Validate a confidence level and return it as a float."""
    alpha = float(alpha)
    if not (0.0 <= alpha <= 1.0):
        raise DomainError(f"confidence level {alpha} outside [0, 1]")
    return alpha


def quantile_loss(alpha: float, r: float, r_star: float) -> float:
    """Pinball loss ``(1[r >= r*] - alpha) * (r - r*)``.

    ``r`` may lie outside the score domain (OGD iterates are improper).
    """
    return ((1.0 if r >= r_star else 0.0) - alpha) * (r - r_star)


def quantile_loss_array(alpha: float, r, r_star) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    r_star = np.asarray(r_star, dtype=float)
    return (np.where(r >= r_star, 1.0, 0.0) - alpha) * (r - r_star)


def quantile_rank(alpha: float, n: int) -> int:
    """Smallest ``k`` in ``1..n`` with ``k / n >= alpha`` (``1`` when alpha is 0).

    ``ceil(alpha * n)`` alone is off by one whenever the product rounds up,
    e.g. ``0.28 * 25 == 7.000000000000001``.
    """
    if n <= 0:
        raise ValueError("empty sample")
    k = min(max(math.ceil(alpha * n), 1), n)
    while k > 1 and (k - 1) / n >= alpha:
        k -= 1
    while k < n and k / n < alpha:
        k += 1
    return k


def empirical_quantile(alpha: float, scores: Sequence[float]) -> float:
    """``min{x : #{y <= x} / n >= alpha}`` over the sample.

    For ``alpha == 0`` the smallest element is returned.
    """
    alpha = check_alpha(alpha)
    values = sorted(float(s) for s in scores)
    if not values:
        raise ValueError("empty sample")
    return values[quantile_rank(alpha, len(values)) - 1]


class Prior:
    """Distribution on ``[0, R]`` with a piecewise-linear CDF.

    Parameters
    ----------
    knots
        Pairs ``(r_i, F_i)`` with strictly increasing ``r_i``, starting at
        ``(0, 0)`` and ending at ``(R, 1)``.
    density_floor
        Every piece must have density at least this value.
    """

    def __init__(self, knots: Iterable[Sequence[float]], density_floor: float = 1e-12):
        pts = [(float(r), float(f)) for r, f in knots]
        if len(pts) < 2:
            raise ValueError("prior needs at least two knots")
        if pts[0] != (0.0, 0.0):
            raise ValueError(f"first knot must be (0, 0), got {pts[0]}")
        if pts[-1][1] != 1.0:
            raise ValueError(f"last knot must have F = 1, got {pts[-1]}")
        if density_floor <= 0:
            raise ValueError("density_floor must be positive")
        for (r0, f0), (r1, f1) in zip(pts, pts[1:]):
            if not r1 > r0:
                raise ValueError("knot positions must be strictly increasing")
            if (f1 - f0) / (r1 - r0) < density_floor:
                raise ValueError(
                    f"density on [{r0}, {r1}] is below the floor {density_floor}"
                )
        self.xs = tuple(r for r, _ in pts)
        self.fs = tuple(f for _, f in pts)
        self.R = self.xs[-1]
        self.domain = ScoreDomain(self.R)
        self.density_floor = density_floor
        self.slopes = tuple(
            (f1 - f0) / (r1 - r0) for r0, r1, f0, f1 in zip(self.xs, self.xs[1:], self.fs, self.fs[1:])
        )
        self.inv_slopes = tuple(
            (r1 - r0) / (f1 - f0) for r0, r1, f0, f1 in zip(self.xs, self.xs[1:], self.fs, self.fs[1:])
        )

    @classmethod
    def uniform(cls, R: float = 1.0) -> "Prior":
        return cls([(0.0, 0.0), (R, 1.0)])

    @classmethod
    def from_json(cls, text: str) -> "Prior":
        data = json.loads(text)
        if not isinstance(data, list) or not all(isinstance(p, list) and len(p) == 2 for p in data):
            raise ValueError("prior JSON must be an array of [r, F] pairs")
        return cls(data)

    @classmethod
    def load(cls, path: str | Path) -> "Prior":
        return cls.from_json(Path(path).read_text())

    def to_json(self) -> str:
        return json.dumps(self.knots)

    @property
    def knots(self) -> list[list[float]]:
        return [[r, f] for r, f in zip(self.xs, self.fs)]

    @property
    def is_uniform(self) -> bool:
        return len(self.xs) == 2

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Prior) and self.xs == other.xs and self.fs == other.fs

    def __repr__(self) -> str:
        return f"Prior({self.knots})"

    def _piece(self, r: float) -> int:
        return min(max(bisect.bisect_right(self.xs, r) - 1, 0), len(self.xs) - 2)

    def cdf(self, r: float) -> float:
        """Prior CDF, clamped per piece so it is monotone in floating point."""
        if r <= 0.0:
            return 0.0
        if r >= self.R:
            return 1.0
        i = self._piece(r)
        f = self.fs[i] + (r - self.xs[i]) * self.slopes[i]
        return min(max(f, self.fs[i]), self.fs[i + 1])

    def inverse_cdf(self, u: float) -> float:
        """Smallest ``r`` with ``cdf(r) >= u``."""
        if u <= 0.0:
            return 0.0
        if u >= 1.0:
            return self.R
        i = min(max(bisect.bisect_left(self.fs, u) - 1, 0), len(self.fs) - 2)
        r = self.xs[i] + (u - self.fs[i]) * self.inv_slopes[i]
        return min(max(r, self.xs[i]), self.xs[i + 1])

    def density(self, r: float) -> float:
        if r < 0.0 or r > self.R:
            return 0.0
        return self.slopes[self._piece(r)]

    def mean(self) -> float:
        # Uniform within each piece.
        return sum(
            (f1 - f0) * (r0 + r1) / 2
            for r0, r1, f0, f1 in zip(self.xs, self.xs[1:], self.fs, self.fs[1:])
        )


def prior_cdf(prior: Prior, r: float) -> float:
    """Exact prior CDF at ``r``; ``r`` must lie in ``[0, R]``."""
    prior.domain.validate(r)
    return prior.cdf(r)
