"""Brute-force FTRL objectives and regret metrics used to check the belief engines.

Nothing here calls into the engines; the regularizer is integrated exactly
from the prior's knots and objectives are minimized by dense grid scan.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Prior, check_alpha, empirical_quantile, quantile_loss_array

DEFAULT_RESOLUTION = 100_001


def _knot_cdf(prior: Prior, r) -> np.ndarray:
    return np.interp(np.asarray(r, dtype=float), prior.xs, prior.fs, left=0.0, right=1.0)


def _integrated_cdf(prior: Prior, r) -> np.ndarray:
    """``int_0^r F(x) dx`` for ``r`` in ``[0, R]``, exact on each linear piece."""
    r = np.clip(np.asarray(r, dtype=float), 0.0, prior.R)
    xs = np.asarray(prior.xs)
    fs = np.asarray(prior.fs)
    widths = np.diff(xs)
    slopes = np.diff(fs) / widths
    full = np.concatenate([[0.0], np.cumsum(fs[:-1] * widths + slopes * widths**2 / 2)])
    i = np.clip(np.searchsorted(xs, r, side="right") - 1, 0, len(widths) - 1)
    d = r - xs[i]
    return full[i] + fs[i] * d + slopes[i] * d**2 / 2


@dataclass(frozen=True)
class RegularizerPsi:
    """Expected quantile loss of ``r`` against a score drawn from the prior.

    ``psi(r) = alpha * (mean - r) + int_0^r F(x) dx`` on ``[0, R]``; outside the
    domain the integral term continues as ``0`` (left) or ``r - mean`` (right).
    """

    prior: Prior
    alpha: float

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        mean = self.prior.mean()
        inner = _integrated_cdf(self.prior, r)
        tail = np.where(r < 0.0, 0.0, np.where(r > self.prior.R, r - mean, inner))
        return self.alpha * (mean - r) + tail

    def derivative(self, r):
        return _knot_cdf(self.prior, r) - self.alpha

    def second_derivative(self, r):
        r = np.asarray(r, dtype=float)
        xs = np.asarray(self.prior.xs)
        slopes = np.diff(self.prior.fs) / np.diff(xs)
        i = np.clip(np.searchsorted(xs, r, side="right") - 1, 0, len(slopes) - 1)
        return np.where((r < 0) | (r > self.prior.R), 0.0, slopes[i])


def psi(prior: Prior, alpha: float, r):
    return RegularizerPsi(prior, check_alpha(alpha))(r)


def regularizer_weight(lam: float, t: int) -> float:
    """``lam (t-1) / (1 - lam)`` for ``t >= 2``; 1 in the first round."""
    if t == 1:
        return 1.0
    return lam * (t - 1) / (1.0 - lam)


def sqrt_regularizer_weight(t):
    """Regularizer weight ``(t-1) / (sqrt(t) - 1)`` of the ``1/sqrt(t)`` schedule (1 at ``t=1``)."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = (t - 1.0) / (np.sqrt(t) - 1.0)
    return np.where(t == 1.0, 1.0, h)


def _weighted_loss_sum(alpha: float, grid: np.ndarray, scores: np.ndarray, weights: np.ndarray) -> np.ndarray:
    total = np.zeros_like(grid)
    for x, w in zip(scores, weights):
        total += w * quantile_loss_array(alpha, grid, x)
    return total


@dataclass
class FtrlObjective:
    """``h * psi(r) + sum_i loss(r, r_i)`` with ``h = lam (t-1)/(1-lam)`` and ``t = len(scores) + 1``."""

    prior: Prior
    alpha: float
    scores: Sequence[float]
    lam: float = 1.0

    @property
    def t(self) -> int:
        return len(self.scores) + 1

    @property
    def weight(self) -> float:
        return regularizer_weight(self.lam, self.t)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        s = np.asarray(self.scores, dtype=float)
        reg = self.weight * RegularizerPsi(self.prior, self.alpha)(r)
        return reg + _weighted_loss_sum(self.alpha, r, s, np.ones(len(s)))


@dataclass
class DiscountedObjective:
    """``(1-beta)^-1 (lam/(1-lam) + beta^(t-1)) psi(r) + sum_i beta^(t-1-i) loss(r, r_i)``."""

    prior: Prior
    alpha: float
    scores: Sequence[float]
    beta: float
    lam: float

    @property
    def t(self) -> int:
        return len(self.scores) + 1

    @property
    def weight(self) -> float:
        return (self.lam / (1.0 - self.lam) + self.beta ** (self.t - 1)) / (1.0 - self.beta)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        s = np.asarray(self.scores, dtype=float)
        n = len(s)
        w = self.beta ** (n - 1 - np.arange(n, dtype=float))
        reg = self.weight * RegularizerPsi(self.prior, self.alpha)(r)
        return reg + _weighted_loss_sum(self.alpha, r, s, w)


def scan_grid(R: float, resolution: int = DEFAULT_RESOLUTION) -> np.ndarray:
    return np.linspace(0.0, R, resolution)


def minimize_objective(obj, resolution: int = DEFAULT_RESOLUTION) -> float:
    """Grid point of least objective value on ``[0, R]``; ties go to the smallest ``r``.

    Scanning ``[0, R]`` suffices: the right-derivative is negative below 0 and
    non-negative above ``R`` for every level in ``[0, 1]``.
    """
    if resolution < 10_000:
        raise ValueError("resolution must be at least 10^4 points")
    grid = scan_grid(obj.prior.R, resolution)
    return float(grid[int(np.argmin(obj(grid)))])


# ---------------------------------------------------------------------------
# Regret and coverage metrics


def _columns(records, alpha: float | None):
    if not records:
        return np.empty(0), np.empty(0), None
    alphas = {rec.alpha for rec in records}
    if len(alphas) != 1:
        raise ValueError("records must share a single confidence level")
    (rec_alpha,) = alphas
    if alpha is not None and alpha != rec_alpha:
        raise ValueError(f"records are for level {rec_alpha}, not {alpha}")
    thr = np.array([rec.threshold for rec in records], dtype=float)
    rs = np.array([rec.r_star for rec in records], dtype=float)
    return thr, rs, rec_alpha


def regret_from_arrays(thresholds, scores, alpha: float) -> float:
    thresholds = np.asarray(thresholds, dtype=float)
    scores = np.asarray(scores, dtype=float)
    if scores.size == 0:
        return 0.0
    q = empirical_quantile(alpha, scores)
    return float(quantile_loss_array(alpha, thresholds, scores).sum() - quantile_loss_array(alpha, q, scores).sum())


def regret(records, alpha: float | None = None) -> float:
    """Total loss minus that of the empirical ``alpha``-quantile of the realized scores."""
    thr, rs, a = _columns(records, alpha)
    if a is None:
        return 0.0
    return regret_from_arrays(thr, rs, a)


def _weighted_fixed_losses(alpha: float, candidates: np.ndarray, scores: np.ndarray, weights: np.ndarray) -> np.ndarray:
    order = np.argsort(scores)
    x = scores[order]
    w = weights[order]
    cw = np.concatenate([[0.0], np.cumsum(w)])
    cwx = np.concatenate([[0.0], np.cumsum(w * x)])
    k = np.searchsorted(x, candidates, side="right")
    below = candidates * cw[k] - cwx[k]
    above = (cwx[-1] - cwx[k]) - candidates * (cw[-1] - cw[k])
    return (1.0 - alpha) * below + alpha * above


def discounted_regret_from_arrays(thresholds, scores, alpha: float, beta: float, resolution: int = 10_001) -> float:
    thresholds = np.asarray(thresholds, dtype=float)
    scores = np.asarray(scores, dtype=float)
    T = len(scores)
    if T == 0:
        return 0.0
    w = beta ** (T - 1 - np.arange(T, dtype=float))
    incurred = float((w * quantile_loss_array(alpha, thresholds, scores)).sum())
    # the fixed-threshold loss is piecewise linear with kinks at the scores,
    # so adding them to the scan grid makes the minimum exact
    candidates = np.union1d(np.linspace(0.0, float(scores.max()), resolution), scores)
    best = float(_weighted_fixed_losses(alpha, candidates, scores, w).min())
    return incurred - best


def discounted_regret(records, alpha: float | None, beta: float, resolution: int = 10_001) -> float:
    """``sum_t beta^(T-t) loss_t`` minus the best fixed threshold's discounted loss."""
    thr, rs, a = _columns(records, alpha)
    if a is None:
        return 0.0
    return discounted_regret_from_arrays(thr, rs, a, beta, resolution)


def coverage_error(records, alpha: float | None = None) -> float:
    """``|alpha - fraction of rounds with r* <= threshold|``."""
    thr, rs, a = _columns(records, alpha)
    if a is None:
        raise ValueError("coverage error needs at least one record")
    return abs(a - float(np.mean(rs <= thr)))
