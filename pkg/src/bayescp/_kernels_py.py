"""Pure-Python kernels; reference semantics for the compiled ``_kernels`` module.

Every floating-point expression here is mirrored operation-for-operation in
``_kernels.pyx`` so both backends return bit-identical results.
"""

from __future__ import annotations

import math

import numpy as np
from sortedcontainers import SortedList

from .core import Prior, quantile_rank

BACKEND = "python"

# Rescale discounted weights once the global decay factor drops below this.
_RENORM_THRESHOLD = 1e-150


def grid_value(j: int, R: float, m: int) -> float:
    return (j * R) / (m - 1)


def grid_index(r: float, R: float, m: int) -> int:
    """Nearest grid point among ``m`` evenly spaced points on ``[0, R]``; midpoints round down."""
    pos = (r * (m - 1)) / R
    lo = int(math.floor(pos))
    if lo >= m - 1:
        return m - 1
    if lo < 0:
        return 0
    return lo + 1 if pos - lo > 0.5 else lo


def _finish(prior: Prior, alpha: float, weight: float, below: float, v):
    """Resolve the quantile once the first sufficient atom ``v`` is known.

    ``weight`` multiplies the prior CDF; ``below`` is the empirical mass
    strictly below ``v`` (or all of it when ``v`` is None).
    """
    if weight <= 0.0:
        return prior.R if v is None else v
    r0 = prior.inverse_cdf((alpha - below) / weight)
    if v is None:
        return r0
    return v if v < r0 else r0


def _high_bit(m: int) -> int:
    step = 1
    while step * 2 <= m:
        step *= 2
    return step


class ExactKernel:
    """Ordered multiset of scores with rank/select and belief-quantile search."""

    def __init__(self, prior: Prior):
        self.prior = prior
        self._sl = SortedList()

    @property
    def size(self) -> int:
        return len(self._sl)

    def insert(self, x: float) -> None:
        self._sl.add(float(x))

    def insert_many(self, xs) -> None:
        for x in np.asarray(xs, dtype=float):
            self._sl.add(float(x))

    def rank(self, x: float) -> int:
        """Number of stored scores ``<= x``."""
        return self._sl.bisect_right(x)

    def select(self, k: int) -> float:
        """The ``k``-th smallest stored score (1-based)."""
        if not 1 <= k <= len(self._sl):
            raise IndexError(f"select({k}) on multiset of size {len(self._sl)}")
        return self._sl[k - 1]

    def items(self):
        values, counts = [], []
        for x in self._sl:
            if values and values[-1] == x:
                counts[-1] += 1
            else:
                values.append(x)
                counts.append(1)
        return np.array(values, dtype=float), np.array(counts, dtype=np.int64)

    def cdf(self, r: float, lam: float) -> float:
        n = len(self._sl)
        if n == 0:
            return self.prior.cdf(r)
        return lam * self.prior.cdf(r) + ((1.0 - lam) * self._sl.bisect_right(r)) / n

    def quantile(self, alpha: float, lam: float) -> float:
        prior = self.prior
        sl = self._sl
        n = len(sl)
        if n == 0:
            return prior.inverse_cdf(alpha)
        c = 1.0 - lam
        lo, hi = 0, n
        while lo < hi:
            mid = (lo + hi) // 2
            v = sl[mid]
            k = sl.bisect_right(v)
            if lam * prior.cdf(v) + (c * k) / n >= alpha:
                hi = mid
            else:
                lo = mid + 1
        if lo == n:
            return _finish(prior, alpha, lam, (c * n) / n, None)
        return _finish(prior, alpha, lam, (c * lo) / n, sl[lo])

    def run(self, scores, levels, lams) -> np.ndarray:
        """Predict every level, then observe, for each round; returns ``(T, L)``."""
        scores = np.asarray(scores, dtype=float)
        levels = np.asarray(levels, dtype=float)
        out = np.empty((len(scores), len(levels)))
        for i in range(len(scores)):
            lam = float(lams[i])
            for j in range(len(levels)):
                out[i, j] = self.quantile(float(levels[j]), lam)
            self._sl.add(float(scores[i]))
        return out

    def run_erm(self, scores, levels) -> np.ndarray:
        scores = np.asarray(scores, dtype=float)
        levels = np.asarray(levels, dtype=float)
        out = np.empty((len(scores), len(levels)))
        for i in range(len(scores)):
            n = len(self._sl)
            for j in range(len(levels)):
                a = float(levels[j])
                if n == 0:
                    out[i, j] = self.prior.inverse_cdf(a)
                else:
                    out[i, j] = self._sl[quantile_rank(a, n) - 1]
            self._sl.add(float(scores[i]))
        return out


class GridKernel:
    """Integer counts on an ``m``-point grid over ``[0, R]`` backed by a Fenwick tree."""

    def __init__(self, prior: Prior, m: int):
        if m < 2:
            raise ValueError("grid size must be at least 2")
        self.prior = prior
        self.m = int(m)
        self._tree = [0] * (self.m + 1)
        self._counts = [0] * self.m
        self._total = 0
        self._step = _high_bit(self.m)

    @property
    def size(self) -> int:
        return self._total

    def counts(self) -> np.ndarray:
        return np.array(self._counts, dtype=np.int64)

    def grid_value(self, j: int) -> float:
        return grid_value(j, self.prior.R, self.m)

    def add_cell(self, j: int, count: int = 1) -> None:
        self._counts[j] += count
        self._total += count
        i = j + 1
        tree = self._tree
        while i <= self.m:
            tree[i] += count
            i += i & -i

    def insert(self, x: float) -> None:
        self.add_cell(grid_index(x, self.prior.R, self.m))

    def insert_many(self, xs) -> None:
        for x in np.asarray(xs, dtype=float):
            self.insert(float(x))

    def prefix(self, j: int) -> int:
        """Total count in cells ``0..j``."""
        s = 0
        i = j + 1
        while i > 0:
            s += self._tree[i]
            i -= i & -i
        return s

    def _find(self, target: int) -> int:
        """Smallest cell whose prefix count reaches ``target``."""
        pos = 0
        step = self._step
        tree = self._tree
        while step:
            nxt = pos + step
            if nxt <= self.m and tree[nxt] < target:
                pos = nxt
                target -= tree[nxt]
            step >>= 1
        return pos

    def cdf(self, r: float, lam: float) -> float:
        n = self._total
        if n == 0:
            return self.prior.cdf(r)
        R, m = self.prior.R, self.m
        # cells with grid value <= r
        j = min(int(math.floor((r * (m - 1)) / R)), m - 1)
        while j + 1 < m and grid_value(j + 1, R, m) <= r:
            j += 1
        while j >= 0 and grid_value(j, R, m) > r:
            j -= 1
        k = self.prefix(j) if j >= 0 else 0
        return lam * self.prior.cdf(r) + ((1.0 - lam) * k) / n

    def quantile(self, alpha: float, lam: float) -> float:
        prior = self.prior
        n = self._total
        if n == 0:
            return prior.inverse_cdf(alpha)
        c = 1.0 - lam
        R, m = prior.R, self.m
        tree = self._tree
        pos, acc = 0, 0
        step = self._step
        while step:
            nxt = pos + step
            if nxt <= m:
                cand = acc + tree[nxt]
                if not (lam * prior.cdf(grid_value(nxt - 1, R, m)) + (c * cand) / n >= alpha):
                    pos, acc = nxt, cand
            step >>= 1
        if acc == n:
            return _finish(prior, alpha, lam, (c * n) / n, None)
        v = grid_value(self._find(acc + 1), R, m)
        return _finish(prior, alpha, lam, (c * acc) / n, v)

    def run(self, scores, levels, lams) -> np.ndarray:
        scores = np.asarray(scores, dtype=float)
        levels = np.asarray(levels, dtype=float)
        out = np.empty((len(scores), len(levels)))
        for i in range(len(scores)):
            lam = float(lams[i])
            for j in range(len(levels)):
                out[i, j] = self.quantile(float(levels[j]), lam)
            self.insert(float(scores[i]))
        return out


class DiscountedKernel:
    """Geometrically discounted grid weights with a single global decay factor."""

    def __init__(self, prior: Prior, m: int, beta: float):
        if m < 2:
            raise ValueError("grid size must be at least 2")
        if not 0.0 < beta < 1.0:
            raise ValueError("beta must lie in (0, 1)")
        self.prior = prior
        self.m = int(m)
        self.beta = float(beta)
        self._tree = [0.0] * (self.m + 1)
        self._cells = [0.0] * self.m
        self._scale = 1.0
        self.prior_weight = 1.0
        self.size = 0
        self._step = _high_bit(self.m)

    def _add(self, j: int, w: float) -> None:
        self._cells[j] += w
        i = j + 1
        tree = self._tree
        while i <= self.m:
            tree[i] += w
            i += i & -i

    def _rebuild(self) -> None:
        scale = self._scale
        cells = [u * scale for u in self._cells]
        self._cells = [0.0] * self.m
        self._tree = [0.0] * (self.m + 1)
        self._scale = 1.0
        for j in range(self.m):
            if cells[j] != 0.0:
                self._add(j, cells[j])

    def insert(self, x: float) -> None:
        beta = self.beta
        self.prior_weight *= beta
        self._scale *= beta
        self._add(grid_index(x, self.prior.R, self.m), (1.0 - beta) / self._scale)
        self.size += 1
        if self._scale < _RENORM_THRESHOLD:
            self._rebuild()

    def insert_many(self, xs) -> None:
        for x in np.asarray(xs, dtype=float):
            self.insert(float(x))

    def weights(self) -> np.ndarray:
        return np.array(self._cells, dtype=float) * self._scale

    def raw_state(self):
        """Cells, Fenwick nodes and decay factor, enough to restore bit-exactly."""
        return list(self._cells), list(self._tree), self._scale

    def load_raw_state(self, cells, tree, scale: float, prior_weight: float, size: int) -> None:
        if len(cells) != self.m or len(tree) != self.m + 1:
            raise ValueError("raw state does not match grid size")
        self._cells = [float(u) for u in cells]
        self._tree = [float(u) for u in tree]
        self._scale = float(scale)
        self.prior_weight = float(prior_weight)
        self.size = int(size)

    def prefix(self, j: int) -> float:
        s = 0.0
        i = j + 1
        while i > 0:
            s += self._tree[i]
            i -= i & -i
        return s * self._scale

    def cdf(self, r: float, lam: float) -> float:
        R, m = self.prior.R, self.m
        j = min(int(math.floor((r * (m - 1)) / R)), m - 1)
        while j + 1 < m and grid_value(j + 1, R, m) <= r:
            j += 1
        while j >= 0 and grid_value(j, R, m) > r:
            j -= 1
        w = self.prefix(j) if j >= 0 else 0.0
        a = lam + (1.0 - lam) * self.prior_weight
        return a * self.prior.cdf(r) + (1.0 - lam) * w

    def quantile(self, alpha: float, lam: float) -> float:
        prior = self.prior
        R, m = prior.R, self.m
        a = lam + (1.0 - lam) * self.prior_weight
        b = 1.0 - lam
        scale = self._scale
        tree = self._tree
        pos, acc = 0, 0.0
        step = self._step
        while step:
            nxt = pos + step
            if nxt <= m:
                cand = acc + tree[nxt]
                if not (a * prior.cdf(grid_value(nxt - 1, R, m)) + b * (scale * cand) >= alpha):
                    pos, acc = nxt, cand
            step >>= 1
        below = b * (scale * acc)
        if pos == m:
            return _finish(prior, alpha, a, below, None)
        return _finish(prior, alpha, a, below, grid_value(pos, R, m))

    def run(self, scores, levels, lam: float) -> np.ndarray:
        scores = np.asarray(scores, dtype=float)
        levels = np.asarray(levels, dtype=float)
        out = np.empty((len(scores), len(levels)))
        for i in range(len(scores)):
            for j in range(len(levels)):
                out[i, j] = self.quantile(float(levels[j]), lam)
            self.insert(float(scores[i]))
        return out


def regret_curve(scores, thresholds, alpha: float) -> np.ndarray:
    """Running regret ``Reg_t`` for ``t = 1..T`` against the prefix empirical quantile."""
    scores = np.asarray(scores, dtype=float)
    thresholds = np.asarray(thresholds, dtype=float)
    T = len(scores)
    out = np.empty(T)
    if T == 0:
        return out
    order = np.argsort(scores, kind="stable")
    sorted_vals = scores[order]
    position = np.empty(T, dtype=np.int64)
    position[order] = np.arange(T)
    cnt = [0] * (T + 1)
    sm = [0.0] * (T + 1)
    step = _high_bit(T)
    total = 0.0
    cum_loss = 0.0
    for t in range(1, T + 1):
        x = float(scores[t - 1])
        thr = float(thresholds[t - 1])
        cum_loss += ((1.0 if thr >= x else 0.0) - alpha) * (thr - x)
        total += x
        i = int(position[t - 1]) + 1
        while i <= T:
            cnt[i] += 1
            sm[i] += x
            i += i & -i
        k = quantile_rank(alpha, t)
        # descend to the k-th smallest inserted score, summing along the way
        pos, target, s_k = 0, k, 0.0
        st = step
        while st:
            nxt = pos + st
            if nxt <= T and cnt[nxt] < target:
                pos = nxt
                target -= cnt[nxt]
                s_k += sm[nxt]
            st >>= 1
        q = float(sorted_vals[pos])
        s_k += q
        comp = (1.0 - alpha) * (k * q - s_k) + alpha * ((total - s_k) - (t - k) * q)
        out[t - 1] = cum_loss - comp
    return out
