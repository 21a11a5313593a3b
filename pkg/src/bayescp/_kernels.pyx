# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels. Floating-point expressions mirror ``_kernels_py`` exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport floor, ceil
from libc.stdlib cimport malloc, realloc, free
from libc.stdint cimport int64_t, uint64_t

from .core import Prior

cnp.import_array()

BACKEND = "cython"

cdef double _RENORM_THRESHOLD = 1e-150


cdef class PriorTable:
    """C view of a piecewise-linear prior."""

    cdef double* xs
    cdef double* fs
    cdef double* slopes
    cdef double* inv_slopes
    cdef int nknots
    cdef public double R

    def __cinit__(self, prior):
        cdef int i
        self.nknots = len(prior.xs)
        self.xs = <double*> malloc(self.nknots * sizeof(double))
        self.fs = <double*> malloc(self.nknots * sizeof(double))
        self.slopes = <double*> malloc(self.nknots * sizeof(double))
        self.inv_slopes = <double*> malloc(self.nknots * sizeof(double))
        for i in range(self.nknots):
            self.xs[i] = prior.xs[i]
            self.fs[i] = prior.fs[i]
        for i in range(self.nknots - 1):
            self.slopes[i] = prior.slopes[i]
            self.inv_slopes[i] = prior.inv_slopes[i]
        self.R = prior.R

    def __dealloc__(self):
        free(self.xs)
        free(self.fs)
        free(self.slopes)
        free(self.inv_slopes)

    cdef inline double cdf(self, double r) nogil:
        cdef int i, lo, hi, mid
        cdef double f
        if r <= 0.0:
            return 0.0
        if r >= self.R:
            return 1.0
        # largest i with xs[i] <= r
        lo = 0
        hi = self.nknots
        while lo < hi:
            mid = (lo + hi) // 2
            if r < self.xs[mid]:
                hi = mid
            else:
                lo = mid + 1
        i = lo - 1
        if i < 0:
            i = 0
        if i > self.nknots - 2:
            i = self.nknots - 2
        f = self.fs[i] + (r - self.xs[i]) * self.slopes[i]
        if f < self.fs[i]:
            f = self.fs[i]
        if f > self.fs[i + 1]:
            f = self.fs[i + 1]
        return f

    cdef inline double inv(self, double u) nogil:
        cdef int i, lo, hi, mid
        cdef double r
        if u <= 0.0:
            return 0.0
        if u >= 1.0:
            return self.R
        # largest i with fs[i] < u
        lo = 0
        hi = self.nknots
        while lo < hi:
            mid = (lo + hi) // 2
            if self.fs[mid] < u:
                lo = mid + 1
            else:
                hi = mid
        i = lo - 1
        if i < 0:
            i = 0
        if i > self.nknots - 2:
            i = self.nknots - 2
        r = self.xs[i] + (u - self.fs[i]) * self.inv_slopes[i]
        if r < self.xs[i]:
            r = self.xs[i]
        if r > self.xs[i + 1]:
            r = self.xs[i + 1]
        return r

    def py_cdf(self, double r):
        return self.cdf(r)

    def py_inv(self, double u):
        return self.inv(u)


cdef inline double _grid_value(Py_ssize_t j, double R, Py_ssize_t m) nogil:
    return (j * R) / (m - 1)


cdef inline Py_ssize_t _grid_index(double r, double R, Py_ssize_t m) nogil:
    cdef double pos = (r * (m - 1)) / R
    cdef double flo = floor(pos)
    cdef Py_ssize_t lo
    if flo >= m - 1:
        return m - 1
    if flo < 0:
        return 0
    lo = <Py_ssize_t> flo
    if pos - lo > 0.5:
        return lo + 1
    return lo


def grid_value(Py_ssize_t j, double R, Py_ssize_t m):
    return _grid_value(j, R, m)


def grid_index(double r, double R, Py_ssize_t m):
    return _grid_index(r, R, m)


cdef inline double _finish(PriorTable prior, double alpha, double weight, double below,
                           bint has_v, double v) nogil:
    cdef double r0
    if weight <= 0.0:
        return v if has_v else prior.R
    r0 = prior.inv((alpha - below) / weight)
    if not has_v:
        return r0
    return v if v < r0 else r0


cdef inline Py_ssize_t _high_bit(Py_ssize_t m) nogil:
    cdef Py_ssize_t step = 1
    while step * 2 <= m:
        step *= 2
    return step


cdef inline int64_t _quantile_rank(double alpha, int64_t n) nogil:
    cdef int64_t k = <int64_t> ceil(alpha * n)
    if k < 1:
        k = 1
    if k > n:
        k = n
    while k > 1 and (<double> (k - 1)) / n >= alpha:
        k -= 1
    while k < n and (<double> k) / n < alpha:
        k += 1
    return k


cdef inline uint64_t _splitmix(uint64_t* state) nogil:
    cdef uint64_t z
    state[0] += 0x9E3779B97F4A7C15ULL
    z = state[0]
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef class ExactKernel:
    """Treap keyed by score with multiplicities and subtree totals."""

    cdef PriorTable table
    cdef public object prior
    cdef double* key
    cdef int64_t* cnt
    cdef int64_t* tot
    cdef Py_ssize_t* left
    cdef Py_ssize_t* right
    cdef uint64_t* prio
    cdef Py_ssize_t nodes
    cdef Py_ssize_t capacity
    cdef Py_ssize_t root
    cdef uint64_t rng

    def __cinit__(self, prior):
        self.prior = prior
        self.table = PriorTable(prior)
        self.capacity = 0
        self.nodes = 1  # node 0 is the null sentinel
        self.root = 0
        self.rng = 0x5EED
        self._grow(64)
        self.key[0] = 0.0
        self.cnt[0] = 0
        self.tot[0] = 0
        self.left[0] = 0
        self.right[0] = 0
        self.prio[0] = 0

    def __dealloc__(self):
        free(self.key)
        free(self.cnt)
        free(self.tot)
        free(self.left)
        free(self.right)
        free(self.prio)

    cdef void _grow(self, Py_ssize_t cap):
        self.key = <double*> realloc(self.key, cap * sizeof(double))
        self.cnt = <int64_t*> realloc(self.cnt, cap * sizeof(int64_t))
        self.tot = <int64_t*> realloc(self.tot, cap * sizeof(int64_t))
        self.left = <Py_ssize_t*> realloc(self.left, cap * sizeof(Py_ssize_t))
        self.right = <Py_ssize_t*> realloc(self.right, cap * sizeof(Py_ssize_t))
        self.prio = <uint64_t*> realloc(self.prio, cap * sizeof(uint64_t))
        if (self.key == NULL or self.cnt == NULL or self.tot == NULL or self.left == NULL
                or self.right == NULL or self.prio == NULL):
            raise MemoryError()
        self.capacity = cap

    cdef inline void _pull(self, Py_ssize_t x):
        self.tot[x] = self.tot[self.left[x]] + self.tot[self.right[x]] + self.cnt[x]

    cdef Py_ssize_t _rot_right(self, Py_ssize_t y):
        cdef Py_ssize_t x = self.left[y]
        self.left[y] = self.right[x]
        self.right[x] = y
        self._pull(y)
        self._pull(x)
        return x

    cdef Py_ssize_t _rot_left(self, Py_ssize_t x):
        cdef Py_ssize_t y = self.right[x]
        self.right[x] = self.left[y]
        self.left[y] = x
        self._pull(x)
        self._pull(y)
        return y

    cdef Py_ssize_t _new_node(self, double k):
        cdef Py_ssize_t x
        if self.nodes == self.capacity:
            self._grow(self.capacity * 2)
        x = self.nodes
        self.nodes += 1
        self.key[x] = k
        self.cnt[x] = 1
        self.tot[x] = 1
        self.left[x] = 0
        self.right[x] = 0
        self.prio[x] = _splitmix(&self.rng)
        return x

    cdef Py_ssize_t _insert(self, Py_ssize_t x, double k):
        cdef Py_ssize_t child
        if x == 0:
            return self._new_node(k)
        if k == self.key[x]:
            self.cnt[x] += 1
            self.tot[x] += 1
            return x
        if k < self.key[x]:
            child = self._insert(self.left[x], k)
            self.left[x] = child
            if self.prio[child] > self.prio[x]:
                return self._rot_right(x)
        else:
            child = self._insert(self.right[x], k)
            self.right[x] = child
            if self.prio[child] > self.prio[x]:
                return self._rot_left(x)
        self._pull(x)
        return x

    cdef inline void _cinsert(self, double k):
        self.root = self._insert(self.root, k)

    @property
    def size(self):
        return self.tot[self.root]

    def insert(self, double x):
        self._cinsert(x)

    def insert_many(self, xs):
        cdef const double[::1] arr = np.ascontiguousarray(xs, dtype=np.float64)
        cdef Py_ssize_t i
        for i in range(arr.shape[0]):
            self._cinsert(arr[i])

    cdef int64_t _rank(self, double r):
        cdef Py_ssize_t x = self.root
        cdef int64_t acc = 0
        while x != 0:
            if r < self.key[x]:
                x = self.left[x]
            else:
                acc += self.tot[self.left[x]] + self.cnt[x]
                x = self.right[x]
        return acc

    def rank(self, double x):
        return self._rank(x)

    cdef double _select(self, int64_t k):
        cdef Py_ssize_t x = self.root
        cdef int64_t ls
        while x != 0:
            ls = self.tot[self.left[x]]
            if k <= ls:
                x = self.left[x]
            elif k <= ls + self.cnt[x]:
                return self.key[x]
            else:
                k -= ls + self.cnt[x]
                x = self.right[x]
        return self.key[0]

    def select(self, int64_t k):
        if not 1 <= k <= self.tot[self.root]:
            raise IndexError(f"select({k}) on multiset of size {self.tot[self.root]}")
        return self._select(k)

    def items(self):
        cdef Py_ssize_t n = 0
        cdef list stack = []
        cdef Py_ssize_t x = self.root
        values = []
        counts = []
        while stack or x != 0:
            while x != 0:
                stack.append(x)
                x = self.left[x]
            x = stack.pop()
            values.append(self.key[x])
            counts.append(self.cnt[x])
            x = self.right[x]
        return np.array(values, dtype=float), np.array(counts, dtype=np.int64)

    def cdf(self, double r, double lam):
        cdef int64_t n = self.tot[self.root]
        if n == 0:
            return self.table.cdf(r)
        return lam * self.table.cdf(r) + ((1.0 - lam) * self._rank(r)) / n

    cdef double _quantile(self, double alpha, double lam):
        cdef int64_t n = self.tot[self.root]
        cdef double c = 1.0 - lam
        cdef Py_ssize_t x = self.root
        cdef int64_t less = 0
        cdef int64_t upper
        cdef bint found = False
        cdef double v = 0.0
        cdef int64_t below = 0
        if n == 0:
            return self.table.inv(alpha)
        while x != 0:
            upper = less + self.tot[self.left[x]] + self.cnt[x]
            if lam * self.table.cdf(self.key[x]) + (c * upper) / n >= alpha:
                found = True
                v = self.key[x]
                below = less + self.tot[self.left[x]]
                x = self.left[x]
            else:
                less = upper
                x = self.right[x]
        if not found:
            return _finish(self.table, alpha, lam, (c * n) / n, False, 0.0)
        return _finish(self.table, alpha, lam, (c * below) / n, True, v)

    def quantile(self, double alpha, double lam):
        return self._quantile(alpha, lam)

    def run(self, scores, levels, lams):
        cdef const double[::1] s = np.ascontiguousarray(scores, dtype=np.float64)
        cdef const double[::1] lv = np.ascontiguousarray(levels, dtype=np.float64)
        cdef const double[::1] lm = np.ascontiguousarray(lams, dtype=np.float64)
        cdef Py_ssize_t T = s.shape[0], L = lv.shape[0], i, j
        out = np.empty((T, L))
        cdef double[:, ::1] o = out
        for i in range(T):
            for j in range(L):
                o[i, j] = self._quantile(lv[j], lm[i])
            self._cinsert(s[i])
        return out

    def run_erm(self, scores, levels):
        cdef const double[::1] s = np.ascontiguousarray(scores, dtype=np.float64)
        cdef const double[::1] lv = np.ascontiguousarray(levels, dtype=np.float64)
        cdef Py_ssize_t T = s.shape[0], L = lv.shape[0], i, j
        cdef int64_t n
        out = np.empty((T, L))
        cdef double[:, ::1] o = out
        for i in range(T):
            n = self.tot[self.root]
            for j in range(L):
                if n == 0:
                    o[i, j] = self.table.inv(lv[j])
                else:
                    o[i, j] = self._select(_quantile_rank(lv[j], n))
            self._cinsert(s[i])
        return out


cdef class GridKernel:
    """Integer counts on an ``m``-point grid backed by a Fenwick tree."""

    cdef PriorTable table
    cdef public object prior
    cdef public Py_ssize_t m
    cdef int64_t[::1] tree
    cdef int64_t[::1] cells
    cdef int64_t total
    cdef Py_ssize_t step

    def __init__(self, prior, Py_ssize_t m):
        if m < 2:
            raise ValueError("grid size must be at least 2")
        self.prior = prior
        self.table = PriorTable(prior)
        self.m = m
        self.tree = np.zeros(m + 1, dtype=np.int64)
        self.cells = np.zeros(m, dtype=np.int64)
        self.total = 0
        self.step = _high_bit(m)

    @property
    def size(self):
        return self.total

    def counts(self):
        return np.array(self.cells, dtype=np.int64)

    def grid_value(self, Py_ssize_t j):
        return _grid_value(j, self.table.R, self.m)

    cdef inline void _add_cell(self, Py_ssize_t j, int64_t count):
        cdef Py_ssize_t i = j + 1
        self.cells[j] += count
        self.total += count
        while i <= self.m:
            self.tree[i] += count
            i += i & -i

    def add_cell(self, Py_ssize_t j, int64_t count=1):
        self._add_cell(j, count)

    def insert(self, double x):
        self._add_cell(_grid_index(x, self.table.R, self.m), 1)

    def insert_many(self, xs):
        cdef const double[::1] arr = np.ascontiguousarray(xs, dtype=np.float64)
        cdef Py_ssize_t i
        for i in range(arr.shape[0]):
            self._add_cell(_grid_index(arr[i], self.table.R, self.m), 1)

    cdef int64_t _prefix(self, Py_ssize_t j):
        cdef int64_t s = 0
        cdef Py_ssize_t i = j + 1
        while i > 0:
            s += self.tree[i]
            i -= i & -i
        return s

    def prefix(self, Py_ssize_t j):
        return self._prefix(j)

    cdef Py_ssize_t _find(self, int64_t target):
        cdef Py_ssize_t pos = 0, nxt
        cdef Py_ssize_t step = self.step
        while step:
            nxt = pos + step
            if nxt <= self.m and self.tree[nxt] < target:
                pos = nxt
                target -= self.tree[nxt]
            step >>= 1
        return pos

    def cdf(self, double r, double lam):
        cdef int64_t n = self.total
        cdef double R = self.table.R
        cdef Py_ssize_t m = self.m, j
        cdef int64_t k
        if n == 0:
            return self.table.cdf(r)
        j = <Py_ssize_t> floor((r * (m - 1)) / R)
        if j > m - 1:
            j = m - 1
        while j + 1 < m and _grid_value(j + 1, R, m) <= r:
            j += 1
        while j >= 0 and _grid_value(j, R, m) > r:
            j -= 1
        k = self._prefix(j) if j >= 0 else 0
        return lam * self.table.cdf(r) + ((1.0 - lam) * k) / n

    cdef double _quantile(self, double alpha, double lam):
        cdef int64_t n = self.total
        cdef double c = 1.0 - lam
        cdef double R = self.table.R
        cdef Py_ssize_t m = self.m
        cdef Py_ssize_t pos = 0, nxt
        cdef int64_t acc = 0, cand
        cdef Py_ssize_t step = self.step
        if n == 0:
            return self.table.inv(alpha)
        while step:
            nxt = pos + step
            if nxt <= m:
                cand = acc + self.tree[nxt]
                if not (lam * self.table.cdf(_grid_value(nxt - 1, R, m)) + (c * cand) / n >= alpha):
                    pos = nxt
                    acc = cand
            step >>= 1
        if acc == n:
            return _finish(self.table, alpha, lam, (c * n) / n, False, 0.0)
        return _finish(self.table, alpha, lam, (c * acc) / n, True,
                       _grid_value(self._find(acc + 1), R, m))

    def quantile(self, double alpha, double lam):
        return self._quantile(alpha, lam)

    def run(self, scores, levels, lams):
        cdef const double[::1] s = np.ascontiguousarray(scores, dtype=np.float64)
        cdef const double[::1] lv = np.ascontiguousarray(levels, dtype=np.float64)
        cdef const double[::1] lm = np.ascontiguousarray(lams, dtype=np.float64)
        cdef Py_ssize_t T = s.shape[0], L = lv.shape[0], i, j
        out = np.empty((T, L))
        cdef double[:, ::1] o = out
        for i in range(T):
            for j in range(L):
                o[i, j] = self._quantile(lv[j], lm[i])
            self._add_cell(_grid_index(s[i], self.table.R, self.m), 1)
        return out


cdef class DiscountedKernel:
    """Discounted grid weights stored as ``u_j`` with ``w_j = u_j * scale``."""

    cdef PriorTable table
    cdef public object prior
    cdef public Py_ssize_t m
    cdef public double beta
    cdef double[::1] tree
    cdef double[::1] cells
    cdef double scale
    cdef public double prior_weight
    cdef public int64_t size
    cdef Py_ssize_t step

    def __init__(self, prior, Py_ssize_t m, double beta):
        if m < 2:
            raise ValueError("grid size must be at least 2")
        if not 0.0 < beta < 1.0:
            raise ValueError("beta must lie in (0, 1)")
        self.prior = prior
        self.table = PriorTable(prior)
        self.m = m
        self.beta = beta
        self.tree = np.zeros(m + 1, dtype=np.float64)
        self.cells = np.zeros(m, dtype=np.float64)
        self.scale = 1.0
        self.prior_weight = 1.0
        self.size = 0
        self.step = _high_bit(m)

    cdef inline void _add(self, Py_ssize_t j, double w):
        cdef Py_ssize_t i = j + 1
        self.cells[j] += w
        while i <= self.m:
            self.tree[i] += w
            i += i & -i

    cdef void _rebuild(self):
        cdef Py_ssize_t j
        cdef double scale = self.scale
        cdef double[::1] old = np.array(self.cells, dtype=np.float64)
        for j in range(self.m):
            old[j] = old[j] * scale
            self.cells[j] = 0.0
        for j in range(self.m + 1):
            self.tree[j] = 0.0
        self.scale = 1.0
        for j in range(self.m):
            if old[j] != 0.0:
                self._add(j, old[j])

    cdef inline void _insert(self, double x):
        cdef double beta = self.beta
        self.prior_weight *= beta
        self.scale *= beta
        self._add(_grid_index(x, self.table.R, self.m), (1.0 - beta) / self.scale)
        self.size += 1
        if self.scale < _RENORM_THRESHOLD:
            self._rebuild()

    def insert(self, double x):
        self._insert(x)

    def insert_many(self, xs):
        cdef const double[::1] arr = np.ascontiguousarray(xs, dtype=np.float64)
        cdef Py_ssize_t i
        for i in range(arr.shape[0]):
            self._insert(arr[i])

    def weights(self):
        return np.array(self.cells, dtype=np.float64) * self.scale

    def raw_state(self):
        return [float(u) for u in self.cells], [float(u) for u in self.tree], self.scale

    def load_raw_state(self, cells, tree, double scale, double prior_weight, int64_t size):
        cdef Py_ssize_t j
        if len(cells) != self.m or len(tree) != self.m + 1:
            raise ValueError("raw state does not match grid size")
        for j in range(self.m):
            self.cells[j] = cells[j]
        for j in range(self.m + 1):
            self.tree[j] = tree[j]
        self.scale = scale
        self.prior_weight = prior_weight
        self.size = size

    cdef double _prefix(self, Py_ssize_t j):
        cdef double s = 0.0
        cdef Py_ssize_t i = j + 1
        while i > 0:
            s += self.tree[i]
            i -= i & -i
        return s * self.scale

    def prefix(self, Py_ssize_t j):
        return self._prefix(j)

    def cdf(self, double r, double lam):
        cdef double R = self.table.R
        cdef Py_ssize_t m = self.m, j
        cdef double w, a
        j = <Py_ssize_t> floor((r * (m - 1)) / R)
        if j > m - 1:
            j = m - 1
        while j + 1 < m and _grid_value(j + 1, R, m) <= r:
            j += 1
        while j >= 0 and _grid_value(j, R, m) > r:
            j -= 1
        w = self._prefix(j) if j >= 0 else 0.0
        a = lam + (1.0 - lam) * self.prior_weight
        return a * self.table.cdf(r) + (1.0 - lam) * w

    cdef double _quantile(self, double alpha, double lam):
        cdef double R = self.table.R
        cdef Py_ssize_t m = self.m
        cdef double a = lam + (1.0 - lam) * self.prior_weight
        cdef double b = 1.0 - lam
        cdef double scale = self.scale
        cdef Py_ssize_t pos = 0, nxt
        cdef double acc = 0.0, cand, below
        cdef Py_ssize_t step = self.step
        while step:
            nxt = pos + step
            if nxt <= m:
                cand = acc + self.tree[nxt]
                if not (a * self.table.cdf(_grid_value(nxt - 1, R, m)) + b * (scale * cand) >= alpha):
                    pos = nxt
                    acc = cand
            step >>= 1
        below = b * (scale * acc)
        if pos == m:
            return _finish(self.table, alpha, a, below, False, 0.0)
        return _finish(self.table, alpha, a, below, True, _grid_value(pos, R, m))

    def quantile(self, double alpha, double lam):
        return self._quantile(alpha, lam)

    def run(self, scores, levels, double lam):
        cdef const double[::1] s = np.ascontiguousarray(scores, dtype=np.float64)
        cdef const double[::1] lv = np.ascontiguousarray(levels, dtype=np.float64)
        cdef Py_ssize_t T = s.shape[0], L = lv.shape[0], i, j
        out = np.empty((T, L))
        cdef double[:, ::1] o = out
        for i in range(T):
            for j in range(L):
                o[i, j] = self._quantile(lv[j], lam)
            self._insert(s[i])
        return out


def regret_curve(scores, thresholds, double alpha):
    """Running regret ``Reg_t`` for ``t = 1..T`` against the prefix empirical quantile."""
    cdef const double[::1] s = np.ascontiguousarray(scores, dtype=np.float64)
    cdef const double[::1] th = np.ascontiguousarray(thresholds, dtype=np.float64)
    cdef Py_ssize_t T = s.shape[0], t, i, pos, nxt, st, step
    out = np.empty(T)
    if T == 0:
        return out
    cdef double[::1] o = out
    order = np.argsort(np.asarray(s), kind="stable")
    cdef double[::1] sorted_vals = np.asarray(s)[order].copy()
    cdef int64_t[::1] position = np.empty(T, dtype=np.int64)
    cdef int64_t[::1] order_v = order.astype(np.int64)
    for i in range(T):
        position[order_v[i]] = i
    cdef int64_t[::1] cnt = np.zeros(T + 1, dtype=np.int64)
    cdef double[::1] sm = np.zeros(T + 1, dtype=np.float64)
    cdef double total = 0.0, cum_loss = 0.0, x, thr, q, s_k, comp
    cdef int64_t k, target
    step = _high_bit(T)
    for t in range(1, T + 1):
        x = s[t - 1]
        thr = th[t - 1]
        cum_loss += ((1.0 if thr >= x else 0.0) - alpha) * (thr - x)
        total += x
        i = position[t - 1] + 1
        while i <= T:
            cnt[i] += 1
            sm[i] += x
            i += i & -i
        k = _quantile_rank(alpha, t)
        pos = 0
        target = k
        s_k = 0.0
        st = step
        while st:
            nxt = pos + st
            if nxt <= T and cnt[nxt] < target:
                pos = nxt
                target -= cnt[nxt]
                s_k += sm[nxt]
            st >>= 1
        q = sorted_vals[pos]
        s_k += q
        comp = (1.0 - alpha) * (k * q - s_k) + alpha * ((total - s_k) - (t - k) * q)
        o[t - 1] = cum_loss - comp
    return out
