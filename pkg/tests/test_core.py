import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bayescp.core import (
    DomainError,
    Prior,
    ScoreDomain,
    check_alpha,
    empirical_quantile,
    prior_cdf,
    quantile_loss,
    quantile_loss_array,
    quantile_rank,
)

unit = st.floats(0.0, 1.0, allow_nan=False)
reals = st.floats(-3.0, 3.0, allow_nan=False)


class TestQuantileLoss:
    @pytest.mark.parametrize(
        "alpha, r, r_star, expected",
        [(0.9, 1.0, 1.0, 0.0), (0.9, 0.5, 1.0, 0.45), (0.5, 1.0, 0.0, 0.5)],
    )
    def test_examples(self, alpha, r, r_star, expected):
        assert quantile_loss(alpha, r, r_star) == pytest.approx(expected, abs=1e-15)

    def test_array_matches_scalar(self, rng):
        r = rng.uniform(-1, 2, 50)
        s = rng.uniform(0, 1, 50)
        got = quantile_loss_array(0.3, r, s)
        assert np.array_equal(got, [quantile_loss(0.3, a, b) for a, b in zip(r, s)])

    def test_tie_uses_weak_inequality(self):
        # at r == r* the indicator is 1, so the loss is exactly 0 either way
        assert quantile_loss(0.2, 0.4, 0.4) == 0.0

    @given(unit, reals, reals, reals, unit)
    def test_convex_in_r(self, alpha, a, b, r_star, w):
        mid = w * a + (1 - w) * b
        lhs = quantile_loss(alpha, mid, r_star)
        rhs = w * quantile_loss(alpha, a, r_star) + (1 - w) * quantile_loss(alpha, b, r_star)
        assert lhs <= rhs + 1e-12

    @given(unit, reals, reals, reals)
    def test_nonnegative_and_lipschitz_in_r(self, alpha, a, b, r_star):
        la, lb = quantile_loss(alpha, a, r_star), quantile_loss(alpha, b, r_star)
        assert la >= 0.0
        assert abs(la - lb) <= abs(a - b) + 1e-12

    @given(unit, reals, reals, reals)
    def test_lipschitz_in_score(self, alpha, r, s1, s2):
        d = abs(quantile_loss(alpha, r, s1) - quantile_loss(alpha, r, s2))
        assert d <= abs(s1 - s2) + 1e-12

    @given(unit, unit, unit, unit)
    def test_r_lipschitz_in_alpha(self, a1, a2, r, r_star):
        R = 1.0
        d = abs(quantile_loss(a1, r, r_star) - quantile_loss(a2, r, r_star))
        assert d <= R * abs(a1 - a2) + 1e-12


class TestEmpiricalQuantile:
    @pytest.mark.parametrize(
        "alpha, scores, expected",
        [(0.5, [0.3], 0.3), (0.5, [1.0, 0.0], 0.0), (0.75, [0.1, 0.2, 0.3, 0.4], 0.3)],
    )
    def test_examples(self, alpha, scores, expected):
        assert empirical_quantile(alpha, scores) == expected

    def test_empty_sample(self):
        with pytest.raises(ValueError, match="empty sample"):
            empirical_quantile(0.5, [])

    def test_alpha_zero_is_minimum(self):
        assert empirical_quantile(0.0, [0.4, 0.2, 0.9]) == 0.2

    def test_rank_avoids_float_ceil_bug(self):
        assert math.ceil(0.28 * 25) == 8
        assert quantile_rank(0.28, 25) == 7

    @pytest.mark.parametrize("n", range(1, 9))
    def test_exhaustive_against_linear_scan(self, n):
        alphabet = [0.0, 0.25, 0.5, 0.75, 1.0]
        levels = [0.0, 0.1, 0.2, 0.25, 1 / 3, 0.5, 0.6, 0.7, 0.75, 0.9, 1.0]
        for sample in itertools.combinations_with_replacement(alphabet, n):
            for a in levels:
                oracle = min(x for x in sample if sum(y <= x for y in sample) / n >= a)
                assert empirical_quantile(a, sample) == oracle

    @given(st.lists(unit, min_size=1, max_size=30), unit, unit)
    def test_monotone_in_alpha(self, scores, a1, a2):
        lo, hi = sorted((a1, a2))
        assert empirical_quantile(lo, scores) <= empirical_quantile(hi, scores)

    @given(st.lists(unit, min_size=1, max_size=30), unit, st.randoms())
    def test_permutation_invariant(self, scores, alpha, rnd):
        shuffled = list(scores)
        rnd.shuffle(shuffled)
        assert empirical_quantile(alpha, scores) == empirical_quantile(alpha, shuffled)


class TestDomain:
    def test_rejects_nonpositive_bound(self):
        with pytest.raises(DomainError):
            ScoreDomain(0.0)
        with pytest.raises(DomainError):
            ScoreDomain(math.inf)

    @pytest.mark.parametrize("r", [-1e-9, 1.0 + 1e-9, math.nan])
    def test_validate_rejects(self, r):
        with pytest.raises(DomainError):
            ScoreDomain(1.0).validate(r)

    @pytest.mark.parametrize("alpha", [-0.1, 1.1, math.nan])
    def test_check_alpha(self, alpha):
        with pytest.raises(DomainError):
            check_alpha(alpha)


class TestPrior:
    def test_cdf_examples(self, two_piece):
        assert prior_cdf(Prior.uniform(1.0), 0.4) == pytest.approx(0.4)
        assert prior_cdf(Prior.uniform(2.0), 0.5) == pytest.approx(0.25)
        assert prior_cdf(two_piece, 0.25) == pytest.approx(0.4)

    def test_endpoints(self, two_piece):
        for p in (Prior.uniform(3.0), two_piece):
            assert prior_cdf(p, 0.0) == 0.0
            assert prior_cdf(p, p.R) == 1.0

    def test_out_of_domain(self, two_piece):
        with pytest.raises(DomainError):
            prior_cdf(two_piece, 1.5)

    @pytest.mark.parametrize(
        "knots",
        [
            [(0, 0)],
            [(0.1, 0), (1, 1)],
            [(0, 0), (1, 0.9)],
            [(0, 0), (0.5, 0.5), (0.5, 0.7), (1, 1)],
            [(0, 0), (0.5, 0.5), (0.7, 0.5), (1, 1)],
        ],
    )
    def test_invalid_knots(self, knots):
        with pytest.raises(ValueError):
            Prior(knots)

    def test_density_floor(self):
        with pytest.raises(ValueError, match="floor"):
            Prior([(0, 0), (0.5, 0.001), (1, 1)], density_floor=0.01)

    def test_json_round_trip(self, two_piece, tmp_path):
        path = tmp_path / "prior.json"
        path.write_text(two_piece.to_json())
        assert Prior.load(path) == two_piece
        assert json.loads(two_piece.to_json()) == [[0.0, 0.0], [0.5, 0.8], [1.0, 1.0]]
        with pytest.raises(ValueError):
            Prior.from_json('{"a": 1}')

    @given(st.floats(0.0, 1.0))
    def test_inverse_is_left_inverse(self, u):
        p = Prior([(0.0, 0.0), (0.3, 0.6), (2.0, 1.0)])
        r = p.inverse_cdf(u)
        assert p.cdf(r) >= u - 1e-12
        assert r == 0.0 or p.cdf(r - 1e-9) < u + 1e-12

    def test_cdf_monotone_in_float(self):
        p = Prior([(0.0, 0.0), (0.3, 0.6), (2.0, 1.0)])
        xs = np.linspace(0, 2, 20001)
        vals = [p.cdf(x) for x in xs]
        assert all(a <= b for a, b in zip(vals, vals[1:]))

    def test_mean_and_density(self, two_piece):
        assert two_piece.mean() == pytest.approx(0.8 * 0.25 + 0.2 * 0.75)
        assert two_piece.density(0.2) == pytest.approx(1.6)
        assert two_piece.density(0.7) == pytest.approx(0.4)
        assert two_piece.density(1.5) == 0.0
