import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bayescp.core import Prior, empirical_quantile, quantile_loss, quantile_loss_array
from bayescp.engines import DiscountedBelief, ExactBelief, discounted_lambda
from bayescp.datagen import SequenceSpec, generate
from bayescp.oracle import (
    DiscountedObjective,
    FtrlObjective,
    RegularizerPsi,
    coverage_error,
    discounted_regret,
    discounted_regret_from_arrays,
    minimize_objective,
    psi,
    regret,
    regret_from_arrays,
    regularizer_weight,
    sqrt_regularizer_weight,
)
from bayescp.predictors import PredictorRecord

UNIFORM = Prior.uniform(1.0)
TWO_PIECE = Prior([(0.0, 0.0), (0.5, 0.8), (1.0, 1.0)])
SPACING = 1.0 / 100_000


def records(thresholds, scores, alpha):
    return [PredictorRecord.build(t + 1, alpha, float(a), float(b)) for t, (a, b) in enumerate(zip(thresholds, scores))]


class TestPsi:
    def test_examples(self):
        assert psi(UNIFORM, 0.5, 0.5) == pytest.approx(0.125)
        assert psi(UNIFORM, 0.0, 0.0) == pytest.approx(0.0)
        for a in (0.1, 0.6, 0.9):
            assert psi(UNIFORM, a, a) == pytest.approx(a * (1 - a) / 2)

    @given(st.floats(0, 1), st.floats(0, 1))
    def test_uniform_closed_form(self, alpha, r):
        assert psi(UNIFORM, alpha, r) == pytest.approx(r * r / 2 - alpha * r + alpha / 2, abs=1e-12)

    @pytest.mark.parametrize("prior", [UNIFORM, TWO_PIECE, Prior([(0, 0), (0.3, 0.6), (2.0, 1.0)])])
    def test_is_expected_loss(self, prior):
        # Monte-Carlo-free check: quadrature of the loss against the prior density
        grid = np.linspace(0, prior.R, 400_001)
        mid = (grid[1:] + grid[:-1]) / 2
        mass = np.diff(np.interp(grid, prior.xs, prior.fs))
        for alpha in (0.2, 0.7):
            for r in (0.0, 0.1 * prior.R, 0.55 * prior.R, prior.R, -0.3, prior.R + 0.4):
                want = float(np.sum(mass * quantile_loss_array(alpha, r, mid)))
                assert psi(prior, alpha, r) == pytest.approx(want, abs=1e-8)

    def test_derivatives_match_finite_differences(self, rng):
        reg = RegularizerPsi(TWO_PIECE, 0.35)
        h = 1e-6
        for r in rng.uniform(0.01, 0.99, 100):
            if abs(r - 0.5) < 1e-4:
                continue
            fd = (reg(r + h) - reg(r - h)) / (2 * h)
            assert reg.derivative(r) == pytest.approx(fd, abs=1e-6)
            fd2 = (reg.derivative(r + h) - reg.derivative(r - h)) / (2 * h)
            assert reg.second_derivative(r) == pytest.approx(fd2, abs=1e-6)
            assert reg.second_derivative(r) == pytest.approx(TWO_PIECE.density(r))

    def test_nonnegative_convex(self):
        reg = RegularizerPsi(TWO_PIECE, 0.8)
        xs = np.linspace(0, 1, 1001)
        v = reg(xs)
        assert np.all(v >= -1e-15)
        assert np.all(np.diff(v, 2) >= -1e-12)


class TestWeights:
    def test_sqrt_weight_monotone(self):
        t = np.arange(1, 1_000_001, dtype=float)
        h = sqrt_regularizer_weight(t)
        assert np.all(np.diff(h) >= 0)
        assert h[0] == 1.0

    def test_matches_general_formula(self):
        for t in (2, 5, 100):
            assert regularizer_weight(1 / np.sqrt(t), t) == pytest.approx(float(sqrt_regularizer_weight(t)))


class TestMinimize:
    @pytest.mark.parametrize("alpha", [0.0, 0.25, 0.9, 1.0])
    def test_empty_sum(self, alpha):
        got = minimize_objective(FtrlObjective(UNIFORM, alpha, []))
        assert got == pytest.approx(alpha, abs=SPACING)

    def test_two_rounds(self):
        got = minimize_objective(FtrlObjective(UNIFORM, 0.5, [0.3], 1 / np.sqrt(2)))
        assert got == pytest.approx(0.3, abs=SPACING)

    def test_discounted_small_beta_dominated_by_psi(self):
        beta = 0.01
        got = minimize_objective(DiscountedObjective(UNIFORM, 0.6, [0.95], beta, discounted_lambda(beta)))
        assert got == pytest.approx(0.6, abs=0.02)

    def test_resolution_floor(self):
        with pytest.raises(ValueError):
            minimize_objective(FtrlObjective(UNIFORM, 0.5, []), resolution=1000)

    def test_agrees_with_engine(self, rng):
        for _ in range(10):
            scores = rng.random(int(rng.integers(1, 20)))
            t = len(scores) + 1
            e = ExactBelief(TWO_PIECE)
            e.observe_many(scores)
            a = float(rng.random())
            want = minimize_objective(FtrlObjective(TWO_PIECE, a, scores, 1 / np.sqrt(t)))
            assert e.quantile(a) == pytest.approx(want, abs=2 * SPACING)

    def test_discounted_agrees_with_engine(self, rng):
        beta = 0.8
        for _ in range(10):
            d = DiscountedBelief(TWO_PIECE, 21, beta)
            scores = rng.random(int(rng.integers(1, 20)))
            d.observe_many(scores)
            a = float(rng.random())
            obj = DiscountedObjective(TWO_PIECE, a, [d.round(x) for x in scores], beta, discounted_lambda(beta))
            assert d.quantile(a) == pytest.approx(minimize_objective(obj), abs=2 * SPACING)


class TestRegret:
    def test_replaying_comparator_is_zero(self, rng):
        scores = rng.random(50)
        q = empirical_quantile(0.7, scores)
        assert regret(records([q] * 50, scores, 0.7)) == pytest.approx(0.0, abs=1e-12)

    def test_single_round(self):
        # the comparator is r*_1 itself, so regret is -l(q, r*_1) = 0 here
        assert regret(records([0.4], [0.4], 0.3)) == 0.0
        assert regret(records([0.9], [0.4], 0.3)) == pytest.approx(quantile_loss(0.3, 0.9, 0.4))

    def test_erm_alternating(self):
        from bayescp.predictors import ERMPredictor

        scores = generate(SequenceSpec("alternating", 1000))
        th = ERMPredictor().run(scores, [0.5])[:, 0]
        assert regret_from_arrays(th, scores, 0.5) == pytest.approx(250, abs=2)

    def test_empty_and_mixed(self):
        assert regret([]) == 0.0
        mixed = records([0.1], [0.2], 0.3) + records([0.1], [0.2], 0.4)
        with pytest.raises(ValueError):
            regret(mixed)
        with pytest.raises(ValueError):
            regret(records([0.1], [0.2], 0.3), alpha=0.4)


class TestDiscountedRegret:
    def test_single_term(self):
        assert discounted_regret(records([0.5], [0.2], 0.5), 0.5, 0.9) == pytest.approx(0.15)

    def test_all_correct_nonpositive(self, rng):
        scores = rng.random(30)
        assert discounted_regret(records(scores, scores, 0.4), 0.4, 0.9) <= 1e-12

    def test_scripted_shift_against_brute_force(self, rng):
        scores = generate(SequenceSpec("scripted_shift", 200, seed=3))
        th = rng.random(200)
        alpha, beta = 0.7, 0.97
        T = len(scores)
        w = beta ** (T - 1 - np.arange(T))
        grid = np.linspace(0, 1, 20_001)
        fixed = [float((w * [quantile_loss(alpha, r, x) for x in scores]).sum()) for r in grid[::4]]
        incurred = float((w * [quantile_loss(alpha, a, x) for a, x in zip(th, scores)]).sum())
        brute = incurred - min(fixed)
        got = discounted_regret_from_arrays(th, scores, alpha, beta)
        # the library minimizes exactly over kinks; the coarse brute grid can only overestimate
        assert got >= brute - 1e-9
        assert got == pytest.approx(brute, abs=2 * 1e-4)


class TestCoverageError:
    def test_examples(self):
        assert coverage_error(records([0.5] * 4, [1.0, 0.0, 1.0, 0.0], 0.5)) == 0.0
        assert coverage_error(records([1.0] * 3, [0.2, 0.4, 0.9], 0.8)) == pytest.approx(0.2)

    def test_empty(self):
        with pytest.raises(ValueError):
            coverage_error([])
