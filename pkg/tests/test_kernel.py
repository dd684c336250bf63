import math

import numpy as np
import pytest

from meancompare.battery import BOX, bisect_root, fd_mean_gradient, fd_mean_hessian, random_mean
from meancompare.expr import eval_expr
from meancompare.kernel import (
    GeneratorSpec,
    Interval,
    InversionError,
    MeanSpec,
    SpecError,
    WeightFamily,
    Window,
    diag_first_partial,
    diag_first_partials,
    diag_second_partials,
    eval_mean,
    eval_mean_batch,
    invert_generator,
    power_mean,
    sample_points,
)

POS = Interval(0.0, math.inf)


def mean(f, weights, domain=POS):
    return MeanSpec(GeneratorSpec.create(f, domain), WeightFamily.create(weights, domain))


class TestInterval:
    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            Interval(1.0, 1.0)

    def test_membership_is_open(self):
        assert 0.0 not in POS and 1e-300 in POS

    def test_window_defaults(self):
        w = Window.for_interval(POS)
        assert w.log and w.lo == pytest.approx(1e-6) and w.hi == pytest.approx(1e6)
        w = Window.for_interval(Interval(-math.inf, math.inf))
        assert not w.log and (w.lo, w.hi) == (-100.0, 100.0)

    def test_window_outside_interval(self):
        with pytest.raises(ValueError):
            Window.for_interval(Interval(0.5, 4.0), (0.1, 2.0))

    def test_log_spaced_samples(self):
        xs = sample_points(POS, 5, (1.0, 1e4))
        assert np.allclose(xs, [1, 10, 100, 1000, 10000])


class TestSpecs:
    def test_direction(self):
        assert GeneratorSpec.create("x^2", POS).direction == 1
        assert GeneratorSpec.create("1/x", POS).direction == -1

    def test_non_monotone_generator(self):
        with pytest.raises(SpecError):
            GeneratorSpec.create("x^2", Interval(-1.0, 1.0))

    def test_nonpositive_weight(self):
        with pytest.raises(SpecError, match="not positive"):
            WeightFamily.create(["1", "x - 1"], POS)

    def test_single_weight(self):
        with pytest.raises(SpecError):
            WeightFamily.create(["1"], POS)

    def test_total(self):
        w = WeightFamily.create(["x", "x^2"], POS)
        assert w.n == 2
        assert eval_expr(w.total, 2.0) == 6.0

    def test_domain_mismatch(self):
        f = GeneratorSpec.create("x", POS)
        p = WeightFamily.create(["1", "1"], Interval(0.0, 1.0))
        with pytest.raises(SpecError):
            MeanSpec(f, p)


class TestInversion:
    def test_square(self):
        assert invert_generator(GeneratorSpec.create("x^2", POS), 4.0) == pytest.approx(2.0, abs=1e-12)

    def test_log(self):
        assert invert_generator(GeneratorSpec.create("log(x)", POS), 0.0) == pytest.approx(1.0, abs=1e-12)

    def test_cubic_against_bisection(self):
        g = GeneratorSpec.create("x + x^3", Interval(0.0, 2.0))
        oracle = bisect_root(lambda t: t + t**3, 2.5, 0.0, 2.0)
        assert oracle == pytest.approx(1.1147471097, abs=1e-9)
        x = invert_generator(g, 2.5)
        assert x == pytest.approx(oracle, abs=1e-11)
        assert abs(x + x**3 - 2.5) <= 1e-12 * 3.5

    def test_decreasing(self):
        g = GeneratorSpec.create("1/x", POS)
        assert invert_generator(g, 4.0) == pytest.approx(0.25, rel=1e-13)

    def test_outside_image(self):
        g = GeneratorSpec.create("x^2", Interval(0.0, 2.0))
        with pytest.raises(InversionError, match="searched"):
            invert_generator(g, 10.0)

    def test_far_tail(self):
        g = GeneratorSpec.create("log(x)", POS)
        assert invert_generator(g, 40.0) == pytest.approx(math.exp(40.0), rel=1e-12)


class TestEvalMean:
    def test_arithmetic(self):
        assert eval_mean(mean("x", ["1", "1"]), [2, 4]) == 3

    def test_quadratic(self):
        assert eval_mean(mean("x^2", ["1", "1"]), [1, 2]) == pytest.approx(math.sqrt(2.5), rel=1e-14)

    def test_weighted_against_direct_formula(self):
        m = mean("exp(x)", ["x", "1 + x^2", "2"], Interval(0.0, 5.0))
        xs = np.array([0.3, 1.7, 2.2])
        p = np.array([xs[0], 1 + xs[1] ** 2, 2.0])
        assert eval_mean(m, xs) == pytest.approx(math.log((p * np.exp(xs)).sum() / p.sum()), rel=1e-13)

    @pytest.mark.parametrize("c", [1e-3, 0.7, 42.0])
    def test_reflexive(self, c):
        m = mean("x^-0.5", ["x", "3"])
        assert abs(eval_mean(m, [c, c]) - c) <= 1e-12 * max(1, c)

    def test_batch_matches_scalar(self):
        m = power_mean(-1.5, [1, 2, 0.5], [0, 1, -1])
        rng = np.random.default_rng(7)
        X = np.exp(rng.uniform(-3, 3, (300, 3)))
        assert np.allclose(eval_mean_batch(m, X), [eval_mean(m, row) for row in X], rtol=1e-13)

    def test_arity(self):
        with pytest.raises(ValueError):
            eval_mean(mean("x", ["1", "1"]), [1, 2, 3])

    def test_strict_bounds(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            m = random_mean(rng, 3)
            xs = rng.uniform(0.51, 2.99, 3)
            v = eval_mean(m, xs)
            assert xs.min() < v < xs.max()


class TestDiagonalPartials:
    def test_unit_weights(self):
        m = mean("x", ["1", "1", "1"])
        assert np.allclose(diag_first_partials(m, 1.7), 1 / 3)

    def test_polynomial_weights(self):
        m = mean("x", ["x", "x^2"])
        assert diag_first_partial(m, 0, 2.0) == pytest.approx(1 / 3)
        assert diag_first_partial(m, 1, 2.0) == pytest.approx(2 / 3)

    def test_row_sum(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            m = random_mean(rng, 4)
            assert abs(diag_first_partials(m, 1.3).sum() - 1) <= 1e-12

    def test_linear_generator_unit_weights(self):
        assert np.allclose(diag_second_partials(mean("x", ["1", "1"]), 2.0), 0.0)

    def test_square_generator(self):
        H = diag_second_partials(mean("x^2", ["1", "1"]), 1.0)
        assert np.allclose(H, [[0.25, -0.25], [-0.25, 0.25]])

    def test_against_finite_differences(self):
        m = mean("x + 0.3*x^3", ["2*x^-1", "exp(0.4*x)", "1 + x^2"], BOX)
        for x in (0.8, 1.6, 2.4):
            assert np.allclose(diag_first_partials(m, x), fd_mean_gradient(m, x), atol=1e-9)
            H = diag_second_partials(m, x)
            assert np.allclose(H, H.T)
            assert np.allclose(H, fd_mean_hessian(m, x), atol=1e-7)
