import math

import numpy as np
import pytest
from numpy.polynomial.hermite_e import hermegauss

from wicksde import wick
from wicksde.wick import (
    SERIES_THRESHOLD,
    ExponentOverflowError,
    WickIncrementInput,
    hermite,
    increment_array,
    truncated_wick_increment,
    wick_exponential,
    wick_power,
    wick_scheme_increment,
)


def gh_rule(n=64):
    """Gauss-Hermite nodes/weights for the standard normal weight."""
    nodes, weights = hermegauss(n)
    return nodes, weights / math.sqrt(2.0 * math.pi)


class TestHermite:
    def test_degree_zero_is_one(self):
        assert hermite(0, 3.7) == 1.0

    def test_degree_two(self):
        for x, expected in [(0.0, -1.0), (1.0, 0.0), (2.0, 3.0)]:
            assert hermite(2, x) == expected

    def test_degree_five_against_monomial_expansion(self):
        # He5(x) = x^5 - 10x^3 + 15x; all quantities dyadic at x = 1.25
        x = 1.25
        expected = x**5 - 10.0 * x**3 + 15.0 * x
        assert expected == 2.2705078125
        assert hermite(5, x) == pytest.approx(expected, rel=1e-15)

    def test_array_input(self):
        x = np.linspace(-2, 2, 7)
        assert np.allclose(hermite(3, x), x**3 - 3 * x, rtol=1e-13, atol=1e-13)

    def test_degree_cap(self):
        with pytest.raises(ValueError, match="exceeds"):
            hermite(65, 0.0)
        with pytest.raises(ValueError):
            hermite(-1, 0.0)


class TestWickPower:
    def test_first_power_is_the_increment(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            db = float(rng.normal())
            assert wick_power(db, 0.25, 1) == db

    def test_second_power(self):
        dt = 1.0 / 16.0
        for db in (-0.3, 0.0, 0.5):
            assert wick_power(db, dt, 2) == db * db - dt

    def test_third_power_direct_formula(self):
        # db^3 - 3*dt*db
        direct = 0.2**3 - 3.0 * 0.01 * 0.2
        assert direct == pytest.approx(0.002, rel=1e-14)
        assert wick_power(0.2, 0.01, 3) == pytest.approx(direct, rel=1e-14)

    def test_matches_scaled_hermite(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            dt = float(rng.uniform(0.001, 1.0))
            db = float(rng.normal(0.0, math.sqrt(dt)))
            for j in range(9):
                scaled = dt ** (j / 2.0) * hermite(j, db / math.sqrt(dt))
                assert wick_power(db, dt, j) == pytest.approx(scaled, rel=1e-11, abs=1e-13)

    def test_bad_dt(self):
        with pytest.raises(ValueError):
            wick_power(0.1, 0.0, 2)


class TestWickExponential:
    def test_zero_exponent(self):
        assert wick_exponential(0.0, 0.37, 0.1) == 1.0

    def test_closed_form_value(self):
        assert wick_exponential(1.0, 0.1, 0.01) == pytest.approx(math.exp(0.095), rel=1e-15)

    def test_compensator_pulls_below_one(self):
        for u in (0.5, -2.0, 7.0):
            assert 0.0 < wick_exponential(u, 0.0, 0.1) < 1.0

    def test_conditional_mean_one(self):
        nodes, weights = gh_rule()
        for u in (0.5, 1.0, 2.0):
            for dt in (0.1, 0.01):
                vals = np.exp(u * math.sqrt(dt) * nodes - 0.5 * u * u * dt)
                assert abs(float(weights @ vals) - 1.0) < 1e-10

    def test_second_moment_identity(self):
        nodes, weights = gh_rule()
        for u in (0.5, 1.0, 2.0):
            for dt in (0.1, 0.01):
                vals = (np.exp(u * math.sqrt(dt) * nodes - 0.5 * u * u * dt) - 1.0) ** 2
                assert abs(float(weights @ vals) - math.expm1(u * u * dt)) < 1e-10

    def test_overflow_guard_carries_exponent(self):
        with pytest.raises(ExponentOverflowError) as exc:
            wick_exponential(40.0, 40.0, 1e-6)
        assert exc.value.exponent > 700.0


class TestOrthogonality:
    def test_wick_powers_orthogonal_with_factorial_norms(self):
        nodes, weights = gh_rule()
        he = [hermite(j, nodes) for j in range(9)]
        for i in range(9):
            for j in range(9):
                inner = float(weights @ (he[i] * he[j]))
                expected = float(math.factorial(j)) if i == j else 0.0
                assert abs(inner - expected) < 1e-8


class TestSchemeIncrement:
    def test_vanishing_derivative_reduces_to_euler(self):
        inp = WickIncrementInput(2.0, 0.0, 0.3, 0.01)
        assert wick_scheme_increment(inp) == 0.6

    def test_closed_form_value(self):
        inp = WickIncrementInput(1.0, 1.0, 0.1, 0.01)
        assert wick_scheme_increment(inp) == pytest.approx(math.expm1(0.095), rel=1e-15)

    def test_tiny_derivative_hits_series_branch(self):
        inp = WickIncrementInput(2.0, 1e-12, 0.3, 0.01)
        got = wick_scheme_increment(inp)
        assert got == pytest.approx(0.6, rel=1e-10)
        # high-precision closed form as independent oracle
        import mpmath

        mpmath.mp.dps = 50
        u, db, dt = mpmath.mpf(1e-12), mpmath.mpf(0.3), mpmath.mpf("0.01")
        oracle = (2 / u) * (mpmath.e ** (u * db - u * u * dt / 2) - 1)
        assert got == pytest.approx(float(oracle), rel=1e-12)

    def test_branches_agree_in_overlap_band(self):
        # evaluate both branch formulas directly where the scale sits near
        # the switch and require 1e-10 relative agreement
        db, dt = 0.05, 0.01
        base = abs(db) + math.sqrt(dt)
        for scale in np.linspace(0.3 * SERIES_THRESHOLD, 3.0 * SERIES_THRESHOLD, 101):
            u = scale / base
            closed = (1.0 / u) * math.expm1(u * db - 0.5 * u * u * dt)
            w2 = db * db - dt
            w3 = db * w2 - 2.0 * dt * db
            series = (db + (u * 0.5) * w2) + (u * u / 6.0) * w3
            assert closed == pytest.approx(series, rel=1e-10)

    def test_continuity_across_branch_switch(self):
        # dense sweep through u in [eps/10, 10*eps]; adjacent evaluations may
        # differ only by the genuine smooth variation, never by a branch jump
        db, dt = 0.05, 0.01
        u = np.geomspace(SERIES_THRESHOLD / 10.0, 10.0 * SERIES_THRESHOLD, 800001)
        inc = increment_array(1.0, u, db, dt)
        rel = np.abs(np.diff(inc)) / np.abs(inc[:-1])
        assert float(rel.max()) <= 1e-9

    def test_scalar_matches_array_kernel(self):
        db, dt = 0.05, 0.01
        for u in np.geomspace(1e-6, 1.0, 25):
            scalar = wick_scheme_increment(WickIncrementInput(1.3, float(u), db, dt))
            arr = float(increment_array(1.3, u, db, dt))
            assert scalar == pytest.approx(arr, rel=1e-12)

    def test_overflow_propagates(self):
        with pytest.raises(ExponentOverflowError):
            wick_scheme_increment(WickIncrementInput(1.0, 40.0, 40.0, 1e-6))

    def test_input_validation(self):
        with pytest.raises(ValueError):
            WickIncrementInput(1.0, 1.0, 0.1, 0.0)
        with pytest.raises(ValueError):
            WickIncrementInput(math.nan, 1.0, 0.1, 0.1)


class TestTruncatedIncrement:
    def test_order_one_is_euler(self):
        rng = np.random.default_rng(5)
        for _ in range(1000):
            inp = WickIncrementInput(
                float(rng.normal()), float(rng.normal()),
                float(rng.normal(0.0, 0.1)), float(rng.uniform(0.001, 0.1)),
            )
            assert truncated_wick_increment(inp, 1) == inp.sigma_x * inp.db

    def test_order_two_worked_example(self):
        # db^2 == dt kills the correction term
        inp = WickIncrementInput(1.0, 1.0, 0.1, 0.01)
        assert truncated_wick_increment(inp, 2) == pytest.approx(0.1, rel=1e-15)

    def test_large_order_converges_to_closed_form(self):
        rng = np.random.default_rng(6)
        for _ in range(200):
            u = float(rng.uniform(-2.0, 2.0))
            db = float(rng.uniform(-0.5, 0.5))
            if abs(u * db) > 1.0:
                continue
            inp = WickIncrementInput(1.7, u, db, 0.01)
            series = truncated_wick_increment(inp, 40)
            closed = wick_scheme_increment(inp)
            assert series == pytest.approx(closed, rel=1e-12, abs=1e-15)

    def test_order_bounds(self):
        inp = WickIncrementInput(1.0, 1.0, 0.1, 0.01)
        with pytest.raises(ValueError):
            truncated_wick_increment(inp, 0)
        with pytest.raises(ValueError):
            truncated_wick_increment(inp, 65)

    def test_array_kernel_matches_scalar(self):
        rng = np.random.default_rng(7)
        sigma = rng.normal(size=50)
        u = rng.normal(size=50)
        db = rng.normal(0.0, 0.1, size=50)
        dt = 0.02
        arr = wick.truncated_increment_array(sigma, u, db, dt, 5)
        for i in range(50):
            inp = WickIncrementInput(float(sigma[i]), float(u[i]), float(db[i]), dt)
            assert arr[i] == truncated_wick_increment(inp, 5)
