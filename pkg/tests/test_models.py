import math

import numpy as np
import pytest

from wicksde import models
from wicksde.models import (
    DEFAULT_PROBES,
    Diffusion,
    catalog,
    make_constant,
    make_linear,
    resolve_model,
    validate_model,
)


def central_difference(f, x, h=1e-6):
    return (float(f(x + h)) - float(f(x - h))) / (2.0 * h)


class TestCatalog:
    def test_required_entries_present(self):
        names = {e.name for e in catalog()}
        assert {"linear", "constant", "pythagoras", "sine"} <= names

    def test_derivatives_match_finite_differences(self):
        for entry in catalog():
            d = entry.diffusion
            for x in DEFAULT_PROBES:
                fd = central_difference(d.sigma, x)
                sp = float(d.sigma_prime(x))
                assert abs(fd - sp) <= 1e-6 * abs(sp) + 1e-9, (entry.name, x)

    def test_validate_model_clean_on_all_entries(self):
        for entry in catalog():
            assert validate_model(entry.diffusion, DEFAULT_PROBES) == []

    def test_declared_growth_constants_hold(self):
        for entry in catalog():
            d = entry.diffusion
            assert d.growth_constant is not None
            for x in DEFAULT_PROBES:
                assert float(d.sigma(x)) ** 2 <= d.growth_constant * (1 + x * x) * (1 + 1e-12)


class TestMakeLinear:
    def test_identity_coefficient(self):
        d = make_linear(1.0)
        assert float(d.sigma(2.0)) == 2.0
        assert float(d.sigma_prime(2.0)) == 1.0

    def test_exact_terminal_at_zero_brownian(self):
        d = make_linear(1.0)
        assert d.exact_terminal(1.0, 0.0, 1.0) == pytest.approx(math.exp(-0.5), rel=1e-15)

    def test_exact_terminal_general_point(self):
        # alpha=2, b=0.3, t=0.25: exponent 2*0.3 - 4*0.25/2 = 0.1
        d = make_linear(2.0)
        assert d.exact_terminal(1.0, 0.3, 0.25) == pytest.approx(math.exp(0.1), rel=1e-15)

    def test_zero_alpha_rejected(self):
        with pytest.raises(ValueError):
            make_linear(0.0)

    def test_exact_terminal_linear_in_a_and_positive(self):
        d = make_linear(1.5)
        rng = np.random.default_rng(3)
        for _ in range(200):
            a = float(rng.uniform(0.1, 5.0))
            b = float(rng.normal())
            t = float(rng.uniform(0.01, 2.0))
            one = d.exact_terminal(1.0, b, t)
            assert d.exact_terminal(a, b, t) == pytest.approx(a * one, rel=1e-14)
            assert d.exact_terminal(a, b, t) > 0.0


class TestMakeConstant:
    def test_zero_diffusion_is_frozen(self):
        assert make_constant(0.0).exact_terminal(5.0, 0.7, 1.0) == 5.0

    def test_unit_diffusion_shifts_by_brownian(self):
        assert make_constant(1.0).exact_terminal(0.0, 0.7, 1.0) == 0.7

    def test_linearity_in_brownian_value(self):
        assert make_constant(2.0).exact_terminal(1.0, -0.25, 0.5) == 0.5

    def test_sigma_prime_vanishes(self):
        d = make_constant(3.0)
        assert float(d.sigma(10.0)) == 3.0
        assert float(d.sigma_prime(10.0)) == 0.0
        assert d.lipschitz_sigma == 0.0


class TestValidateModel:
    def test_linear_clean(self):
        assert validate_model(make_linear(1.0), [-1.0, 0.0, 1.0]) == []

    def test_lipschitz_violation_reported(self):
        # sigma = x^2 with a claimed global Lipschitz constant of 1:
        # |sigma(10)-sigma(0)| = 100 > 1*10
        bad = Diffusion(
            sigma=lambda x: np.asarray(x, dtype=float) ** 2,
            sigma_prime=lambda x: 2.0 * np.asarray(x, dtype=float),
            lipschitz_sigma=1.0,
        )
        failures = validate_model(bad, [0.0, 10.0])
        assert any(f.invariant == "lipschitz" for f in failures)

    def test_wrong_derivative_reported(self):
        bad = Diffusion(sigma=np.sin, sigma_prime=np.sin)
        failures = validate_model(bad, [1.0])
        assert any(f.invariant == "derivative" for f in failures)

    def test_pythagoras_growth_is_tight_but_clean(self):
        entry = resolve_model("pythagoras")
        assert validate_model(entry.diffusion, [0.0, 1.0, 2.0]) == []

    def test_empty_probes_rejected(self):
        with pytest.raises(ValueError):
            validate_model(make_linear(1.0), [])


class TestResolveModel:
    def test_with_parameters(self):
        entry = resolve_model("linear:alpha=2.0")
        assert float(entry.diffusion.sigma(1.0)) == 2.0

    def test_default_parameters(self):
        entry = resolve_model("constant")
        assert float(entry.diffusion.sigma(0.0)) == 1.0

    def test_unknown_model(self):
        with pytest.raises(ValueError, match="unknown model"):
            resolve_model("heston")

    def test_unknown_parameter(self):
        with pytest.raises(ValueError, match="unknown parameter"):
            resolve_model("linear:beta=1")

    def test_malformed_parameter(self):
        with pytest.raises(ValueError):
            resolve_model("linear:alpha")

    def test_non_numeric_value(self):
        with pytest.raises(ValueError):
            resolve_model("linear:alpha=two")
