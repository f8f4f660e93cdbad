"""Unit tests for the function catalog and jet evaluation."""

import numpy as np
import pytest

from rootbasins.function_core import (
    CATALOG,
    NewtonQuotient,
    PolyCoeffs,
    PolyFromRoots,
    RootSpec,
    TimesExp,
    TranscendentalF23,
    catalog_lookup,
    declared_roots,
    eval_jet,
    expand_roots_to_coeffs,
    objective_jet,
    objective_value,
)

POLYNOMIAL_IDS = [name for name, fn in CATALOG.items() if isinstance(fn, PolyFromRoots)]


def roots_of(*factors):
    return PolyFromRoots(tuple(RootSpec(*f) if isinstance(f, tuple) else RootSpec(f)
                               for f in factors))


class TestCatalog:
    """Tests for catalog_lookup and declared_roots."""

    def test_f1(self):
        """Test f1 = z(z - i)(z - 3 - 2i) keeps its root order."""
        fn = catalog_lookup("f1")

        assert [r.location for r in fn.roots] == [0, 1j, 3 + 2j]
        assert all(r.multiplicity == 1 for r in fn.roots)

    def test_f9_multiplicities(self):
        """Test f9 = z^2 (z - i)^2."""
        fn = catalog_lookup("f9")

        assert fn.roots == (RootSpec(0, 2), RootSpec(1j, 2))

    def test_f23(self):
        """Test f23 carries its eight listed roots."""
        fn = catalog_lookup("f23")

        assert isinstance(fn, TranscendentalF23)
        roots = declared_roots(fn)
        assert len(roots) == 8
        assert roots[0].location == 0.01453348 + 0.24577632j

    def test_times_exp_entries(self):
        """Test f24 and f25 wrap f7 and f17."""
        assert catalog_lookup("f24") == TimesExp(catalog_lookup("f7"))
        assert catalog_lookup("f25") == TimesExp(catalog_lookup("f17"))

    def test_catalog_size(self):
        """Test the catalog holds f1..f25."""
        assert list(CATALOG) == [f"f{i}" for i in range(1, 26)]

    def test_unknown_id(self):
        """Test error for an unknown function id."""
        with pytest.raises(ValueError, match="Unknown function"):
            catalog_lookup("f26")

    def test_coefficient_form_has_no_roots(self):
        """Test declared_roots refuses a coefficient-form polynomial."""
        with pytest.raises(ValueError, match="not declared"):
            declared_roots(PolyCoeffs(np.array([-1, 0, 1])))


class TestExpandRoots:
    """Tests for expand_roots_to_coeffs."""

    def test_single_root_at_zero(self):
        """Test [0] -> z."""
        assert np.array_equal(expand_roots_to_coeffs([RootSpec(0)]), [0, 1])

    def test_double_root(self):
        """Test (z - i)^2 = z^2 - 2iz - 1."""
        coeffs = expand_roots_to_coeffs([RootSpec(1j, 2)])

        assert np.allclose(coeffs, [-1, -2j, 1])

    def test_f1(self):
        """Test f1 expands to z^3 - (3+3i) z^2 + (-2+3i) z."""
        coeffs = expand_roots_to_coeffs(catalog_lookup("f1").roots)

        assert np.allclose(coeffs, [0, -2 + 3j, -(3 + 3j), 1])

    def test_degree_limit(self):
        """Test error above degree 64."""
        with pytest.raises(ValueError, match="exceeds"):
            expand_roots_to_coeffs([RootSpec(1, 65)])

    def test_invalid_multiplicity(self):
        """Test error for multiplicity zero."""
        with pytest.raises(ValueError, match="multiplicity"):
            RootSpec(1, 0)


class TestEvalJet:
    """Tests for eval_jet."""

    def test_f1_at_zero(self):
        """Test the jet of f1 at its root 0."""
        jet = eval_jet(catalog_lookup("f1"), 0)

        assert jet.f == 0
        assert jet.df == pytest.approx(-2 + 3j)
        assert jet.d2f == pytest.approx(-6 - 6j)
        assert jet.valid

    def test_coefficients(self):
        """Test z^2 - 1 at 2."""
        jet = eval_jet(PolyCoeffs(np.array([-1, 0, 1])), 2)

        assert (jet.f, jet.df, jet.d2f) == (3, 4, 2)

    def test_newton_quotient_of_square(self):
        """Test g = z^2 / 2z = z/2 at 1."""
        jet = eval_jet(NewtonQuotient(PolyCoeffs(np.array([0, 0, 1]))), 1)

        assert jet.f == pytest.approx(0.5)
        assert jet.df == pytest.approx(0.5)
        assert jet.d2f == pytest.approx(0.0, abs=1e-15)

    def test_newton_quotient_pole_is_invalid(self):
        """Test f'(z) = 0 makes the quotient jet invalid instead of raising."""
        jet = eval_jet(NewtonQuotient(PolyCoeffs(np.array([-1, 0, 1]))), 0)

        assert not jet.valid

    def test_times_exp(self):
        """Test (z e^z)' = (1 + z) e^z and (z e^z)'' = (2 + z) e^z."""
        z = 0.3 - 0.7j
        jet = eval_jet(TimesExp(roots_of(0)), z)

        assert jet.f == pytest.approx(z * np.exp(z))
        assert jet.df == pytest.approx((1 + z) * np.exp(z))
        assert jet.d2f == pytest.approx((2 + z) * np.exp(z))

    def test_f23_closed_form(self):
        """Test f23 and its derivatives against the closed forms."""
        z = 1.2 + 0.4j
        jet = eval_jet(TranscendentalF23(), z)

        assert jet.f == pytest.approx(z**2 + np.cos(z) + 2 * np.sin(z) - 1 - 0.5j)
        assert jet.df == pytest.approx(2 * z - np.sin(z) + 2 * np.cos(z))
        assert jet.d2f == pytest.approx(2 - np.cos(z) - 2 * np.sin(z))

    def test_overflow_is_invalid(self):
        """Test values beyond the overflow limit flag the jet."""
        jet = eval_jet(TimesExp(roots_of(0)), 400.0)

        assert not jet.valid

    def test_vectorized(self):
        """Test array input evaluates elementwise."""
        z = np.array([[0, 1j], [2, 3 + 2j]])
        jet = eval_jet(catalog_lookup("f1"), z)

        assert jet.f.shape == (2, 2)
        assert np.allclose(jet.f[[0, 0, 1], [0, 1, 1]], 0)

    @pytest.mark.parametrize("name", POLYNOMIAL_IDS)
    def test_matches_product_form(self, name):
        """Test the expanded polynomial agrees with the product of its factors."""
        fn = catalog_lookup(name)
        rng = np.random.default_rng(4)
        z = rng.uniform(-14, 14, 50) + 1j * rng.uniform(-14, 14, 50)
        z = z[np.abs(z) <= 20]
        product = np.ones_like(z)
        for r in fn.roots:
            product *= (z - r.location) ** r.multiplicity

        assert np.allclose(eval_jet(fn, z).f, product, rtol=1e-10, atol=0)


class TestObjectiveJet:
    """Tests for objective_jet."""

    def test_identity_function(self):
        """Test f = z at 1 + i."""
        obj = objective_jet(roots_of(0), 1 + 1j)

        assert obj.value == pytest.approx(1.0)
        assert (obj.gradient.x, obj.gradient.y) == pytest.approx((1.0, 1.0))
        assert (obj.hessian.a11, obj.hessian.a12, obj.hessian.a22) == pytest.approx((1, 0, 1))

    def test_square_at_one(self):
        """Test f = z^2 at 1."""
        obj = objective_jet(roots_of((0, 2)), 1.0)

        assert (obj.gradient.x, obj.gradient.y) == pytest.approx((2.0, 0.0))
        assert (obj.hessian.a11, obj.hessian.a12, obj.hessian.a22) == pytest.approx((6, 0, 2))

    def test_square_at_zero(self):
        """Test f = z^2 has zero gradient and Hessian at its double root."""
        obj = objective_jet(roots_of((0, 2)), 0.0)

        assert (obj.gradient.x, obj.gradient.y) == (0.0, 0.0)
        assert (obj.hessian.a11, obj.hessian.a12, obj.hessian.a22) == (0.0, 0.0, 0.0)

    def test_invalid_propagates(self):
        """Test an invalid jet gives an invalid objective."""
        obj = objective_jet(NewtonQuotient(PolyCoeffs(np.array([-1, 0, 1]))), 0.0)

        assert not obj.valid
        assert np.isnan(obj.value)

    @pytest.mark.parametrize("name", POLYNOMIAL_IDS)
    def test_gradient_and_hessian_match_finite_differences(self, name):
        """Test grad F and Hess F against central differences of F."""
        fn = catalog_lookup(name)
        rng = np.random.default_rng(5)
        z = rng.uniform(-10, 10, 100) + 1j * rng.uniform(-10, 10, 100)
        obj = objective_jet(fn, z)
        h = 1e-5

        def F(w):
            return objective_value(fn, w)

        fx = (F(z + h) - F(z - h)) / (2 * h)
        fy = (F(z + 1j * h) - F(z - 1j * h)) / (2 * h)
        tol = 1e-6 * (1 + obj.gradient.norm())
        assert np.all(np.abs(obj.gradient.x - fx) <= tol)
        assert np.all(np.abs(obj.gradient.y - fy) <= tol)

        # Second differences of the exact gradient.
        def grad(w):
            return objective_jet(fn, w).gradient

        gxp, gxm = grad(z + h), grad(z - h)
        gyp, gym = grad(z + 1j * h), grad(z - 1j * h)
        fxx = (gxp.x - gxm.x) / (2 * h)
        fxy = (gyp.x - gym.x) / (2 * h)
        fyy = (gyp.y - gym.y) / (2 * h)
        scale = 1e-4 * (1 + np.abs(obj.hessian.a11) + np.abs(obj.hessian.a12)
                        + np.abs(obj.hessian.a22))
        assert np.all(np.abs(obj.hessian.a11 - fxx) <= scale)
        assert np.all(np.abs(obj.hessian.a12 - fxy) <= scale)
        assert np.all(np.abs(obj.hessian.a22 - fyy) <= scale)

    @pytest.mark.parametrize("name", ["f1", "f4", "f14"])
    def test_hessian_at_simple_roots(self, name):
        """Test Hess F = |f'|^2 Id at every simple root."""
        fn = catalog_lookup(name)
        for root in fn.roots:
            obj = objective_jet(fn, root.location)
            speed = abs(eval_jet(fn, root.location).df) ** 2

            assert obj.hessian.a11 == pytest.approx(speed, rel=1e-9)
            assert obj.hessian.a22 == pytest.approx(speed, rel=1e-9)
            assert abs(obj.hessian.a12) <= 1e-9 * speed


class TestNewtonQuotientRoots:
    """Tests that f/f' turns every root into a simple root."""

    @pytest.mark.parametrize("name", ["f3", "f6", "f9"])
    def test_multiple_roots_become_simple(self, name):
        """Test g' = 1/multiplicity at each root of f."""
        inner = catalog_lookup(name)
        fn = NewtonQuotient(inner)
        for root in inner.roots:
            z = root.location + 1e-3
            jet = eval_jet(fn, z)

            assert jet.valid
            assert abs(jet.f) < 1e-3
            assert jet.df == pytest.approx(1 / root.multiplicity, rel=1e-2)
