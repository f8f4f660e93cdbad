"""Unit tests for the 2x2 symmetric spectral toolkit."""

import numpy as np
import pytest

from rootbasins.linalg2 import (
    Sym2,
    Vec2,
    eigen_sym2,
    minsp,
    reflect_abs_solve,
    solve_sym2,
    sp,
)


def times(A, v):
    return Vec2(A.a11 * v.x + A.a12 * v.y, A.a12 * v.x + A.a22 * v.y)


def random_invertible(rng, n):
    a11, a12, a22 = rng.uniform(-5, 5, size=(3, n))
    A = Sym2(a11, a12, a22)
    keep = minsp(A) > 1e-3
    return Sym2(a11[keep], a12[keep], a22[keep])


class TestEigenSym2:
    """Tests for eigen_sym2."""

    def test_diagonal(self):
        """Test a diagonal matrix keeps axis-aligned eigenvectors."""
        eig = eigen_sym2(Sym2(3.0, 0.0, -2.0))

        assert (eig.lambda1, eig.lambda2) == (3.0, -2.0)
        assert (eig.e1.x, eig.e1.y) == (1.0, 0.0)
        assert (eig.e2.x, eig.e2.y) == (0.0, 1.0)

    def test_diagonal_larger_second_entry(self):
        """Test the leading eigenvector follows the larger diagonal entry."""
        eig = eigen_sym2(Sym2(2.0, 0.0, 6.0))

        assert (eig.lambda1, eig.lambda2) == (6.0, 2.0)
        assert (eig.e1.x, eig.e1.y) == (0.0, 1.0)

    def test_off_diagonal(self):
        """Test [[0, 2], [2, 0]]."""
        eig = eigen_sym2(Sym2(0.0, 2.0, 0.0))

        assert eig.lambda1 == pytest.approx(2.0)
        assert eig.lambda2 == pytest.approx(-2.0)
        assert abs(eig.e1.x * eig.e1.y) == pytest.approx(0.5)
        assert eig.e1.x * eig.e1.y > 0
        assert eig.e2.x * eig.e2.y < 0

    def test_tie_is_axis_aligned(self):
        """Test a multiple of the identity returns the coordinate axes."""
        eig = eigen_sym2(Sym2.identity())

        assert (eig.e1.x, eig.e1.y, eig.e2.x, eig.e2.y) == (1.0, 0.0, 0.0, 1.0)

    def test_decomposition_properties(self):
        """Test orthonormality and A e = lambda e on random matrices."""
        rng = np.random.default_rng(0)
        A = Sym2(*rng.uniform(-10, 10, size=(3, 1000)))
        eig = eigen_sym2(A)
        tol = 1e-10 * (1 + sp(A))

        for lam, e in ((eig.lambda1, eig.e1), (eig.lambda2, eig.e2)):
            assert np.allclose(e.norm(), 1.0, atol=1e-12)
            Ae = times(A, e)
            assert np.all(np.abs(Ae.x - lam * e.x) <= tol)
            assert np.all(np.abs(Ae.y - lam * e.y) <= tol)
        assert np.all(np.abs(eig.e1.dot(eig.e2)) <= 1e-12)
        assert np.all(eig.lambda1 >= eig.lambda2)


class TestSpectralRadius:
    """Tests for sp and minsp."""

    @pytest.mark.parametrize(
        "matrix, expected_sp, expected_minsp",
        [
            (Sym2(3.0, 0.0, -2.0), 3.0, 2.0),
            (Sym2.identity(), 1.0, 1.0),
            (Sym2(1.0, 0.0, 0.0), 1.0, 0.0),
        ],
    )
    def test_values(self, matrix, expected_sp, expected_minsp):
        """Test sp and minsp on diagonal matrices."""
        assert sp(matrix) == expected_sp
        assert minsp(matrix) == expected_minsp

    def test_match_eigenvalues(self):
        """Test sp/minsp agree with the eigenvalues from eigen_sym2."""
        rng = np.random.default_rng(1)
        A = Sym2(*rng.normal(size=(3, 200)))
        eig = eigen_sym2(A)

        assert np.array_equal(sp(A), np.maximum(np.abs(eig.lambda1), np.abs(eig.lambda2)))
        assert np.array_equal(minsp(A), np.minimum(np.abs(eig.lambda1), np.abs(eig.lambda2)))


class TestReflectAbsSolve:
    """Tests for reflect_abs_solve."""

    def test_positive_definite(self):
        """Test a positive definite matrix gives the plain solve."""
        w = reflect_abs_solve(Sym2(2.0, 0.0, 1.0), Vec2(2.0, 1.0))

        assert (w.x, w.y) == pytest.approx((1.0, 1.0))

    def test_indefinite(self):
        """Test [[0, 2], [2, 0]] with g = (2, 0)."""
        w = reflect_abs_solve(Sym2(0.0, 2.0, 0.0), Vec2(2.0, 0.0))

        assert w.x == pytest.approx(1.0)
        assert w.y == pytest.approx(0.0, abs=1e-15)

    def test_negative_definite(self):
        """Test -Id reflects to Id."""
        w = reflect_abs_solve(Sym2(-1.0, 0.0, -1.0), Vec2(5.0, -3.0))

        assert (w.x, w.y) == pytest.approx((5.0, -3.0))

    def test_singular_raises(self):
        """Test error with a singular matrix."""
        with pytest.raises(np.linalg.LinAlgError, match="invertible"):
            reflect_abs_solve(Sym2(1.0, 0.0, 0.0), Vec2(1.0, 1.0))

    def test_norm_preserved_and_descent(self):
        """Test ||w|| = ||A^-1 g|| and <w, g> > 0 on random matrices."""
        rng = np.random.default_rng(2)
        A = random_invertible(rng, 1000)
        g = Vec2(*rng.normal(size=(2, A.a11.size)))

        w = reflect_abs_solve(A, g)
        v = solve_sym2(A, g)

        assert np.allclose(w.norm(), v.norm(), rtol=1e-10)
        assert np.all(w.dot(g) > 0)

    def test_matches_direct_solve_when_positive_definite(self):
        """Test positive definite matrices agree with Cramer's rule."""
        rng = np.random.default_rng(3)
        B = rng.normal(size=(500, 2, 2))
        M = B @ B.transpose(0, 2, 1) + 0.1 * np.eye(2)
        A = Sym2(M[:, 0, 0], M[:, 0, 1], M[:, 1, 1])
        g = Vec2(*rng.normal(size=(2, 500)))

        w = reflect_abs_solve(A, g)
        v = solve_sym2(A, g)

        assert np.allclose(w.x, v.x, rtol=1e-10, atol=1e-10)
        assert np.allclose(w.y, v.y, rtol=1e-10, atol=1e-10)
