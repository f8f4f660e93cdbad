"""Spectral toolkit for 2x2 real symmetric matrices.

Every function works elementwise on arrays of matrices, so a whole block of pixels
can be decomposed in one call (scalars are treated as 0-d arrays).
"""

from dataclasses import dataclass

import numpy as np

# |a12| below this fraction of |a11| + |a22| is treated as an exact zero.
DIAGONAL_RTOL = 1e-30


@dataclass
class Vec2:
    """A real 2-vector (x, y), identified with x + iy."""

    x: np.ndarray
    y: np.ndarray

    @classmethod
    def from_complex(cls, z) -> "Vec2":
        z = np.asarray(z, dtype=np.complex128)
        return cls(z.real, z.imag)

    def to_complex(self) -> np.ndarray:
        return self.x + 1j * self.y

    def norm(self) -> np.ndarray:
        return np.hypot(self.x, self.y)

    def dot(self, other: "Vec2") -> np.ndarray:
        return self.x * other.x + self.y * other.y

    def scaled(self, factor) -> "Vec2":
        return Vec2(self.x * factor, self.y * factor)


@dataclass
class Sym2:
    """Symmetric matrix [[a11, a12], [a12, a22]] in compact storage."""

    a11: np.ndarray
    a12: np.ndarray
    a22: np.ndarray

    @classmethod
    def identity(cls) -> "Sym2":
        return cls(np.float64(1.0), np.float64(0.0), np.float64(1.0))

    def shifted(self, s) -> "Sym2":
        """Return self + s * Id."""
        return Sym2(self.a11 + s, self.a12, self.a22 + s)

    def det(self) -> np.ndarray:
        return self.a11 * self.a22 - self.a12 * self.a12

    def select(self, mask, other: "Sym2") -> "Sym2":
        """Take entries from self where mask holds, otherwise from other."""
        return Sym2(
            np.where(mask, self.a11, other.a11),
            np.where(mask, self.a12, other.a12),
            np.where(mask, self.a22, other.a22),
        )


@dataclass
class Eigen2:
    """Spectral decomposition with lambda1 >= lambda2 and orthonormal e1, e2."""

    lambda1: np.ndarray
    lambda2: np.ndarray
    e1: Vec2
    e2: Vec2


def _eigenvalues(A: Sym2) -> tuple[np.ndarray, np.ndarray]:
    a11 = np.asarray(A.a11, dtype=np.float64)
    a22 = np.asarray(A.a22, dtype=np.float64)
    mean = 0.5 * (a11 + a22)
    radius = np.hypot(0.5 * (a11 - a22), A.a12)
    return mean + radius, mean - radius


def eigen_sym2(A: Sym2) -> Eigen2:
    """Closed-form eigendecomposition of a symmetric 2x2 matrix.

    Off-diagonal matrices use the rotation angle theta = atan2(2 a12, a11 - a22) / 2,
    so e1 = (cos theta, sin theta) and e2 = (sin theta, -cos theta). Diagonal matrices
    (and ties) get axis-aligned eigenvectors.

    Args:
        A: Matrix or array of matrices with finite entries.

    Returns:
        Eigen2 with eigenvalues sorted descending.
    """
    a11 = np.asarray(A.a11, dtype=np.float64)
    a12 = np.asarray(A.a12, dtype=np.float64)
    a22 = np.asarray(A.a22, dtype=np.float64)
    lam1, lam2 = _eigenvalues(A)

    theta = 0.5 * np.arctan2(a12, 0.5 * (a11 - a22))
    cos_t, sin_t = np.cos(theta), np.sin(theta)

    diagonal = np.abs(a12) <= DIAGONAL_RTOL * (np.abs(a11) + np.abs(a22))
    swapped = a22 > a11
    e1x = np.where(diagonal, np.where(swapped, 0.0, 1.0), cos_t)
    e1y = np.where(diagonal, np.where(swapped, 1.0, 0.0), sin_t)
    e2x = np.where(diagonal, np.where(swapped, 1.0, 0.0), sin_t)
    e2y = np.where(diagonal, np.where(swapped, 0.0, 1.0), -cos_t)

    return Eigen2(lam1, lam2, Vec2(e1x, e1y), Vec2(e2x, e2y))


def sp(A: Sym2) -> np.ndarray:
    """Spectral radius: the largest absolute eigenvalue."""
    lam1, lam2 = _eigenvalues(A)
    return np.maximum(np.abs(lam1), np.abs(lam2))


def minsp(A: Sym2) -> np.ndarray:
    """Smallest absolute eigenvalue; zero exactly when A is singular."""
    lam1, lam2 = _eigenvalues(A)
    return np.minimum(np.abs(lam1), np.abs(lam2))


def reflect_abs_apply(A: Sym2, g: Vec2) -> Vec2:
    """Unchecked reflect_abs_solve; singular entries come back as inf/nan."""
    eig = eigen_sym2(A)
    with np.errstate(divide="ignore", invalid="ignore"):
        c1 = eig.e1.dot(g) / np.abs(eig.lambda1)
        c2 = eig.e2.dot(g) / np.abs(eig.lambda2)
    return Vec2(c1 * eig.e1.x + c2 * eig.e2.x, c1 * eig.e1.y + c2 * eig.e2.y)


def reflect_abs_solve(A: Sym2, g: Vec2) -> Vec2:
    """Solve with the eigenvalue-reflected matrix.

    Returns w = pr+(v) - pr-(v) for v = A^-1 g, which equals B^-1 g where B has the
    eigenvectors of A and eigenvalues |lambda_i|. B is positive definite, so
    <w, g> > 0 whenever g != 0.

    Args:
        A: Invertible symmetric matrix (or array of them).
        g: Right-hand side.

    Returns:
        The reflected solution w, with ||w|| = ||A^-1 g||.

    Raises:
        numpy.linalg.LinAlgError: If any matrix is singular.
    """
    if np.any(minsp(A) == 0):
        raise np.linalg.LinAlgError("reflect_abs_solve requires an invertible matrix")
    return reflect_abs_apply(A, g)


def solve_sym2(A: Sym2, g: Vec2) -> Vec2:
    """Direct solve A w = g by Cramer's rule (nan/inf where det A = 0)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        det = A.det()
        return Vec2((A.a22 * g.x - A.a12 * g.y) / det, (A.a11 * g.y - A.a12 * g.x) / det)
