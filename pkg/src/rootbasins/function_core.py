"""Function catalog and exact jet evaluation.

This module describes the test functions (polynomials given by roots or coefficients,
the transcendental f23, f * exp(z) and the Newton quotient f / f') and evaluates
f, f', f'' together with the objective F = |f|^2 / 2, its gradient and its Hessian.
"""

import logging
from dataclasses import dataclass, field
from math import comb

import numpy as np
from numpy.polynomial import polynomial as poly

from .linalg2 import Sym2, Vec2

logger = logging.getLogger(__name__)

# Any jet entry beyond this magnitude is treated as a pole or an overflow.
OVERFLOW_LIMIT = 1e150
MAX_EXPANSION_DEGREE = 64


@dataclass(frozen=True)
class RootSpec:
    """A root location with its multiplicity."""

    location: complex
    multiplicity: int = 1

    def __post_init__(self):
        object.__setattr__(self, "location", complex(self.location))
        if self.multiplicity < 1:
            raise ValueError(f"Root multiplicity must be >= 1, got {self.multiplicity}")


@dataclass(frozen=True)
class PolyFromRoots:
    """Polynomial prod (z - z_i)^{n_i}; root order fixes the palette order."""

    roots: tuple[RootSpec, ...]
    coeffs: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        roots = tuple(self.roots)
        if not roots:
            raise ValueError("PolyFromRoots needs at least one root")
        object.__setattr__(self, "roots", roots)
        object.__setattr__(self, "coeffs", expand_roots_to_coeffs(roots))


@dataclass(frozen=True, eq=False)
class PolyCoeffs:
    """Polynomial from ascending coefficients.

    A 2-D coefficient array of shape (degree + 1, n) describes n polynomials at once,
    one per evaluation point; this is how per-pixel noise is carried in a batch.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        if coeffs.ndim == 0 or coeffs.shape[0] == 0:
            raise ValueError("PolyCoeffs needs at least one coefficient")
        if np.any(coeffs[-1] == 0):
            raise ValueError("PolyCoeffs leading coefficient must be nonzero")
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def degree(self) -> int:
        return self.coeffs.shape[0] - 1


@dataclass(frozen=True)
class TranscendentalF23:
    """f23(z) = z^2 + cos z + 2 sin z - 1 - 0.5i."""

    # Approximate roots inside [-10, 10]^2, quoted to 8 decimals.
    LISTED_ROOTS = (
        0.01453348 + 0.24577632j,
        -1.79690338 - 0.16311646j,
        2.65293461 - 2.52795741j,
        2.70778504 + 2.4386467j,
        -7.27782023 - 4.1230358j,
        -7.26685729 + 4.13462414j,
        9.62682067 - 4.62305718j,
        9.63392763 + 4.61683271j,
    )


@dataclass(frozen=True)
class TimesExp:
    """inner(z) * exp(z)."""

    inner: "FunctionExpr"


@dataclass(frozen=True)
class NewtonQuotient:
    """g = inner / inner'; every root of inner becomes a simple root of g."""

    inner: "FunctionExpr"

    def __post_init__(self):
        if isinstance(self.inner, NewtonQuotient):
            raise ValueError("NewtonQuotient cannot be applied twice")


FunctionExpr = PolyFromRoots | PolyCoeffs | TranscendentalF23 | TimesExp | NewtonQuotient


@dataclass
class Jet2:
    """Values f(z), f'(z), f''(z); `valid` is False at poles or overflow."""

    f: np.ndarray
    df: np.ndarray
    d2f: np.ndarray
    valid: np.ndarray


@dataclass
class ObjectiveJet:
    """F = |f|^2 / 2 with its gradient and Hessian in the (x, y) plane."""

    value: np.ndarray
    gradient: Vec2
    hessian: Sym2
    valid: np.ndarray


def expand_roots_to_coeffs(roots) -> np.ndarray:
    """Expand prod (z - z_i)^{n_i} into monic ascending coefficients.

    Args:
        roots: Ordered RootSpec sequence.

    Returns:
        Complex coefficient array, constant term first.

    Raises:
        ValueError: If the total degree exceeds MAX_EXPANSION_DEGREE.
    """
    degree = sum(r.multiplicity for r in roots)
    if degree > MAX_EXPANSION_DEGREE:
        msg = f"Total degree {degree} exceeds the supported {MAX_EXPANSION_DEGREE}"
        raise ValueError(msg)
    flat = [r.location for r in roots for _ in range(r.multiplicity)]
    return np.asarray(poly.polyfromroots(flat), dtype=np.complex128)


def _tame(*values) -> np.ndarray:
    ok = np.ones(np.shape(values[0]), dtype=bool)
    for v in values:
        ok &= np.isfinite(v) & (np.abs(v) <= OVERFLOW_LIMIT)
    return ok


def _f23_derivative(z, k: int):
    cos_cycle = (np.cos, lambda w: -np.sin(w), lambda w: -np.cos(w), np.sin)
    sin_cycle = (np.sin, np.cos, lambda w: -np.sin(w), lambda w: -np.cos(w))
    trig = cos_cycle[k % 4](z) + 2 * sin_cycle[k % 4](z)
    if k == 0:
        return z * z + trig - 1 - 0.5j
    if k == 1:
        return 2 * z + trig
    if k == 2:
        return 2 + trig
    return trig


def _derivatives(fn: FunctionExpr, z: np.ndarray, order: int) -> tuple[list, np.ndarray]:
    """Return [f, f', ..., f^(order)] at z and a validity mask."""
    match fn:
        case PolyFromRoots() | PolyCoeffs():
            c = fn.coeffs
            ders = []
            for _ in range(order + 1):
                ders.append(poly.polyval(z, c, tensor=False))
                c = poly.polyder(c, axis=0)
            return ders, _tame(*ders)
        case TranscendentalF23():
            ders = [_f23_derivative(z, k) for k in range(order + 1)]
            return ders, _tame(*ders)
        case TimesExp(inner=inner):
            inner_ders, ok = _derivatives(inner, z, order)
            ez = np.exp(z)
            ders = [
                ez * sum(comb(k, j) * inner_ders[j] for j in range(k + 1))
                for k in range(order + 1)
            ]
            return ders, ok & _tame(ez, *ders)
        case NewtonQuotient(inner=inner):
            if order > 2:
                raise ValueError("NewtonQuotient supports derivatives up to order 2")
            inner_ders, ok = _derivatives(inner, z, order + 1)
            f, df = inner_ders[0], inner_ders[1]
            ders = [f / df]
            if order >= 1:
                d2f = inner_ders[2]
                ders.append(1 - f * d2f / (df * df))
            if order >= 2:
                d3f = inner_ders[3]
                ders.append(-(df * d2f + f * d3f) / (df * df) + 2 * f * d2f * d2f / df**3)
            return ders, ok & _tame(*ders)
    raise TypeError(f"Unsupported function expression: {fn!r}")


def eval_jet(fn: FunctionExpr, z) -> Jet2:
    """Evaluate f, f' and f'' exactly (up to round-off).

    Args:
        fn: Function expression.
        z: Point or array of points.

    Returns:
        Jet2; entries at poles or beyond OVERFLOW_LIMIT are flagged invalid.
    """
    z = np.asarray(z, dtype=np.complex128)
    with np.errstate(all="ignore"):
        (f, df, d2f), valid = _derivatives(fn, z, 2)
    return Jet2(np.asarray(f), np.asarray(df), np.asarray(d2f), np.asarray(valid))


def objective_value(fn: FunctionExpr, z) -> np.ndarray:
    """F(z) = |f(z)|^2 / 2, with nan where f is invalid."""
    z = np.asarray(z, dtype=np.complex128)
    with np.errstate(all="ignore"):
        (f,), valid = _derivatives(fn, z, 0)
        value = 0.5 * (f.real * f.real + f.imag * f.imag)
    return np.where(valid, value, np.nan)


def objective_from_jet(jet: Jet2) -> ObjectiveJet:
    """Objective F, gradient conj(f') f and Hessian of F from a jet."""
    f, df, d2f = jet.f, jet.df, jet.d2f
    with np.errstate(all="ignore"):
        grad = np.conj(df) * f
        curvature = d2f * np.conj(f)
        speed = df.real * df.real + df.imag * df.imag
        value = 0.5 * (f.real * f.real + f.imag * f.imag)
    nan = np.nan
    valid = jet.valid
    return ObjectiveJet(
        value=np.where(valid, value, nan),
        gradient=Vec2(np.where(valid, grad.real, nan), np.where(valid, grad.imag, nan)),
        hessian=Sym2(
            np.where(valid, speed + curvature.real, nan),
            np.where(valid, -curvature.imag, nan),
            np.where(valid, speed - curvature.real, nan),
        ),
        valid=valid,
    )


def objective_jet(fn: FunctionExpr, z) -> ObjectiveJet:
    """Objective F = |f|^2 / 2 with gradient and Hessian at z."""
    return objective_from_jet(eval_jet(fn, z))


def declared_roots(fn: FunctionExpr) -> tuple[RootSpec, ...]:
    """Return the roots a function is declared with, in palette order.

    Raises:
        ValueError: If fn carries no explicit root list (coefficient form).
    """
    match fn:
        case PolyFromRoots(roots=roots):
            return roots
        case TranscendentalF23():
            return tuple(RootSpec(r) for r in TranscendentalF23.LISTED_ROOTS)
        case TimesExp(inner=inner):
            return declared_roots(inner)
        case NewtonQuotient(inner=inner):
            return tuple(RootSpec(r.location) for r in declared_roots(inner))
    msg = "Roots of a coefficient-form polynomial are not declared; pass them explicitly"
    raise ValueError(msg)


def restrict_points(fn: FunctionExpr, idx) -> FunctionExpr:
    """Select the per-point polynomials of a batched PolyCoeffs for the points idx.

    Expressions that do not depend on the evaluation point are returned as-is.
    """
    match fn:
        case PolyCoeffs(coeffs=c) if c.ndim == 2:
            return PolyCoeffs(c[:, idx])
        case TimesExp(inner=inner):
            return TimesExp(restrict_points(inner, idx))
        case NewtonQuotient(inner=inner):
            return NewtonQuotient(restrict_points(inner, idx))
    return fn


def _poly(*factors) -> PolyFromRoots:
    specs = [RootSpec(*f) if isinstance(f, tuple) else RootSpec(f) for f in factors]
    return PolyFromRoots(tuple(specs))


_F7 = _poly(0, 1j, 1 + 1j, 3 + 2j)
_F17 = _poly(0, 2j, 5 + 2j, 3 - 3j, 2 + 1j)

CATALOG: dict[str, FunctionExpr] = {
    "f1": _poly(0, 1j, 3 + 2j),
    "f2": _poly(0, 1j, 3j),
    "f3": _poly(0, (1j, 2)),
    "f4": _poly(0, 1j, 3 + 2j, 1 + 4j),
    "f5": _poly(0, 1j, 3 + 2j, 2 + 4j),
    "f6": _poly(0, (1j, 3)),
    "f7": _F7,
    "f8": _poly(0, 1j, 2j, 3 + 2j),
    "f9": _poly((0, 2), (1j, 2)),
    "f10": _poly((0, 2), 1j, 1 + 1j),
    "f11": _poly((0, 2), 1j, 2j),
    "f12": _poly(0, 1j, 5j, 3 + 2j),
    "f13": _poly((0, 2), 1j, 5j),
    "f14": _poly(0, 2j, 3 - 3j, 3 + 6j, 5 + 2j),
    "f15": _poly(0, 2j, 3 + 6j, 5 + 2j, 7 - 1j),
    "f16": _poly(0, 3 + 6j, 5 + 2j, 7 - 1j, 4 + 3.4j),
    "f17": _F17,
    "f18": _poly(0, 3 + 6j, 5 + 2j, 7 - 1j, 2 + 1j),
    "f19": _poly((0, 2), 5 + 2j, 3 - 3j, 7 - 1j),
    "f20": _poly((0, 2), 2 + 1j, 5 + 2j, 3 - 3j),
    "f21": _poly((0, 2), 2 + 1j, 5 + 2j, 3 + 6j),
    "f22": _poly(0, (2 + 1j, 2), 3 - 3j, 3 + 6j),
    "f23": TranscendentalF23(),
    "f24": TimesExp(_F7),
    "f25": TimesExp(_F17),
}


def catalog_lookup(name: str) -> FunctionExpr:
    """Return a catalog function by id (f1..f25).

    Raises:
        ValueError: If the id is unknown.
    """
    try:
        return CATALOG[name]
    except KeyError as e:
        msg = f"Unknown function: {name}. Must be one of f1..f{len(CATALOG)}"
        raise ValueError(msg) from e
