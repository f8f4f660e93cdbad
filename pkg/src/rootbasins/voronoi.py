"""Reduced Voronoi diagrams of a function's distinct roots, rasterized on a GridSpec."""

import logging
from dataclasses import dataclass

import numpy as np

from .function_core import (
    FunctionExpr,
    NewtonQuotient,
    TimesExp,
    TranscendentalF23,
    declared_roots,
)
from .iterative_methods import polish_root
from .raster import BLACK, BasinImage, GridSpec

logger = logging.getLogger(__name__)

BOUNDARY = BLACK
# Two distances closer than this put a point on a cell boundary.
BOUNDARY_TOL = 1e-12


@dataclass(frozen=True)
class SiteSet:
    """Distinct root locations in the order the function declares them."""

    sites: tuple[complex, ...]

    def __post_init__(self):
        sites = tuple(complex(s) for s in self.sites)
        if not sites:
            raise ValueError("SiteSet needs at least one site")
        if len(set(sites)) != len(sites):
            raise ValueError(f"Sites must be pairwise distinct: {sites}")
        object.__setattr__(self, "sites", sites)

    def __len__(self) -> int:
        return len(self.sites)

    def as_array(self) -> np.ndarray:
        return np.array(self.sites, dtype=np.complex128)


def _has_listed_roots(fn: FunctionExpr) -> bool:
    match fn:
        case TranscendentalF23():
            return True
        case TimesExp(inner=inner) | NewtonQuotient(inner=inner):
            return _has_listed_roots(inner)
    return False


def reduced_sites(fn: FunctionExpr) -> SiteSet:
    """Distinct root locations of fn, multiplicities dropped, first occurrence first.

    Approximate listed roots (f23) are refined with Newton's method first.

    Raises:
        ValueError: If fn has no declared root list.
    """
    locations = []
    for root in declared_roots(fn):
        if root.location not in locations:
            locations.append(root.location)
    if _has_listed_roots(fn):
        polished, steps = polish_root(fn, np.array(locations))
        logger.debug(f"Polished {len(locations)} listed roots in at most {steps.max()} steps")
        locations = [complex(z) for z in polished]
    return SiteSet(tuple(locations))


def classify_point(z, sites: SiteSet) -> np.ndarray:
    """Index of the strictly nearest site, or BOUNDARY when the two nearest tie."""
    points = np.asarray(z, dtype=np.complex128)
    dist = np.abs(points[..., None] - sites.as_array())
    nearest = np.argmin(dist, axis=-1)
    if len(sites) == 1:
        return nearest
    two = np.sort(dist, axis=-1)[..., :2]
    return np.where(two[..., 1] - two[..., 0] < BOUNDARY_TOL, BOUNDARY, nearest)


def render_voronoi(sites: SiteSet, grid: GridSpec) -> BasinImage:
    """Label every pixel center by its Voronoi cell; boundary pixels are black."""
    centers = grid.centers()
    labels = classify_point(centers, sites).astype(np.int64)
    logger.debug(
        f"Voronoi raster {grid.nx}x{grid.ny}: {int(np.sum(labels == BOUNDARY))} boundary pixels"
    )
    return BasinImage(
        grid=grid,
        labels=labels,
        iterations=np.zeros(labels.shape, dtype=np.int64),
        terminal=centers,
    )
