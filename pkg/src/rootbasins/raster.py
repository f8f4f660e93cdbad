"""Pixel grids over the complex plane and the label images computed on them."""

from dataclasses import dataclass, field, replace

import numpy as np

# Label of pixels that reached no root (and of Voronoi boundary pixels).
BLACK = -1

# Entropy tag separating the grid-jitter draw from every other seeded stream.
_GRID_JITTER_TAG = 0x6D1D


@dataclass(frozen=True)
class GridSpec:
    """nx by ny pixel grid on [x_min, x_max] x [y_min, y_max].

    Pixel (ix, iy) is centered at
    (x_min + (ix + 1/2) dx + jitter_x, y_min + (iy + 1/2) dy + jitter_y).
    """

    x_min: float = -10.0
    x_max: float = 10.0
    y_min: float = -10.0
    y_max: float = 10.0
    nx: int = 240
    ny: int = 240
    jitter: tuple[float, float] = field(default=(0.0, 0.0))

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ValueError(f"x_min ({self.x_min}) must be below x_max ({self.x_max})")
        if not self.y_min < self.y_max:
            raise ValueError(f"y_min ({self.y_min}) must be below y_max ({self.y_max})")
        if self.nx <= 0 or self.ny <= 0:
            raise ValueError(f"Grid size must be positive, got {self.nx}x{self.ny}")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.nx

    @property
    def dy(self) -> float:
        return (self.y_max - self.y_min) / self.ny

    @property
    def size(self) -> int:
        return self.nx * self.ny

    def with_jitter_from_seed(self, seed: int) -> "GridSpec":
        """Copy of the grid shifted by a seeded offset within half a pixel pitch per axis."""
        rng = np.random.default_rng([seed, _GRID_JITTER_TAG])
        jx, jy = rng.uniform(-0.5, 0.5, size=2)
        return replace(self, jitter=(float(jx * self.dx), float(jy * self.dy)))

    def x_centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.nx) + 0.5) * self.dx + self.jitter[0]

    def y_centers(self) -> np.ndarray:
        return self.y_min + (np.arange(self.ny) + 0.5) * self.dy + self.jitter[1]

    def centers(self) -> np.ndarray:
        """Complex pixel centers with shape (ny, nx), row 0 at y_min."""
        return self.x_centers()[None, :] + 1j * self.y_centers()[:, None]


@dataclass
class BasinImage:
    """Per-pixel basin labels and terminal statistics, indexed [iy, ix].

    labels holds k >= 0 for root k and BLACK otherwise. status holds the RunStatus of
    each pixel's run when the image comes from an iteration or a flow.
    """

    grid: GridSpec
    labels: np.ndarray
    iterations: np.ndarray
    terminal: np.ndarray
    status: np.ndarray | None = None

    def __post_init__(self):
        expected = (self.grid.ny, self.grid.nx)
        for name in ("labels", "iterations", "terminal"):
            if np.shape(getattr(self, name)) != expected:
                msg = f"{name} has shape {np.shape(getattr(self, name))}, expected {expected}"
                raise ValueError(msg)

    @property
    def width(self) -> int:
        return self.grid.nx

    @property
    def height(self) -> int:
        return self.grid.ny
