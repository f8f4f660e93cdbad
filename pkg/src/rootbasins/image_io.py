"""Serialization of basin images.

PPM (P6) is written byte by byte so its output is exact and stable; PNG export and
reading images back go through Pillow.
"""

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .raster import BLACK, BasinImage, GridSpec

logger = logging.getLogger(__name__)

RGB = tuple[int, int, int]


@dataclass(frozen=True)
class Palette:
    """Root colors in root order, plus the color of pixels that found no root."""

    colors: tuple[RGB, ...] = (
        (0, 255, 0),  # green
        (255, 255, 0),  # yellow
        (0, 0, 255),  # blue
        (255, 0, 0),  # red
        (255, 192, 203),  # pink
        (0, 255, 255),  # cyan
        (255, 165, 0),  # orange
        (128, 0, 128),  # purple
    )
    black: RGB = (0, 0, 0)

    def __len__(self) -> int:
        return len(self.colors)

    def lookup_table(self) -> np.ndarray:
        """(len + 1, 3) uint8 table; the last row is black so label -1 indexes it."""
        return np.array([*self.colors, self.black], dtype=np.uint8)

    def rgb(self, labels: np.ndarray) -> np.ndarray:
        """RGB array for a label grid.

        Raises:
            ValueError: If a label has no color.
        """
        labels = np.asarray(labels)
        if labels.size and (labels.max() >= len(self) or labels.min() < BLACK):
            msg = f"Labels must lie in [-1, {len(self) - 1}], got [{labels.min()}, {labels.max()}]"
            raise ValueError(msg)
        return self.lookup_table()[labels]

    def labels_from_rgb(self, rgb: np.ndarray) -> np.ndarray:
        """Inverse palette map.

        Raises:
            ValueError: If a pixel color is not in the palette.
        """
        rgb = np.asarray(rgb, dtype=np.int64)
        packed = (rgb[..., 0] << 16) | (rgb[..., 1] << 8) | rgb[..., 2]
        labels = np.full(packed.shape, -2, dtype=np.int64)
        for label, (r, g, b) in [*enumerate(self.colors), (BLACK, self.black)]:
            labels[packed == ((r << 16) | (g << 8) | b)] = label
        if np.any(labels == -2):
            raise ValueError("Image contains colors outside the palette")
        return labels


DEFAULT_PALETTE = Palette()


def _top_down_rgb(image: BasinImage, palette: Palette) -> np.ndarray:
    # labels row 0 is y_min; image files start at the top (max y)
    return palette.rgb(image.labels)[::-1]


def write_ppm(image: BasinImage, path: str | Path, palette: Palette = DEFAULT_PALETTE) -> None:
    """Write a binary PPM: header `P6\\n<w> <h>\\n255\\n`, then RGB rows from the top."""
    path = Path(path)
    pixels = np.ascontiguousarray(_top_down_rgb(image, palette))
    header = f"P6\n{image.width} {image.height}\n255\n".encode("ascii")
    try:
        with open(path, "wb") as f:
            f.write(header)
            f.write(pixels.tobytes())
    except OSError as e:
        msg = f"Failed to write PPM {path}: {e}"
        raise OSError(msg) from e
    logger.info(f"Wrote {image.width}x{image.height} PPM to {path}")


def write_png(image: BasinImage, path: str | Path, palette: Palette = DEFAULT_PALETTE) -> None:
    path = Path(path)
    try:
        Image.fromarray(np.ascontiguousarray(_top_down_rgb(image, palette))).save(
            path, format="PNG"
        )
    except OSError as e:
        msg = f"Failed to write PNG {path}: {e}"
        raise OSError(msg) from e
    logger.info(f"Wrote {image.width}x{image.height} PNG to {path}")


def read_ppm(path: str | Path, grid: GridSpec | None = None,
             palette: Palette = DEFAULT_PALETTE) -> BasinImage:
    """Read a palette image (PPM or PNG) back into a label grid.

    Args:
        path: Image file.
        grid: Grid the labels live on; a default grid of the image's size otherwise.
        palette: Palette the image was written with.

    Returns:
        BasinImage with labels only (iterations zero, terminals at pixel centers).

    Raises:
        FileNotFoundError: If the file does not exist.
        ValueError: If the size disagrees with grid or a color is not in the palette.
    """
    path = Path(path)
    if not path.exists():
        msg = f"File not found: {path}"
        raise FileNotFoundError(msg)
    with Image.open(path) as img:
        rgb = np.asarray(img.convert("RGB"))
    height, width = rgb.shape[:2]
    if grid is None:
        grid = GridSpec(nx=width, ny=height)
    elif (grid.nx, grid.ny) != (width, height):
        msg = f"Image {path} is {width}x{height}, expected {grid.nx}x{grid.ny}"
        raise ValueError(msg)
    labels = palette.labels_from_rgb(rgb)[::-1]
    return BasinImage(
        grid=grid,
        labels=np.ascontiguousarray(labels),
        iterations=np.zeros(labels.shape, dtype=np.int64),
        terminal=grid.centers(),
    )


def _g17(value: float) -> str:
    return format(float(value), ".17g")


def write_csv(image: BasinImage, path: str | Path) -> None:
    """One row per pixel: ix,iy,x,y,label,iterations,terminal_re,terminal_im."""
    path = Path(path)
    xs = image.grid.x_centers()
    ys = image.grid.y_centers()
    header = ["ix", "iy", "x", "y", "label", "iterations", "terminal_re", "terminal_im"]
    try:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            for iy in range(image.height):
                for ix in range(image.width):
                    label = int(image.labels[iy, ix])
                    end = complex(image.terminal[iy, ix])
                    writer.writerow([
                        ix,
                        iy,
                        _g17(xs[ix]),
                        _g17(ys[iy]),
                        "black" if label == BLACK else f"root{label}",
                        int(image.iterations[iy, ix]),
                        _g17(end.real),
                        _g17(end.imag),
                    ])
    except OSError as e:
        msg = f"Failed to write CSV {path}: {e}"
        raise OSError(msg) from e
    logger.info(f"Wrote {image.width * image.height} CSV rows to {path}")


def write_summary(summary: dict, path: str | Path) -> None:
    path = Path(path)
    path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    logger.info(f"Wrote run statistics to {path}")
