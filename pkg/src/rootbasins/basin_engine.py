"""Basin sweeps: run a method or flow from every pixel center and classify the terminals.

The grid is processed in fixed blocks of rows. Block boundaries never depend on the
number of worker threads and every random draw comes from a per-pixel stream, so an
image is identical for any degree of parallelism.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from enum import Enum

import numpy as np
from tqdm import tqdm

from .config import IntegratorConfig, MethodConfig, StochasticSpec
from .function_core import FunctionExpr, PolyCoeffs, PolyFromRoots
from .iterative_methods import RandomStream, RunStatus, StepKind, run_method
from .newton_flows import FlowKind, integrate_flow
from .raster import BLACK, BasinImage, GridSpec
from .voronoi import SiteSet, reduced_sites, render_voronoi

logger = logging.getLogger(__name__)

BLOCK_ROWS = 8

# Ascending coefficients of the noise polynomial z^3 + 2z - 5.
NOISE_POLYNOMIAL = np.array([-5.0, 2.0, 0.0, 1.0], dtype=np.complex128)


class Engine(str, Enum):
    NEWTON = "newton"
    RELAXED = "relaxed"
    RANDOM_RELAXED = "random_relaxed"
    NEWTON_OPT = "newton_opt"
    NQN = "nqn"
    BNQN = "bnqn"
    BNQN_V2 = "bnqn_v2"
    BACKTRACKING_GD = "backtracking_gd"
    FLOW_PLAIN = "flow_plain"
    FLOW_FRACTION = "flow_fraction"
    FLOW_OPT = "flow_opt"
    VORONOI = "voronoi"

    @property
    def flow_kind(self) -> FlowKind | None:
        return {
            Engine.FLOW_PLAIN: FlowKind.PLAIN,
            Engine.FLOW_FRACTION: FlowKind.FRACTION,
            Engine.FLOW_OPT: FlowKind.OPTIMIZATION,
        }.get(self)

    @property
    def step_kind(self) -> StepKind | None:
        if self is Engine.BNQN_V2:
            return StepKind.BNQN
        try:
            return StepKind(self.value)
        except ValueError:
            return None


@dataclass
class BasinSummary:
    """Pixel counts of a basin image."""

    width: int
    height: int
    root_counts: list[int]
    black_fraction: float
    non_root_critical: int
    diverged: int
    errors: int
    exhausted: int
    mean_iterations_converged: float

    def to_dict(self) -> dict:
        return asdict(self)


def polynomial_coeffs(fn: FunctionExpr) -> np.ndarray:
    """Ascending coefficients of a single polynomial; ValueError for anything else."""
    match fn:
        case PolyFromRoots(coeffs=c):
            return c
        case PolyCoeffs(coeffs=c) if c.ndim == 1:
            return c
    msg = f"Stochastic root finding needs a polynomial, got {type(fn).__name__}"
    raise ValueError(msg)


def stochastic_wrap(fn: FunctionExpr, spec: StochasticSpec, xi) -> FunctionExpr:
    """g(z, xi) = f(z) + epsilon * xi * (z^3 + 2z - 5) for the current noise draw(s).

    Args:
        fn: Polynomial to perturb.
        spec: Noise amplitude.
        xi: One standard-normal draw, or one per point of the batch being stepped.

    Returns:
        fn itself when epsilon is 0, otherwise a PolyCoeffs (with one coefficient column
        per point when xi is an array).

    Raises:
        ValueError: If fn is not a polynomial.
    """
    base = polynomial_coeffs(fn)
    if spec.epsilon == 0:
        return fn
    size = max(base.size, NOISE_POLYNOMIAL.size)
    base = np.pad(base, (0, size - base.size))
    noise = np.pad(NOISE_POLYNOMIAL, (0, size - NOISE_POLYNOMIAL.size))
    xi = np.asarray(xi, dtype=np.float64)
    if xi.ndim == 0:
        return PolyCoeffs(base + spec.epsilon * float(xi) * noise)
    return PolyCoeffs(base[:, None] + spec.epsilon * noise[:, None] * xi[None, :])


def _run_block(engine, fn, z0, pixels, config, stochastic, roots):
    if engine.flow_kind is not None:
        return integrate_flow(engine.flow_kind, fn, z0, config, roots)
    needs_stream = engine is Engine.RANDOM_RELAXED or stochastic is not None
    stream = None
    if needs_stream:
        seed = stochastic.seed if stochastic is not None else config.seed
        stream = RandomStream(seed, pixels)
    perturb = None
    if stochastic is not None:
        perturb = lambda f, s: stochastic_wrap(f, stochastic, s.normal())  # noqa: E731
    return run_method(engine.step_kind, fn, z0, config, roots, stream=stream, perturb=perturb)


def sweep(
    engine: Engine,
    fn: FunctionExpr,
    grid: GridSpec,
    config: MethodConfig | IntegratorConfig | None = None,
    stochastic: StochasticSpec | None = None,
    *,
    roots=None,
    workers: int = 1,
    progress: bool = False,
) -> BasinImage:
    """Run one method or flow per pixel center and label the basins.

    A pixel gets label k iff its run ended within the root tolerance of root k (the
    relaxed tolerance in stochastic mode); everything else is BLACK.

    Args:
        engine: Method, flow or voronoi.
        fn: Function whose basins are drawn.
        grid: Pixel grid (jitter already applied).
        config: MethodConfig for iterative engines, IntegratorConfig for flows;
            ignored by voronoi. Defaults are used when None.
        stochastic: Noise protocol; iterative engines only.
        roots: Distinct root locations for classification, in palette order.
            Defaults to the reduced sites of fn.
        workers: Threads running pixel blocks.
        progress: Show a progress bar over blocks.

    Returns:
        BasinImage with labels, iteration counts, terminals and run statuses.

    Raises:
        ValueError: For stochastic flows, stochastic non-polynomials or
            a config of the wrong type.
    """
    engine = Engine(engine)
    if roots is None:
        roots = reduced_sites(fn).sites
    roots = np.asarray(roots, dtype=np.complex128).ravel()

    if engine is Engine.VORONOI:
        if stochastic is not None:
            logger.warning("Stochastic settings are ignored by the voronoi engine")
        return render_voronoi(SiteSet(tuple(roots)), grid)

    if engine.flow_kind is not None:
        if stochastic is not None:
            raise ValueError("Stochastic root finding is only defined for iterative engines")
        config = config if config is not None else IntegratorConfig()
        if not isinstance(config, IntegratorConfig):
            raise ValueError(f"{engine.value} needs an IntegratorConfig")
    else:
        config = config if config is not None else MethodConfig()
        if not isinstance(config, MethodConfig):
            raise ValueError(f"{engine.value} needs a MethodConfig")
        if engine is Engine.BNQN_V2:
            config = replace(config, theta=1.0)
        if stochastic is not None:
            polynomial_coeffs(fn)
            config = replace(config, root_tol=stochastic.relaxed_root_tol)

    centers = grid.centers()
    labels = np.full((grid.ny, grid.nx), BLACK, dtype=np.int64)
    iterations = np.zeros((grid.ny, grid.nx), dtype=np.int64)
    terminal = np.zeros((grid.ny, grid.nx), dtype=np.complex128)
    status = np.zeros((grid.ny, grid.nx), dtype=np.int8)

    def run_rows(start: int) -> None:
        stop = min(start + BLOCK_ROWS, grid.ny)
        z0 = centers[start:stop].ravel()
        pixels = np.arange(start * grid.nx, stop * grid.nx)
        result = _run_block(engine, fn, z0, pixels, config, stochastic, roots)
        block = (stop - start, grid.nx)
        converged = result.status == RunStatus.CONVERGED_TO_ROOT
        labels[start:stop] = np.where(converged, result.root_index, BLACK).reshape(block)
        iterations[start:stop] = result.iterations.reshape(block)
        terminal[start:stop] = result.terminal.reshape(block)
        status[start:stop] = result.status.reshape(block)

    starts = range(0, grid.ny, BLOCK_ROWS)
    logger.info(
        f"Sweeping {grid.nx}x{grid.ny} pixels with {engine.value} "
        f"({len(starts)} blocks, {workers} workers)"
    )
    with ThreadPoolExecutor(max_workers=workers) as executor:
        for _ in tqdm(executor.map(run_rows, starts), total=len(starts), desc=engine.value,
                      unit="block", disable=not progress):
            pass

    image = BasinImage(grid=grid, labels=labels, iterations=iterations, terminal=terminal,
                       status=status)
    logger.info(f"{engine.value}: black fraction {np.mean(labels == BLACK):.4f}")
    return image


def compare_images(a: BasinImage, b: BasinImage, ignore_black: bool = False) -> float:
    """Fraction of pixels whose labels differ.

    With ignore_black, pixels that are black in either image are left out entirely.
    Returns 0.0 when no pixel is left to compare.

    Raises:
        ValueError: If the image dimensions differ.
    """
    if a.labels.shape != b.labels.shape:
        msg = f"Image dimensions differ: {a.labels.shape[::-1]} vs {b.labels.shape[::-1]}"
        raise ValueError(msg)
    keep = np.ones(a.labels.shape, dtype=bool)
    if ignore_black:
        keep = (a.labels != BLACK) & (b.labels != BLACK)
    total = int(keep.sum())
    if total == 0:
        return 0.0
    return float(np.sum((a.labels != b.labels) & keep)) / total


def summarize(image: BasinImage, root_count: int | None = None) -> BasinSummary:
    """Per-root pixel counts, black fraction and termination counts of an image."""
    labels = image.labels
    if root_count is None:
        root_count = int(labels.max()) + 1 if labels.size else 0
    counts = [int(np.sum(labels == k)) for k in range(root_count)]
    converged = labels != BLACK
    status = image.status

    def count(kind: RunStatus) -> int:
        return int(np.sum(status == kind)) if status is not None else 0

    return BasinSummary(
        width=image.width,
        height=image.height,
        root_counts=counts,
        black_fraction=float(np.mean(~converged)),
        non_root_critical=count(RunStatus.CONVERGED_TO_NON_ROOT_CRITICAL),
        diverged=count(RunStatus.DIVERGED),
        errors=count(RunStatus.ERROR),
        exhausted=count(RunStatus.EXHAUSTED),
        mean_iterations_converged=(
            float(np.mean(image.iterations[converged])) if converged.any() else 0.0
        ),
    )
