"""Command-line front end for rootbasins.

Resolves a run configuration from flags, an optional JSON config file and the
environment, sweeps the grid and writes the requested images and statistics.

Flags whose values start with a minus sign need the `=` form, for example
`--delta-set=-1,0,1` or `--bounds=-2,2,-2,2`.
"""

import json
import logging
import os
import sys
from dataclasses import dataclass, fields
from datetime import datetime
from pathlib import Path

from simple_parsing import ArgumentParser, DashVariant, field

from ..basin_engine import Engine, compare_images, polynomial_coeffs, summarize, sweep
from ..config import IntegratorConfig, MethodConfig, StochasticSpec, load_config
from ..function_core import (
    CATALOG,
    FunctionExpr,
    NewtonQuotient,
    PolyFromRoots,
    RootSpec,
    TimesExp,
    catalog_lookup,
    declared_roots,
)
from ..image_io import DEFAULT_PALETTE, read_ppm, write_csv, write_png, write_ppm, write_summary
from ..raster import GridSpec
from ..voronoi import reduced_sites

logger = logging.getLogger(__name__)

TRANSFORMS = ("none", "quotient", "times_exp")
METHOD_ROOT_TOL = 1e-6
FLOW_ROOT_TOL = 1e-3
SOLVER_OPTIONS = (
    "max_iter", "root_tol", "grad_tol", "delta_set", "jitter_deltas", "tau", "gamma0",
    "theta", "rho", "relaxation", "stepper", "flow_step", "t_end",
)


@dataclass
class RunArgs:
    """Arguments for the basin renderer CLI."""

    function: str = "f1"
    """Catalog function id (f1..f25)"""

    roots: str | None = None
    """Inline roots `re,im,mult;re,im,mult;...`; overrides --function"""

    transform: str = "none"
    """Apply a transform to the function: none, quotient (f/f') or times_exp (f*exp(z))"""

    engine: str = "bnqn"
    """Method, flow or voronoi (see --list-functions for functions)"""

    grid_n: int = 240
    """Pixels per axis"""

    bounds: str = "-10,10,-10,10"
    """Window x_min,x_max,y_min,y_max"""

    no_jitter: bool = False
    """Do not shift the grid center by a seeded sub-pixel offset"""

    max_iter: int = 10_000
    """Iteration cap of the discrete methods"""

    root_tol: float | None = None
    """Root proximity threshold (default 1e-6 for methods, 1e-3 for flows)"""

    grad_tol: float | None = None
    """Gradient threshold for non-root critical points (default 1e-13 methods, 1e-10 flows)"""

    delta_set: str = "0,1,-1"
    """Comma-separated delta values of NQN/BNQN"""

    jitter_deltas: bool = False
    """Shift each delta by a seeded offset within a quarter of kappa"""

    tau: float = 1.5
    """Exponent of ||grad F|| in the Hessian perturbation"""

    gamma0: float = 1.0
    """Initial Armijo step"""

    theta: float | None = None
    """Direction normalization of BNQN (0 for bnqn, forced to 1 for bnqn_v2)"""

    rho: float = 0.9
    """Radius of the Random Relaxed Newton disk, 0.5 < rho < 1"""

    relaxation: float = 0.5
    """Fixed alpha of the relaxed engine"""

    epsilon: float = 1e-4
    """Noise amplitude of stochastic runs"""

    relaxed_root_tol: float | None = None
    """Root threshold of stochastic runs (default 10 * epsilon)"""

    stochastic: bool = False
    """Perturb f with fresh noise every iteration"""

    stepper: str = "rk4"
    """Flow integrator: rk4, dp54 or euler"""

    flow_step: float = field(default=0.01, alias="--h")
    """Flow step size (initial step for dp54)"""

    t_end: float = 100.0
    """Flow integration horizon"""

    seed: int | None = None
    """Seed for grid jitter and random draws (default ROOTBASINS_SEED)"""

    out_ppm: str | None = None
    """Write the basin image as binary PPM"""

    out_csv: str | None = None
    """Write per-pixel results as CSV"""

    out_png: str | None = None
    """Write the basin image as PNG"""

    out_stats: str | None = None
    """Write summary statistics as JSON"""

    compare_with: str | None = None
    """Palette image to compare against; prints the mismatch fraction"""

    workers: int | None = None
    """Sweep threads (default ROOTBASINS_WORKERS)"""

    config: str | None = None
    """JSON file with defaults for any of these options"""

    list_functions: bool = False
    """Print the function catalog and exit"""

    verbose: bool = False
    """Enable verbose logging"""

    no_progress: bool = False
    """Hide the progress bar"""


@dataclass
class RunConfig:
    """Fully resolved run."""

    function_name: str
    function: FunctionExpr
    roots: tuple[complex, ...]
    engine: Engine
    method: MethodConfig | None
    integrator: IntegratorConfig | None
    grid: GridSpec
    stochastic: StochasticSpec | None
    seed: int
    workers: int
    log_dir: str
    log_level: str
    out_ppm: str | None = None
    out_csv: str | None = None
    out_png: str | None = None
    out_stats: str | None = None
    compare_with: str | None = None
    list_functions: bool = False
    verbose: bool = False
    progress: bool = True


def _parse_floats(text: str, name: str) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError as e:
        msg = f"Invalid {name}: {text!r}"
        raise ValueError(msg) from e


def parse_roots(text: str) -> PolyFromRoots:
    """Parse `re,im,mult;...` (mult optional, default 1) into a polynomial."""
    specs = []
    for chunk in filter(None, (c.strip() for c in text.split(";"))):
        parts = [p.strip() for p in chunk.split(",")]
        if len(parts) not in (2, 3):
            msg = f"Invalid root {chunk!r}: expected re,im or re,im,mult"
            raise ValueError(msg)
        try:
            re_part, im_part = float(parts[0]), float(parts[1])
            multiplicity = int(parts[2]) if len(parts) == 3 else 1
        except ValueError as e:
            msg = f"Invalid root {chunk!r}: {e}"
            raise ValueError(msg) from e
        specs.append(RootSpec(complex(re_part, im_part), multiplicity))
    if not specs:
        raise ValueError("Invalid roots: no root given")
    return PolyFromRoots(tuple(specs))


def _load_config_file(path: str) -> dict:
    try:
        values = json.loads(Path(path).read_text())
    except FileNotFoundError as e:
        msg = f"Config file not found: {path}"
        raise ValueError(msg) from e
    except json.JSONDecodeError as e:
        msg = f"Invalid config file {path}: {e}"
        raise ValueError(msg) from e
    if not isinstance(values, dict):
        raise ValueError(f"Invalid config file {path}: expected a JSON object")
    known = {f.name for f in fields(RunArgs)} - {"config"}
    unknown = set(values) - known
    if unknown:
        raise ValueError(f"Unknown keys in config file {path}: {sorted(unknown)}")
    return values


def _parse_args(argv: list[str] | None) -> RunArgs:
    pre = ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    defaults = RunArgs(**_load_config_file(known.config)) if known.config else RunArgs()

    parser = ArgumentParser(
        description="Render basins of attraction of root-finding methods",
        add_option_string_dash_variants=DashVariant.UNDERSCORE_AND_DASH,
    )
    parser.add_arguments(RunArgs, dest="args", default=defaults)
    return parser.parse_args(argv).args


def _changed_options(args: RunArgs, names: tuple[str, ...]) -> list[str]:
    defaults = {f.name: f.default for f in fields(RunArgs)}
    return [name for name in names if getattr(args, name) != defaults[name]]


def _build_function(args: RunArgs) -> tuple[str, FunctionExpr]:
    if args.roots:
        name, fn = "custom", parse_roots(args.roots)
    else:
        name, fn = args.function, catalog_lookup(args.function)
    if args.transform not in TRANSFORMS:
        msg = f"Invalid transform: {args.transform}. Must be one of {TRANSFORMS}"
        raise ValueError(msg)
    if args.transform == "quotient":
        return f"{name}/{name}'", NewtonQuotient(fn)
    if args.transform == "times_exp":
        return f"{name}*exp(z)", TimesExp(fn)
    return name, fn


def parse_config(argv: list[str] | None = None) -> RunConfig:
    """Resolve command-line flags, config file and environment into a RunConfig.

    Raises:
        ValueError: For unknown functions, engines or transforms, invalid method
            parameters, malformed lists or functions with more than 8 distinct roots.
    """
    args = _parse_args(argv)
    app = load_config()
    seed = args.seed if args.seed is not None else app.seed
    workers = args.workers if args.workers is not None else app.workers
    if workers <= 0:
        raise ValueError(f"Invalid workers: {workers}. Must be positive")

    try:
        engine = Engine(args.engine)
    except ValueError as e:
        msg = f"Unknown engine: {args.engine}. Must be one of {[e.value for e in Engine]}"
        raise ValueError(msg) from e

    function_name, fn = _build_function(args)
    roots = reduced_sites(fn).sites
    if len(roots) > len(DEFAULT_PALETTE):
        msg = f"{function_name} has {len(roots)} distinct roots; at most {len(DEFAULT_PALETTE)}"
        raise ValueError(msg)

    bounds = _parse_floats(args.bounds, "bounds")
    if len(bounds) != 4:
        raise ValueError(f"Invalid bounds: expected x_min,x_max,y_min,y_max, got {args.bounds!r}")
    grid = GridSpec(*bounds, nx=args.grid_n, ny=args.grid_n)
    if not args.no_jitter:
        grid = grid.with_jitter_from_seed(seed)

    method = integrator = stochastic = None
    if engine.flow_kind is not None:
        integrator = IntegratorConfig(
            h=args.flow_step,
            t_end=args.t_end,
            stepper=args.stepper,
            root_tol=args.root_tol if args.root_tol is not None else FLOW_ROOT_TOL,
            **({"grad_tol": args.grad_tol} if args.grad_tol is not None else {}),
        )
    elif engine is not Engine.VORONOI:
        theta = args.theta if args.theta is not None else 0.0
        if engine is Engine.BNQN_V2 and theta != 1.0:
            if args.theta is not None:
                logger.warning(f"bnqn_v2 runs with theta = 1; ignoring theta = {args.theta}")
            theta = 1.0
        method = MethodConfig(
            delta_set=_parse_floats(args.delta_set, "delta set"),
            tau=args.tau,
            gamma0=args.gamma0,
            theta=theta,
            rho=args.rho,
            max_iter=args.max_iter,
            root_tol=args.root_tol if args.root_tol is not None else METHOD_ROOT_TOL,
            seed=seed,
            relaxation=args.relaxation,
            jitter_deltas=args.jitter_deltas,
            **({"grad_tol": args.grad_tol} if args.grad_tol is not None else {}),
        )
    elif changed := _changed_options(args, SOLVER_OPTIONS):
        logger.warning(f"voronoi ignores method and integrator settings: {', '.join(changed)}")

    if args.stochastic:
        if method is None:
            raise ValueError(f"--stochastic is not supported by the {engine.value} engine")
        polynomial_coeffs(fn)
        stochastic = StochasticSpec(
            epsilon=args.epsilon, relaxed_root_tol=args.relaxed_root_tol, seed=seed
        )

    return RunConfig(
        function_name=function_name,
        function=fn,
        roots=roots,
        engine=engine,
        method=method,
        integrator=integrator,
        grid=grid,
        stochastic=stochastic,
        seed=seed,
        workers=workers,
        log_dir=app.log_dir,
        log_level=app.log_level,
        out_ppm=args.out_ppm,
        out_csv=args.out_csv,
        out_png=args.out_png,
        out_stats=args.out_stats,
        compare_with=args.compare_with,
        list_functions=args.list_functions,
        verbose=args.verbose,
        progress=not args.no_progress,
    )


def format_catalog() -> str:
    lines = []
    for name, fn in CATALOG.items():
        roots = ", ".join(
            f"{r.location:g}" + (f"^{r.multiplicity}" if r.multiplicity > 1 else "")
            for r in declared_roots(fn)
        )
        lines.append(f"{name:>4}  {type(fn).__name__:<18} {roots}")
    return "\n".join(lines)


def _setup_logging(config: RunConfig) -> None:
    os.makedirs(config.log_dir, exist_ok=True)
    log_filename = os.path.join(
        config.log_dir, f"rootbasins_{datetime.now().strftime('%Y%m%d_%H%M%S')}.log"
    )
    log_level = logging.DEBUG if config.verbose else getattr(logging, config.log_level)
    formatter = logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s")

    root_logger = logging.getLogger()
    root_logger.setLevel(logging.DEBUG)

    console_handler = logging.StreamHandler()
    console_handler.setLevel(log_level)
    console_handler.setFormatter(formatter)
    root_logger.addHandler(console_handler)

    file_handler = logging.FileHandler(log_filename)
    file_handler.setLevel(logging.DEBUG)
    file_handler.setFormatter(formatter)
    root_logger.addHandler(file_handler)

    logger.info(f"Logging to file: {log_filename}")


def run(config: RunConfig) -> None:
    """Sweep the configured engine and write every requested output."""
    logger.info(
        f"Rendering {config.function_name} with {config.engine.value} on a "
        f"{config.grid.nx}x{config.grid.ny} grid (seed {config.seed})"
    )
    image = sweep(
        config.engine,
        config.function,
        config.grid,
        config.integrator if config.integrator is not None else config.method,
        config.stochastic,
        roots=config.roots,
        workers=config.workers,
        progress=config.progress,
    )
    summary = summarize(image, root_count=len(config.roots))
    logger.info(
        f"Root pixel counts {summary.root_counts}, black fraction {summary.black_fraction:.4f}"
    )

    if config.out_ppm:
        write_ppm(image, config.out_ppm)
    if config.out_png:
        write_png(image, config.out_png)
    if config.out_csv:
        write_csv(image, config.out_csv)
    if config.out_stats:
        stats = summary.to_dict()
        stats.update(function=config.function_name, engine=config.engine.value, seed=config.seed)
        write_summary(stats, config.out_stats)
    if config.compare_with:
        other = read_ppm(config.compare_with, grid=image.grid)
        mismatch = compare_images(image, other)
        mismatch_colored = compare_images(image, other, ignore_black=True)
        print(f"mismatch: {mismatch:.6f}")
        print(f"mismatch (black excluded): {mismatch_colored:.6f}")


def main(argv: list[str] | None = None) -> None:
    """Main entry point for the rootbasins CLI."""
    try:
        config = parse_config(argv)
    except ValueError as e:
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(2)

    if config.list_functions:
        print(format_catalog())
        return

    _setup_logging(config)
    try:
        run(config)
    except Exception as e:
        logger.exception(f"Run failed: {e}")
        sys.exit(1)


if __name__ == "__main__":
    main()
