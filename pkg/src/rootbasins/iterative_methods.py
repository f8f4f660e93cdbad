"""Discrete root-finding methods and the driver that runs them to termination.

Every step function takes a point or an array of points and returns a StepOutcome
with per-point statuses. run_method iterates a whole batch at once and only keeps
stepping the points that have not terminated yet.
"""

import logging
from collections.abc import Callable
from dataclasses import dataclass
from enum import Enum, IntEnum

import numpy as np

from .config import MethodConfig
from .function_core import (
    FunctionExpr,
    eval_jet,
    objective_jet,
    objective_value,
    restrict_points,
)
from .linalg2 import Sym2, Vec2, minsp, reflect_abs_apply, solve_sym2

logger = logging.getLogger(__name__)

# Magnitudes below this count as an exact zero for derivatives and determinants.
SINGULAR_LIMIT = 1e-300


class StepStatus(IntEnum):
    CONTINUE = 0
    SINGULAR_DERIVATIVE = 1
    INVALID_JET = 2
    ARMIJO_STALLED = 3
    GRADIENT_VANISHED = 4
    STEP_UNDERFLOW = 5


class RunStatus(IntEnum):
    CONVERGED_TO_ROOT = 0
    CONVERGED_TO_NON_ROOT_CRITICAL = 1
    DIVERGED = 2
    EXHAUSTED = 3
    ERROR = 4


class StepKind(str, Enum):
    NEWTON = "newton"
    RELAXED = "relaxed"
    RANDOM_RELAXED = "random_relaxed"
    NEWTON_OPT = "newton_opt"
    NQN = "nqn"
    BNQN = "bnqn"
    BACKTRACKING_GD = "backtracking_gd"

    @property
    def is_optimization(self) -> bool:
        """Methods that descend F = |f|^2 / 2 and may stop at its critical points."""
        return self in (
            StepKind.NEWTON_OPT,
            StepKind.NQN,
            StepKind.BNQN,
            StepKind.BACKTRACKING_GD,
        )


@dataclass
class StepOutcome:
    """Next iterate and step status; `next` equals the input wherever status != CONTINUE."""

    next: np.ndarray
    status: np.ndarray


@dataclass
class RunResult:
    """Terminal state of run_method for each starting point.

    root_index is -1 unless status is CONVERGED_TO_ROOT; error_kind holds the failing
    StepStatus when status is ERROR and CONTINUE otherwise.
    """

    terminal: np.ndarray
    iterations: np.ndarray
    status: np.ndarray
    root_index: np.ndarray
    error_kind: np.ndarray


class RandomStream:
    """Deterministic per-pixel random source.

    Pixel p draws from PCG64(SeedSequence(seed, spawn_key=(p,))), so its sequence
    depends only on (seed, p), never on batch layout or thread scheduling.
    A stream built from a scalar pixel index returns scalar draws; one built from an
    index array returns one draw per pixel.
    """

    def __init__(self, seed: int, pixels=0):
        self.seed = seed
        self.pixels = np.asarray(pixels, dtype=np.int64)
        self._generators = [
            np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(int(p),))))
            for p in self.pixels.ravel()
        ]

    @classmethod
    def _view(cls, seed, pixels, generators) -> "RandomStream":
        stream = cls.__new__(cls)
        stream.seed = seed
        stream.pixels = pixels
        stream._generators = generators
        return stream

    def take(self, positions) -> "RandomStream":
        """Sub-stream over the given positions; shares generator state with self."""
        positions = np.asarray(positions, dtype=np.int64)
        pixels = self.pixels.ravel()[positions]
        return RandomStream._view(self.seed, pixels, [self._generators[i] for i in positions])

    def uniform(self, size=None):
        """Uniform draws on [0, 1)."""
        if self.pixels.ndim == 0:
            return self._generators[0].random(size)
        return np.array([g.random() for g in self._generators])

    def normal(self, size=None):
        """Standard normal draws."""
        if self.pixels.ndim == 0:
            return self._generators[0].standard_normal(size)
        return np.array([g.standard_normal() for g in self._generators])


def _finish(z, candidate, status) -> StepOutcome:
    status = np.where((status == StepStatus.CONTINUE) & ~np.isfinite(candidate),
                      StepStatus.INVALID_JET, status)
    return StepOutcome(
        next=np.where(status == StepStatus.CONTINUE, candidate, z),
        status=np.asarray(status, dtype=np.int8),
    )


def relaxed_newton_step(fn: FunctionExpr, z, alpha) -> StepOutcome:
    """z - alpha * f(z) / f'(z).

    Returns SINGULAR_DERIVATIVE where |f'(z)| < 1e-300 and INVALID_JET at poles.
    """
    z = np.asarray(z, dtype=np.complex128)
    jet = eval_jet(fn, z)
    with np.errstate(all="ignore"):
        candidate = z - alpha * jet.f / jet.df
    status = np.where(
        ~jet.valid,
        StepStatus.INVALID_JET,
        np.where(np.abs(jet.df) < SINGULAR_LIMIT, StepStatus.SINGULAR_DERIVATIVE,
                 StepStatus.CONTINUE),
    )
    return _finish(z, candidate, status)


def newton_step(fn: FunctionExpr, z) -> StepOutcome:
    """Classical Newton step z - f(z) / f'(z)."""
    return relaxed_newton_step(fn, z, 1.0)


def sample_alpha(stream: RandomStream, rho: float, size=None):
    """Draw alpha uniformly from the disk |alpha - 1| <= rho."""
    u = stream.uniform(size)
    phi = 2 * np.pi * stream.uniform(size)
    return 1 + rho * np.sqrt(u) * np.exp(1j * phi)


def random_relaxed_newton_step(
    fn: FunctionExpr, z, stream: RandomStream, rho: float
) -> StepOutcome:
    return relaxed_newton_step(fn, z, sample_alpha(stream, rho))


def newton_opt_step(fn: FunctionExpr, z, grad_tol: float | None = None) -> StepOutcome:
    """Newton's method for optimization on F: z - (Hess F)^-1 grad F.

    Args:
        fn: Function expression.
        z: Point(s).
        grad_tol: When given, points with ||grad F|| <= grad_tol report
            GRADIENT_VANISHED instead of stepping.
    """
    z = np.asarray(z, dtype=np.complex128)
    obj = objective_jet(fn, z)
    w = solve_sym2(obj.hessian, obj.gradient)
    with np.errstate(invalid="ignore"):
        candidate = z - w.to_complex()
        singular = np.abs(obj.hessian.det()) < SINGULAR_LIMIT
    status = np.where(singular, StepStatus.SINGULAR_DERIVATIVE, StepStatus.CONTINUE)
    if grad_tol is not None:
        status = np.where(obj.gradient.norm() <= grad_tol, StepStatus.GRADIENT_VANISHED, status)
    status = np.where(obj.valid, status, StepStatus.INVALID_JET)
    return _finish(z, candidate, status)


def select_delta(hessian: Sym2, grad_norm, config: MethodConfig) -> tuple[np.ndarray, Sym2]:
    """Pick the first delta_j with minsp(H + delta_j ||g||^tau Id) >= kappa ||g||^tau.

    Args:
        hessian: Hessian of F.
        grad_norm: ||grad F|| (positive).
        config: Supplies the deltas, tau and kappa.

    Returns:
        (j, A) where A is the accepted perturbed Hessian; j is -1 where no delta
        qualifies, which cannot happen for three or more separated deltas.
    """
    with np.errstate(all="ignore"):
        scale = np.asarray(grad_norm, dtype=np.float64) ** config.tau
        threshold = config.kappa * scale
    j = np.full(scale.shape, -1, dtype=np.int64)
    A = hessian
    for index, delta in enumerate(config.deltas):
        candidate = hessian.shifted(delta * scale)
        with np.errstate(invalid="ignore"):
            accept = (j < 0) & (minsp(candidate) >= threshold)
        j = np.where(accept, index, j)
        A = candidate.select(accept, A)
    return j, A


def select_invertible_delta(hessian: Sym2, grad_norm, config: MethodConfig):
    """First delta_j for which H + delta_j ||g||^tau Id is invertible (NQN rule)."""
    with np.errstate(all="ignore"):
        scale = np.asarray(grad_norm, dtype=np.float64) ** config.tau
    j = np.full(scale.shape, -1, dtype=np.int64)
    A = hessian
    for index, delta in enumerate(config.deltas):
        candidate = hessian.shifted(delta * scale)
        accept = (j < 0) & (candidate.det() != 0)
        j = np.where(accept, index, j)
        A = candidate.select(accept, A)
    return j, A


def armijo_search(
    fn: FunctionExpr,
    z,
    w_hat: Vec2,
    gamma0: float,
    max_halvings: int,
    value=None,
    gradient: Vec2 | None = None,
) -> np.ndarray:
    """Backtracking line search with factor 3.

    Finds the largest gamma in {gamma0 / 3^k : 0 <= k <= max_halvings} with
    F(z - gamma w_hat) - F(z) <= -gamma <w_hat, grad F(z)> / 3.

    Args:
        fn: Function expression.
        z: Current point(s).
        w_hat: Search direction (descent for F along -w_hat).
        gamma0: Initial step.
        max_halvings: Largest k tried.
        value: F(z), if already known.
        gradient: grad F(z), if already known.

    Returns:
        gamma per point, nan where no step qualifies or <w_hat, grad F> is not positive.
    """
    z = np.asarray(z, dtype=np.complex128)
    if value is None or gradient is None:
        obj = objective_jet(fn, z)
        value, gradient = obj.value, obj.gradient
    with np.errstate(invalid="ignore"):
        slope = np.asarray(w_hat.dot(gradient), dtype=np.float64)
    step = np.asarray(w_hat.to_complex())

    shape = np.broadcast_shapes(z.shape, slope.shape)
    z_flat = np.broadcast_to(z, shape).ravel()
    step_flat = np.broadcast_to(step, shape).ravel()
    slope_flat = np.broadcast_to(slope, shape).ravel()
    value_flat = np.broadcast_to(np.asarray(value), shape).ravel()
    gamma = np.full(z_flat.size, np.nan)

    with np.errstate(invalid="ignore"):
        pending = np.flatnonzero(np.isfinite(slope_flat) & (slope_flat > 0))
    for k in range(max_halvings + 1):
        if pending.size == 0:
            break
        trial_gamma = gamma0 / 3**k
        trial = objective_value(restrict_points(fn, pending),
                                z_flat[pending] - trial_gamma * step_flat[pending])
        with np.errstate(invalid="ignore"):
            ok = trial - value_flat[pending] <= -trial_gamma * slope_flat[pending] / 3
        gamma[pending[ok]] = trial_gamma
        pending = pending[~ok]
    return gamma.reshape(shape)


def _descent_step(fn, z, obj, w_hat: Vec2, work, config: MethodConfig):
    nan = np.nan
    w_hat = Vec2(np.where(work, w_hat.x, nan), np.where(work, w_hat.y, nan))
    gamma = armijo_search(fn, z, w_hat, config.gamma0, config.armijo_max_halvings,
                          value=obj.value, gradient=obj.gradient)
    with np.errstate(invalid="ignore"):
        candidate = z - gamma * w_hat.to_complex()
    stalled = work & np.isnan(gamma)
    return candidate, stalled


def bnqn_step(fn: FunctionExpr, z, config: MethodConfig) -> StepOutcome:
    """Backtracking New Q-Newton step (theta = 0 is BNQN, theta = 1 is BNQN v2).

    A = Hess F + delta_j ||g||^tau Id with delta_j from select_delta, w solves A with
    the eigenvalues replaced by their absolute values, w_hat = w / max(1, theta ||w||)
    and the step length comes from armijo_search.
    """
    z = np.asarray(z, dtype=np.complex128)
    obj = objective_jet(fn, z)
    grad_norm = obj.gradient.norm()
    with np.errstate(invalid="ignore"):
        vanished = obj.valid & (grad_norm <= config.grad_tol)
    work = obj.valid & ~vanished

    j, A = select_delta(obj.hessian, np.where(work, grad_norm, 1.0), config)
    w = reflect_abs_apply(A, obj.gradient)
    with np.errstate(all="ignore"):
        w_hat = w.scaled(1 / np.maximum(1.0, config.theta * w.norm()))
    unselected = work & (j < 0)
    work &= ~unselected
    candidate, stalled = _descent_step(fn, z, obj, w_hat, work, config)

    status = np.select(
        [~obj.valid, vanished, unselected, stalled],
        [StepStatus.INVALID_JET, StepStatus.GRADIENT_VANISHED, StepStatus.SINGULAR_DERIVATIVE,
         StepStatus.ARMIJO_STALLED],
        default=StepStatus.CONTINUE,
    )
    return _finish(z, candidate, status)


def nqn_step(fn: FunctionExpr, z, config: MethodConfig) -> StepOutcome:
    """New Q-Newton step: no kappa test, no normalization, no line search."""
    z = np.asarray(z, dtype=np.complex128)
    obj = objective_jet(fn, z)
    grad_norm = obj.gradient.norm()
    with np.errstate(invalid="ignore"):
        vanished = obj.valid & (grad_norm <= config.grad_tol)
    j, A = select_invertible_delta(obj.hessian, grad_norm, config)
    w = reflect_abs_apply(A, obj.gradient)
    with np.errstate(invalid="ignore"):
        candidate = z - w.to_complex()
    status = np.select(
        [~obj.valid, vanished, j < 0],
        [StepStatus.INVALID_JET, StepStatus.GRADIENT_VANISHED, StepStatus.SINGULAR_DERIVATIVE],
        default=StepStatus.CONTINUE,
    )
    return _finish(z, candidate, status)


def backtracking_gd_step(fn: FunctionExpr, z, config: MethodConfig) -> StepOutcome:
    """Gradient descent on F with the same factor-3 Armijo rule as BNQN."""
    z = np.asarray(z, dtype=np.complex128)
    obj = objective_jet(fn, z)
    with np.errstate(invalid="ignore"):
        vanished = obj.valid & (obj.gradient.norm() <= config.grad_tol)
    work = obj.valid & ~vanished
    candidate, stalled = _descent_step(fn, z, obj, obj.gradient, work, config)
    status = np.select(
        [~obj.valid, vanished, stalled],
        [StepStatus.INVALID_JET, StepStatus.GRADIENT_VANISHED, StepStatus.ARMIJO_STALLED],
        default=StepStatus.CONTINUE,
    )
    return _finish(z, candidate, status)


def polish_root(fn: FunctionExpr, z, max_steps: int = 20, tol: float = 1e-15):
    """Refine approximate roots with Newton's method.

    Args:
        fn: Function expression.
        z: Approximate root(s).
        max_steps: Newton steps allowed.
        tol: Stop once a step moves less than tol * max(1, |z|).

    Returns:
        (roots, steps) with the number of Newton steps taken per point.
    """
    z = np.array(z, dtype=np.complex128)
    steps = np.zeros(z.shape, dtype=np.int64)
    done = np.zeros(z.shape, dtype=bool)
    for _ in range(max_steps):
        out = newton_step(fn, z)
        live = ~done & (out.status == StepStatus.CONTINUE)
        moved = np.abs(out.next - z)
        z = np.where(live, out.next, z)
        steps += live
        done |= ~live | (moved <= tol * np.maximum(1.0, np.abs(z)))
        if done.all():
            break
    return z, steps


def nearest_root(z, roots) -> tuple[np.ndarray, np.ndarray]:
    """Index of (and distance to) the nearest root; ties go to the lowest index."""
    roots = np.asarray(roots, dtype=np.complex128).ravel()
    z = np.asarray(z, dtype=np.complex128)
    if roots.size == 0:
        return np.full(z.shape, -1, dtype=np.int64), np.full(z.shape, np.inf)
    dist = np.abs(z[..., None] - roots)
    index = np.argmin(dist, axis=-1)
    return index, np.take_along_axis(dist, index[..., None], axis=-1)[..., 0]


StepFunction = Callable[[FunctionExpr, np.ndarray, RandomStream | None], StepOutcome]


def make_step(step_kind: StepKind, config: MethodConfig) -> StepFunction:
    """Bind a step kind and its configuration into step(fn, z, stream)."""
    match StepKind(step_kind):
        case StepKind.NEWTON:
            return lambda fn, z, stream: newton_step(fn, z)
        case StepKind.RELAXED:
            return lambda fn, z, stream: relaxed_newton_step(fn, z, config.relaxation)
        case StepKind.RANDOM_RELAXED:
            return lambda fn, z, stream: random_relaxed_newton_step(fn, z, stream, config.rho)
        case StepKind.NEWTON_OPT:
            return lambda fn, z, stream: newton_opt_step(fn, z, grad_tol=config.grad_tol)
        case StepKind.NQN:
            return lambda fn, z, stream: nqn_step(fn, z, config)
        case StepKind.BNQN:
            return lambda fn, z, stream: bnqn_step(fn, z, config)
        case StepKind.BACKTRACKING_GD:
            return lambda fn, z, stream: backtracking_gd_step(fn, z, config)


Perturbation = Callable[[FunctionExpr, RandomStream], FunctionExpr]


def run_method(
    step_kind: StepKind,
    fn: FunctionExpr,
    z0,
    config: MethodConfig,
    roots,
    stream: RandomStream | None = None,
    perturb: Perturbation | None = None,
) -> RunResult:
    """Iterate a method from each starting point until it terminates.

    Each iteration first checks root proximity (ConvergedToRoot wins), then the escape
    radius, and only then takes a step. Optimization methods whose gradient vanishes
    away from every root end ConvergedToNonRootCritical; other step failures end in
    ERROR. Points still running after max_iter steps are EXHAUSTED.

    Args:
        step_kind: Method to run.
        fn: Function whose roots are sought.
        z0: Starting point or array of starting points.
        config: Method configuration.
        roots: Distinct root locations used for classification.
        stream: Random source aligned with z0; required by random_relaxed and
            by perturb.
        perturb: Called once per iteration with the unperturbed fn and the stream
            of the still-running points; returns the function to step on.

    Returns:
        RunResult shaped like z0.
    """
    step_kind = StepKind(step_kind)
    if (step_kind is StepKind.RANDOM_RELAXED or perturb is not None) and stream is None:
        raise ValueError(f"{step_kind.value} needs a RandomStream")
    step = make_step(step_kind, config)

    z0 = np.asarray(z0, dtype=np.complex128)
    shape = z0.shape
    z = z0.ravel().copy()
    n = z.size
    terminal = z.copy()
    iterations = np.zeros(n, dtype=np.int64)
    status = np.full(n, RunStatus.EXHAUSTED, dtype=np.int8)
    root_index = np.full(n, -1, dtype=np.int64)
    error_kind = np.zeros(n, dtype=np.int8)
    roots = np.asarray(roots, dtype=np.complex128).ravel()

    active = np.arange(n)
    current = z
    for iteration in range(config.max_iter + 1):
        if active.size == 0:
            break
        k, dist = nearest_root(current, roots)
        hit = dist < config.root_tol
        with np.errstate(invalid="ignore"):
            escaped = ~hit & ~(np.abs(current) <= config.escape_radius)
        done = hit | escaped
        if done.any():
            finished = active[done]
            terminal[finished] = current[done]
            iterations[finished] = iteration
            status[active[hit]] = RunStatus.CONVERGED_TO_ROOT
            root_index[active[hit]] = k[hit]
            status[active[escaped]] = RunStatus.DIVERGED
            active, current = active[~done], current[~done]
        if active.size == 0 or iteration == config.max_iter:
            break

        sub_stream = stream.take(active) if stream is not None else None
        step_fn = perturb(fn, sub_stream) if perturb is not None else fn
        outcome = step(step_fn, current, sub_stream)

        failed = outcome.status != StepStatus.CONTINUE
        if failed.any():
            finished = active[failed]
            terminal[finished] = current[failed]
            iterations[finished] = iteration
            kinds = outcome.status[failed]
            critical = kinds == StepStatus.GRADIENT_VANISHED
            status[finished] = np.where(critical, RunStatus.CONVERGED_TO_NON_ROOT_CRITICAL,
                                        RunStatus.ERROR)
            error_kind[finished] = np.where(critical, StepStatus.CONTINUE, kinds)
            active, current = active[~failed], outcome.next[~failed]
        else:
            current = outcome.next

    terminal[active] = current
    iterations[active] = config.max_iter

    logger.debug(
        f"{step_kind.value}: {n} runs, "
        f"{int(np.sum(status == RunStatus.CONVERGED_TO_ROOT))} converged to a root"
    )
    return RunResult(
        terminal=terminal.reshape(shape),
        iterations=iterations.reshape(shape),
        status=status.reshape(shape),
        root_index=root_index.reshape(shape),
        error_kind=error_kind.reshape(shape),
    )
