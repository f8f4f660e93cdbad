"""Newton-type flows: right-hand sides, Runge-Kutta steppers and trajectory integration.

The plane is identified with C, so states and velocities are complex arrays. A
right-hand side used by the steppers returns NaN wherever the velocity is undefined.
"""

import logging
from collections.abc import Callable
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .config import IntegratorConfig
from .function_core import FunctionExpr, eval_jet, objective_jet
from .iterative_methods import SINGULAR_LIMIT, RunStatus, StepStatus, nearest_root
from .linalg2 import solve_sym2

logger = logging.getLogger(__name__)

# Smallest step the adaptive integrator may take before giving up.
MIN_ADAPTIVE_STEP = 1e-12

Rhs = Callable[[np.ndarray], np.ndarray]


class FlowKind(str, Enum):
    PLAIN = "plain"
    FRACTION = "fraction"
    OPTIMIZATION = "optimization"


@dataclass
class FlowVelocity:
    value: np.ndarray
    valid: np.ndarray


@dataclass
class FlowRunResult:
    """Terminal state of integrate_flow; `t_reached` is the time at termination."""

    terminal: np.ndarray
    iterations: np.ndarray
    status: np.ndarray
    root_index: np.ndarray
    error_kind: np.ndarray
    t_reached: np.ndarray


def flow_rhs(kind: FlowKind, fn: FunctionExpr, z) -> FlowVelocity:
    """Velocity of the chosen flow at z.

    Plain: -f/f'. Fraction: -f f' / ((f')^2 - f f''), the plain flow of f/f'.
    Optimization: -(Hess F)^-1 grad F. Points where the denominator (or the Hessian
    determinant) is below 1e-300 in magnitude are flagged invalid.
    """
    z = np.asarray(z, dtype=np.complex128)
    kind = FlowKind(kind)
    if kind is FlowKind.OPTIMIZATION:
        obj = objective_jet(fn, z)
        w = solve_sym2(obj.hessian, obj.gradient)
        with np.errstate(invalid="ignore"):
            value = -w.to_complex()
            valid = obj.valid & (np.abs(obj.hessian.det()) >= SINGULAR_LIMIT)
    else:
        jet = eval_jet(fn, z)
        with np.errstate(all="ignore"):
            if kind is FlowKind.PLAIN:
                denominator = jet.df
                value = -jet.f / jet.df
            else:
                denominator = jet.df * jet.df - jet.f * jet.d2f
                value = -jet.f * jet.df / denominator
            valid = jet.valid & (np.abs(denominator) >= SINGULAR_LIMIT)
    valid = valid & np.isfinite(value)
    return FlowVelocity(value=np.where(valid, value, np.nan + 0j), valid=valid)


def make_rhs(kind: FlowKind, fn: FunctionExpr) -> Rhs:
    """Right-hand side for the steppers, NaN where the velocity is invalid."""
    return lambda y: flow_rhs(kind, fn, y).value


def euler_step(rhs: Rhs, y, h):
    return y + h * rhs(y)


def rk4_step(rhs: Rhs, y, h):
    """Classical fourth-order Runge-Kutta step."""
    k1 = rhs(y)
    k2 = rhs(y + 0.5 * h * k1)
    k3 = rhs(y + 0.5 * h * k2)
    k4 = rhs(y + h * k3)
    return y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)


# Dormand-Prince 5(4) tableau; _DP_B is the fifth-order solution, _DP_E = b5 - b4.
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_B = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_DP_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)


def dp54_step(rhs: Rhs, y, h, rel_tol: float, abs_tol: float):
    """One attempted Dormand-Prince 5(4) step with error control.

    Args:
        rhs: Right-hand side.
        y: State(s).
        h: Step size(s).
        rel_tol: Relative tolerance on the local error.
        abs_tol: Absolute tolerance on the local error.

    Returns:
        (y_next, h_next, accepted). y_next is the fifth-order solution where the
        step is accepted, y where it is rejected and NaN where a stage was invalid.
        h_next = h * clip(0.9 * err^(-1/5), 0.2, 5).
    """
    y = np.asarray(y, dtype=np.complex128)
    h = np.asarray(h, dtype=np.float64)
    stages = []
    for row in _DP_A:
        increment = sum((a * k for a, k in zip(row, stages) if a != 0.0), np.zeros_like(y))
        stages.append(rhs(y + h * increment))
    y5 = y + h * sum(b * k for b, k in zip(_DP_B, stages) if b != 0.0)
    error = h * sum(e * k for e, k in zip(_DP_E, stages) if e != 0.0)

    with np.errstate(all="ignore"):
        scale = abs_tol + rel_tol * np.maximum(np.abs(y), np.abs(y5))
        err = np.abs(error) / scale
        factor = np.clip(0.9 * err ** -0.2, 0.2, 5.0)
    valid = np.isfinite(y5) & np.isfinite(err)
    accepted = valid & (err <= 1.0)
    y_next = np.where(accepted, y5, np.where(valid, y, np.nan + 0j))
    h_next = np.where(valid, h * np.where(err == 0, 5.0, factor), np.nan)
    return y_next, h_next, accepted


def integrate_flow(
    kind: FlowKind,
    fn: FunctionExpr,
    z0,
    config: IntegratorConfig,
    roots,
) -> FlowRunResult:
    """Integrate a flow from each starting point on [0, t_end].

    Trajectories stop early within root_tol of a root (ConvergedToRoot), beyond the
    escape radius (Diverged), where the velocity is undefined (Error) and, for the
    optimization flow, where ||grad F|| < grad_tol away from every root
    (ConvergedToNonRootCritical). The rest are Exhausted at t_end.

    Args:
        kind: Flow to integrate.
        fn: Function expression.
        z0: Starting point or array of starting points.
        config: Step size, horizon, stepper and stopping thresholds.
        roots: Distinct root locations used for classification.

    Returns:
        FlowRunResult shaped like z0; `iterations` counts accepted steps.
    """
    kind = FlowKind(kind)
    rhs = make_rhs(kind, fn)
    z0 = np.asarray(z0, dtype=np.complex128)
    shape = z0.shape
    n = z0.size

    terminal = z0.ravel().copy()
    steps = np.zeros(n, dtype=np.int64)
    status = np.full(n, RunStatus.EXHAUSTED, dtype=np.int8)
    root_index = np.full(n, -1, dtype=np.int64)
    error_kind = np.zeros(n, dtype=np.int8)
    t_reached = np.zeros(n)
    roots = np.asarray(roots, dtype=np.complex128).ravel()

    active = np.arange(n)
    y = terminal.copy()
    t = np.zeros(n)
    h = np.full(n, config.h)
    done_eps = 1e-9 * config.h

    def retire(mask, new_status, kinds=None):
        nonlocal active, y, t, h
        finished = active[mask]
        terminal[finished] = y[mask]
        t_reached[finished] = t[mask]
        status[finished] = new_status
        if kinds is not None:
            error_kind[finished] = kinds
        keep = ~mask
        active, y, t, h = active[keep], y[keep], t[keep], h[keep]

    for _ in range(config.max_steps + 1):
        if active.size == 0:
            break
        k, dist = nearest_root(y, roots)
        hit = dist < config.root_tol
        if hit.any():
            root_index[active[hit]] = k[hit]
            retire(hit, RunStatus.CONVERGED_TO_ROOT)
        with np.errstate(invalid="ignore"):
            escaped = ~(np.abs(y) <= config.escape_radius)
        if escaped.any():
            retire(escaped, RunStatus.DIVERGED)
        if kind is FlowKind.OPTIMIZATION and active.size:
            with np.errstate(invalid="ignore"):
                critical = objective_jet(fn, y).gradient.norm() < config.grad_tol
            if critical.any():
                retire(critical, RunStatus.CONVERGED_TO_NON_ROOT_CRITICAL)
        horizon = config.t_end - t <= done_eps
        if horizon.any():
            retire(horizon, RunStatus.EXHAUSTED)
        if active.size == 0:
            break

        step = np.minimum(h, config.t_end - t)
        if config.stepper == "dp54":
            y_next, h_next, accepted = dp54_step(rhs, y, step, config.dp_rel_tol, config.dp_abs_tol)
            invalid = np.isnan(y_next)
            t = np.where(accepted, t + step, t)
            steps[active[accepted]] += 1
            h = np.where(invalid, h, h_next)
            underflow = ~invalid & (h < MIN_ADAPTIVE_STEP)
        else:
            stepper = rk4_step if config.stepper == "rk4" else euler_step
            with np.errstate(all="ignore"):
                y_next = stepper(rhs, y, step)
            invalid = ~np.isfinite(y_next)
            t = np.where(invalid, t, t + step)
            steps[active[~invalid]] += 1
            underflow = np.zeros(invalid.shape, dtype=bool)

        y = np.where(invalid, y, y_next)
        if invalid.any():
            retire(invalid, RunStatus.ERROR, StepStatus.INVALID_JET)
            underflow = underflow[~invalid]
        if underflow.any():
            retire(underflow, RunStatus.ERROR, StepStatus.STEP_UNDERFLOW)

    # Still running after max_steps attempts.
    terminal[active] = y
    t_reached[active] = t

    logger.debug(
        f"{kind.value} flow: {n} trajectories, "
        f"{int(np.sum(status == RunStatus.CONVERGED_TO_ROOT))} reached a root"
    )
    return FlowRunResult(
        terminal=terminal.reshape(shape),
        iterations=steps.reshape(shape),
        status=status.reshape(shape),
        root_index=root_index.reshape(shape),
        error_kind=error_kind.reshape(shape),
        t_reached=t_reached.reshape(shape),
    )
