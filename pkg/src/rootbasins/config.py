"""Configuration management for rootbasins.

This module holds the run-parameter dataclasses shared by the iterative methods,
the Newton flows and the stochastic protocol, and loads environment-level settings
(default seed, worker threads, logging) from a .env file.
"""

import itertools
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np
from dotenv import load_dotenv

Stepper = Literal["rk4", "dp54", "euler"]

# Entropy tag separating the delta-jitter stream from the per-pixel streams.
_DELTA_JITTER_TAG = 0xD317A


def _min_separation(values: tuple[float, ...]) -> float:
    return min(abs(a - b) for a, b in itertools.combinations(values, 2))


@dataclass
class MethodConfig:
    """Tunables of the discrete root-finding methods.

    The defaults satisfy every hypothesis of the convergence theorems: the delta set
    {0, 1, -1} is pairwise separated by 2 * kappa with kappa = 0.5, tau = 1.5 is the
    NQN exponent 1 + alpha with alpha = 0.5, and 0.5 < rho < 1.
    """

    delta_set: tuple[float, ...] = (0.0, 1.0, -1.0)
    tau: float = 1.5
    gamma0: float = 1.0
    theta: float = 0.0
    rho: float = 0.9
    max_iter: int = 10_000
    root_tol: float = 1e-6
    grad_tol: float = 1e-13
    escape_radius: float = 1e10
    armijo_max_halvings: int = 100
    seed: int = 0
    relaxation: complex = 0.5
    jitter_deltas: bool = False

    deltas: tuple[float, ...] = field(init=False, repr=False)
    """Delta values actually used by select_delta (jittered when requested)."""

    def __post_init__(self):
        self.delta_set = tuple(float(d) for d in self.delta_set)
        if len(self.delta_set) < 3:
            msg = f"delta_set needs at least 3 values, got {len(self.delta_set)}"
            raise ValueError(msg)
        if _min_separation(self.delta_set) <= 0:
            msg = f"delta_set values must be pairwise distinct: {self.delta_set}"
            raise ValueError(msg)
        if self.tau <= 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not 0 < self.gamma0 <= 1:
            raise ValueError(f"gamma0 must lie in (0, 1], got {self.gamma0}")
        if self.theta < 0:
            raise ValueError(f"theta must be non-negative, got {self.theta}")
        if not 0.5 < self.rho < 1:
            msg = f"rho must satisfy 0.5 < rho < 1, got {self.rho}"
            raise ValueError(msg)
        if self.max_iter <= 0:
            raise ValueError(f"max_iter must be positive, got {self.max_iter}")
        for name in ("root_tol", "grad_tol", "escape_radius"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.armijo_max_halvings <= 0:
            msg = f"armijo_max_halvings must be positive, got {self.armijo_max_halvings}"
            raise ValueError(msg)
        if self.relaxation == 0:
            raise ValueError("relaxation must be nonzero")

        deltas = np.array(self.delta_set)
        if self.jitter_deltas:
            quarter = _min_separation(self.delta_set) / 8
            rng = np.random.default_rng([self.seed, _DELTA_JITTER_TAG])
            deltas = deltas + rng.uniform(-quarter, quarter, size=deltas.size)
        self.deltas = tuple(float(d) for d in deltas)

    @property
    def kappa(self) -> float:
        """Half the smallest pairwise distance of the deltas in use."""
        return 0.5 * _min_separation(self.deltas)


@dataclass
class IntegratorConfig:
    """Settings for integrating the Newton flows."""

    h: float = 0.01
    t_end: float = 100.0
    stepper: Stepper = "rk4"
    dp_rel_tol: float = 1e-6
    dp_abs_tol: float = 1e-9
    root_tol: float = 1e-3
    escape_radius: float = 1e10
    grad_tol: float = 1e-10
    max_steps: int = 1_000_000

    def __post_init__(self):
        if self.stepper not in ("rk4", "dp54", "euler"):
            msg = f"Invalid stepper: {self.stepper}. Must be 'rk4', 'dp54', or 'euler'"
            raise ValueError(msg)
        for name in ("h", "t_end", "dp_rel_tol", "dp_abs_tol", "root_tol", "escape_radius",
                     "grad_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.h > self.t_end:
            raise ValueError(f"h ({self.h}) must not exceed t_end ({self.t_end})")
        if self.max_steps <= 0:
            raise ValueError(f"max_steps must be positive, got {self.max_steps}")


@dataclass
class StochasticSpec:
    """Stochastic root-finding protocol g(z, xi) = f(z) + epsilon * xi * (z^3 + 2z - 5)."""

    epsilon: float = 1e-4
    relaxed_root_tol: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be non-negative, got {self.epsilon}")
        if self.relaxed_root_tol is None:
            # 10 * epsilon; an unperturbed run keeps the usual root tolerance
            self.relaxed_root_tol = 10 * self.epsilon if self.epsilon > 0 else 1e-6
        if self.relaxed_root_tol < self.epsilon or self.relaxed_root_tol <= 0:
            msg = (
                f"relaxed_root_tol ({self.relaxed_root_tol}) must be positive and "
                f"at least epsilon ({self.epsilon})"
            )
            raise ValueError(msg)


@dataclass
class AppConfig:
    """Environment-level settings."""

    seed: int
    workers: int
    log_dir: str
    log_level: str


def _positive_int(name: str, default: str) -> int:
    try:
        value = int(os.getenv(name, default))
        if value <= 0:
            raise ValueError(f"{name} must be positive")
    except ValueError as e:
        msg = f"Invalid {name}: {e}"
        raise ValueError(msg) from e
    return value


def load_config(env_path: str | Path | None = None) -> AppConfig:
    """Load environment-level configuration.

    Args:
        env_path: Path to .env file. If None, searches for .env in current directory.

    Returns:
        AppConfig with validated settings.

    Raises:
        ValueError: If a setting is present but invalid.
    """
    if env_path:
        load_dotenv(env_path)
    else:
        load_dotenv()

    try:
        seed = int(os.getenv("ROOTBASINS_SEED", "0"))
    except ValueError as e:
        msg = f"Invalid ROOTBASINS_SEED: {e}"
        raise ValueError(msg) from e

    workers = _positive_int("ROOTBASINS_WORKERS", "1")
    log_dir = os.getenv("ROOTBASINS_LOG_DIR", "logs")

    log_level = os.getenv("LOG_LEVEL", "INFO").upper()
    valid_log_levels = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")
    if log_level not in valid_log_levels:
        msg = f"Invalid LOG_LEVEL: {log_level}. Must be one of {valid_log_levels}"
        raise ValueError(msg)

    return AppConfig(seed=seed, workers=workers, log_dir=log_dir, log_level=log_level)
