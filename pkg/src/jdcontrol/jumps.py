"""Keilson-Storer velocity jumps: frequency, jump-time sampling, jump map.

A jump leaves the position untouched and maps the velocity to
``gamma * v + noise`` with ``noise ~ N(0, 1/(2*beta))``.  Jump times follow a
Poisson process of rate ``sigma = sqrt(beta/pi)``; all random numbers for a
schedule are drawn up front so forward and adjoint sweeps see the same
realization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class JumpParams:
    gamma: float
    beta: float

    def __post_init__(self):
        if not (-1.0 <= self.gamma <= 1.0):
            raise ValueError(f"gamma must lie in [-1, 1], got {self.gamma}")
        if not (np.isfinite(self.beta) and self.beta > 0):
            raise ValueError(f"beta must be positive, got {self.beta}")

    @property
    def sigma(self) -> float:
        """Jump frequency sqrt(beta/pi); recomputed, never stored."""
        return math.sqrt(self.beta / math.pi)

    @property
    def noise_std(self) -> float:
        """Standard deviation of the post-jump velocity noise, (2*beta)^{-1/2}."""
        return math.sqrt(0.5 / self.beta)


@dataclass(frozen=True)
class JumpSchedule:
    """Strictly increasing jump times in (0, T] with one noise draw per time."""

    times: np.ndarray
    noises: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        noises = np.asarray(self.noises, dtype=float)
        if times.shape != noises.shape:
            raise ValueError("times and noises must have matching length")
        if times.size and not np.all(np.diff(times) > 0):
            raise ValueError("jump times must be strictly increasing")
        times.setflags(write=False)
        noises.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "noises", noises)

    def __len__(self) -> int:
        return self.times.size


EMPTY_SCHEDULE = JumpSchedule(np.empty(0), np.empty(0))


def jump_frequency(p: JumpParams) -> float:
    """Mean jump rate of the kernel, sqrt(beta/pi)."""
    return p.sigma


def sample_jump_gap(p: JumpParams, nu: float) -> float:
    """Map a uniform draw nu in (0, 1) to an exponential gap -log(nu)/sigma."""
    if not 0.0 < nu < 1.0:
        raise ValueError(f"nu must lie strictly in (0, 1), got {nu}")
    return -math.log(nu) / p.sigma


def build_schedule(p: JumpParams, t_final: float, rng: np.random.Generator) -> JumpSchedule:
    """Sample the jump times up to t_final and one velocity noise per jump.

    Gaps are cumulative exponential draws; the first time exceeding t_final
    is discarded.  Noises are drawn after all times, in one batch, so the
    stream consumption order is fixed.
    """
    if t_final <= 0:
        raise ValueError(f"t_final must be positive, got {t_final}")
    times = []
    t = 0.0
    while True:
        nu = rng.random()
        while nu == 0.0:  # random() is [0, 1); gap must be finite and positive
            nu = rng.random()
        t += sample_jump_gap(p, nu)
        if t > t_final:
            break
        times.append(t)
    noises = rng.normal(0.0, p.noise_std, size=len(times))
    return JumpSchedule(np.asarray(times), noises)


def apply_jump(p: JumpParams, x: float, v: float, noise: float) -> tuple[float, float]:
    """Jump map: position unchanged, velocity -> gamma*v + noise."""
    return x, p.gamma * v + noise


def jump_jacobian(p: JumpParams) -> np.ndarray:
    """Jacobian of the jump map wrt (x, v): diag(1, gamma)."""
    return np.diag([1.0, p.gamma])
