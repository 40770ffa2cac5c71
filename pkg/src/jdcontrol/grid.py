"""Cell-centered phase-space grid supplying the RBF centers.

The computational box ``(-x_max, x_max) x (-v_max, v_max)`` carries no
boundary conditions; it exists only to place the ``L = n_x * n_v`` basis
centers.  Centers are enumerated row-major with the position index outer,
so the flat index of cell ``(i, l)`` (0-based) is ``i * n_v + l``.  This
ordering is fixed: control coefficient rows must be stable across runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class PhaseGrid:
    x_max: float
    v_max: float
    n_x: int
    n_v: int
    dx: float = field(init=False)
    dv: float = field(init=False)
    centers_x: np.ndarray = field(init=False, repr=False)
    centers_v: np.ndarray = field(init=False, repr=False)
    centers: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        problems = []
        if not (np.isfinite(self.x_max) and self.x_max > 0):
            problems.append(f"x_max must be positive, got {self.x_max}")
        if not (np.isfinite(self.v_max) and self.v_max > 0):
            problems.append(f"v_max must be positive, got {self.v_max}")
        if self.n_x < 2:
            problems.append(f"n_x must be >= 2, got {self.n_x}")
        if self.n_v < 2:
            problems.append(f"n_v must be >= 2, got {self.n_v}")
        if problems:
            raise ValueError("; ".join(problems))
        object.__setattr__(self, "dx", 2.0 * self.x_max / self.n_x)
        object.__setattr__(self, "dv", 2.0 * self.v_max / self.n_v)
        object.__setattr__(self, "centers_x", _axis_centers(self.x_max, self.n_x))
        object.__setattr__(self, "centers_v", _axis_centers(self.v_max, self.n_v))
        pairs = np.empty((self.n_x * self.n_v, 2))
        pairs[:, 0] = np.repeat(self.centers_x, self.n_v)
        pairs[:, 1] = np.tile(self.centers_v, self.n_x)
        pairs.setflags(write=False)
        object.__setattr__(self, "centers", pairs)

    @property
    def n_centers(self) -> int:
        return self.n_x * self.n_v

    def flat_index(self, i: int, l: int) -> int:
        """Flat center index of cell (i, l), both 0-based."""
        return i * self.n_v + l


def _axis_centers(half_width: float, n: int) -> np.ndarray:
    # (i - 1/2) * d - half_width for 1-based i, written with an integer
    # numerator so that mirrored centers negate exactly in floating point
    k = 2 * np.arange(1, n + 1) - 1 - n
    c = half_width * (k / n)
    c.setflags(write=False)
    return c


def build_grid(x_max: float, v_max: float, n_x: int, n_v: int) -> PhaseGrid:
    """Build the cell-centered grid of basis centers."""
    return PhaseGrid(float(x_max), float(v_max), int(n_x), int(n_v))
