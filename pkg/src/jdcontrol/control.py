"""Compactly supported bump-RBF basis and the piecewise-constant control field.

The feedback control is ``u(x, v, t) = sum_l mu_l(t) * phi_l^x(x) * phi_l^v(v)``
with one bump per grid center and coefficients held constant on each of the
``n_t_u`` equal control intervals of ``[0, t_final]``.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .grid import PhaseGrid, build_grid

_T_SLACK = 1e-12


def bump(x, x_c, eps: float):
    """Bump value ``exp(-1 / (1 - (eps*|x - x_c|)^2))``, zero outside the support.

    Total function of x (scalar or array); the support is the open ball
    ``|x - x_c| < 1/eps`` and the peak value is ``exp(-1)``.
    """
    if eps <= 0:
        raise ValueError(f"shape parameter eps must be positive, got {eps}")
    d = np.asarray(x, dtype=float) - x_c
    s2 = (eps * d) ** 2
    inside = s2 < 1.0
    w = np.where(inside, 1.0 - s2, 1.0)
    out = np.where(inside, np.exp(-1.0 / w), 0.0)
    return out if out.ndim else float(out)


def bump_derivative(x, x_c, eps: float):
    """Analytic d/dx of :func:`bump`; odd about ``x_c``, zero outside the support."""
    if eps <= 0:
        raise ValueError(f"shape parameter eps must be positive, got {eps}")
    d = np.asarray(x, dtype=float) - x_c
    s2 = (eps * d) ** 2
    inside = s2 < 1.0
    w = np.where(inside, 1.0 - s2, 1.0)
    val = np.where(inside, np.exp(-1.0 / w), 0.0)
    out = val * (-2.0 * eps * eps * d) / (w * w)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class BasisEval:
    """Values and spatial derivatives of all L basis products at one point."""

    values: np.ndarray
    dx_values: np.ndarray
    dv_values: np.ndarray


def eval_basis(grid: PhaseGrid, eps_phi: float, x: float, v: float) -> BasisEval:
    """Evaluate phi_l(x, v) and its x/v derivatives for every center l."""
    bx = bump(x, grid.centers_x, eps_phi)
    bv = bump(v, grid.centers_v, eps_phi)
    bdx = bump_derivative(x, grid.centers_x, eps_phi)
    bdv = bump_derivative(v, grid.centers_v, eps_phi)
    return BasisEval(
        values=np.outer(bx, bv).ravel(),
        dx_values=np.outer(bdx, bv).ravel(),
        dv_values=np.outer(bx, bdv).ravel(),
    )


@dataclass(frozen=True)
class ControlField:
    """L x n_t_u coefficient array plus the basis it multiplies.

    ``mu[l, k]`` is the weight of basis l on the k-th control interval
    ``[k*dtau, (k+1)*dtau)``; the lookup at ``t = t_final`` maps to the last
    interval so trajectories ending exactly at T are well-defined.
    Instances are immutable; the optimizer builds a new field per iterate.
    """

    mu: np.ndarray
    grid: PhaseGrid
    eps_phi: float
    t_final: float
    n_t_u: int

    def __post_init__(self):
        mu = np.ascontiguousarray(np.asarray(self.mu, dtype=float))
        if mu.shape != (self.grid.n_centers, self.n_t_u):
            raise ValueError(
                f"mu must have shape (L, n_t_u) = ({self.grid.n_centers}, {self.n_t_u}),"
                f" got {mu.shape}"
            )
        if not np.all(np.isfinite(mu)):
            raise ValueError("mu contains non-finite entries")
        if self.eps_phi <= 0:
            raise ValueError(f"eps_phi must be positive, got {self.eps_phi}")
        if self.t_final <= 0 or self.n_t_u < 1:
            raise ValueError("t_final must be positive and n_t_u >= 1")
        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)

    @property
    def dtau(self) -> float:
        return self.t_final / self.n_t_u

    @property
    def mu3(self) -> np.ndarray:
        """View of mu shaped (n_x, n_v, n_t_u) for tensor-product contractions."""
        return self.mu.reshape(self.grid.n_x, self.grid.n_v, self.n_t_u)

    def interval_index(self, t: float) -> int:
        """Control interval containing t (left-closed; t = t_final -> last)."""
        if t < -_T_SLACK * self.t_final or t > self.t_final * (1.0 + _T_SLACK):
            raise ValueError(f"t = {t} outside [0, {self.t_final}]")
        return min(max(int(t / self.dtau), 0), self.n_t_u - 1)

    def with_mu(self, mu: np.ndarray) -> "ControlField":
        return ControlField(mu, self.grid, self.eps_phi, self.t_final, self.n_t_u)

    def zeros_like(self) -> "ControlField":
        return self.with_mu(np.zeros_like(self.mu))


def zero_control(grid: PhaseGrid, eps_phi: float, t_final: float, n_t_u: int) -> ControlField:
    return ControlField(np.zeros((grid.n_centers, n_t_u)), grid, eps_phi, t_final, n_t_u)


def eval_u(cf: ControlField, x: float, v: float, t: float) -> tuple[float, float, float]:
    """Evaluate (u, u_x, u_v) at phase point (x, v) and time t."""
    k = cf.interval_index(t)
    g = cf.grid
    bx = bump(x, g.centers_x, cf.eps_phi)
    bv = bump(v, g.centers_v, cf.eps_phi)
    bdx = bump_derivative(x, g.centers_x, cf.eps_phi)
    bdv = bump_derivative(v, g.centers_v, cf.eps_phi)
    m = cf.mu3[:, :, k]
    return float(bx @ m @ bv), float(bdx @ m @ bv), float(bx @ m @ bdv)


def time_average(cf: ControlField) -> ControlField:
    """Collapse the control to a single interval carrying the time mean of mu.

    Exact for piecewise-constant coefficients on equal intervals:
    ``mu_bar = mean over intervals``.
    """
    mu_bar = cf.mu.mean(axis=1, keepdims=True)
    return ControlField(mu_bar, cf.grid, cf.eps_phi, cf.t_final, 1)


def save_control(cf: ControlField, path) -> None:
    """Write the control field as CSV (rows = centers, columns = intervals).

    The header pins everything needed to rebuild the field; float values are
    written with shortest round-trip repr so save/load is bit-exact.
    """
    buf = io.StringIO()
    g = cf.grid
    buf.write("# jdcontrol control field v1\n")
    for key, val in (
        ("L", g.n_centers),
        ("n_t_u", cf.n_t_u),
        ("t_final", repr(float(cf.t_final))),
        ("eps_phi", repr(float(cf.eps_phi))),
        ("x_max", repr(float(g.x_max))),
        ("v_max", repr(float(g.v_max))),
        ("n_x", g.n_x),
        ("n_v", g.n_v),
    ):
        buf.write(f"# {key}={val}\n")
    for row in cf.mu:
        buf.write(",".join(repr(float(c)) for c in row))
        buf.write("\n")
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


def load_control(path) -> ControlField:
    """Read a control field written by :func:`save_control`."""
    header: dict[str, str] = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line.lstrip("#").strip()
                if "=" in body:
                    key, _, val = body.partition("=")
                    header[key.strip()] = val.strip()
                continue
            rows.append([float(c) for c in line.split(",")])
    required = {"L", "n_t_u", "t_final", "eps_phi", "x_max", "v_max", "n_x", "n_v"}
    missing = sorted(required - header.keys())
    if missing:
        raise ValueError(f"control file {path} missing header keys: {missing}")
    grid = build_grid(
        float(header["x_max"]), float(header["v_max"]), int(header["n_x"]), int(header["n_v"])
    )
    mu = np.asarray(rows, dtype=float)
    if mu.shape[0] != int(header["L"]):
        raise ValueError(
            f"control file {path}: expected {header['L']} rows, found {mu.shape[0]}"
        )
    return ControlField(mu, grid, float(header["eps_phi"]), float(header["t_final"]), int(header["n_t_u"]))
