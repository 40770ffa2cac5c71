"""Running costs, their gradients, and the discrete reduced objective.

Two cost kinds: a Gaussian tracking well around a desired trajectory, and an
elliptic-orbit well.  Both are bounded in [-1, 0) with bounded derivatives.
The reduced objective integrates the running cost plus the quadratic control
penalty with rectangle quadrature at the uniform nodes: the interval
``[tau_k, tau_{k+1})`` is sampled at its right endpoint and the penalty there
uses the coefficients active on that interval.  The discrete adjoint
differentiates exactly this sum.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .control import ControlField, eval_u
from .forward import TrajectoryRecord


@dataclass(frozen=True)
class DesiredTrajectory:
    """Target phase-space curve; kinds: constant, ramp, tabulated.

    The ramp runs from -x_max/2 to x_max/2 linearly in position while the
    velocity target decreases as ``v_max/2 - |v_max*t/(2T)|``.  Tabulated
    targets interpolate (t, x, v) samples piecewise-linearly.
    """

    kind: str
    x0: float = 0.0
    v0: float = 0.0
    x_max: float = 0.0
    v_max: float = 0.0
    t_final: float = 0.0
    table: np.ndarray | None = None

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "constant":
            return np.broadcast_to(self.x0, t.shape).copy(), np.broadcast_to(self.v0, t.shape).copy()
        if self.kind == "ramp":
            xd = -0.5 * self.x_max + (self.x_max / self.t_final) * t
            vd = 0.5 * self.v_max - np.abs(self.v_max * t / (2.0 * self.t_final))
            return xd, vd
        if self.kind == "tabulated":
            assert self.table is not None
            ts, xs, vs = self.table[:, 0], self.table[:, 1], self.table[:, 2]
            return np.interp(t, ts, xs), np.interp(t, ts, vs)
        raise ValueError(f"unknown desired-trajectory kind {self.kind!r}")


def constant_target(x: float, v: float) -> DesiredTrajectory:
    return DesiredTrajectory(kind="constant", x0=x, v0=v)


def ramp_target(x_max: float, v_max: float, t_final: float) -> DesiredTrajectory:
    return DesiredTrajectory(kind="ramp", x_max=x_max, v_max=v_max, t_final=t_final)


def tabulated_target(table: np.ndarray) -> DesiredTrajectory:
    table = np.asarray(table, dtype=float)
    if table.ndim != 2 or table.shape[1] != 3:
        raise ValueError("tabulated target needs rows (t, x, v)")
    if not np.all(np.diff(table[:, 0]) > 0):
        raise ValueError("tabulated target times must be strictly increasing")
    return DesiredTrajectory(kind="tabulated", table=table)


@dataclass(frozen=True)
class CostSpec:
    """Running-cost selection plus the control penalty weight."""

    kind: str
    sigma_j: float
    alpha: float
    desired: DesiredTrajectory | None = None
    a_x: float = 0.0
    a_v: float = 0.0

    def __post_init__(self):
        if self.kind not in ("tracking", "ellipse"):
            raise ValueError(f"unknown cost kind {self.kind!r}")
        if self.sigma_j <= 0:
            raise ValueError(f"sigma_j must be positive, got {self.sigma_j}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be nonnegative, got {self.alpha}")
        if self.kind == "tracking" and self.desired is None:
            raise ValueError("tracking cost requires a desired trajectory")
        if self.kind == "ellipse" and (self.a_x <= 0 or self.a_v <= 0):
            raise ValueError("ellipse cost requires positive semi-axes a_x, a_v")


def running_cost(spec: CostSpec, x, v, t):
    """Pointwise running cost; always in [-1, 0)."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    inv2s2 = 0.5 / spec.sigma_j**2
    if spec.kind == "tracking":
        xd, vd = spec.desired(t)
        out = -np.exp(-((x - xd) ** 2 + (v - vd) ** 2) * inv2s2)
    else:
        g = (x / spec.a_x) ** 2 + (v / spec.a_v) ** 2 - 1.0
        out = -np.exp(-(g**2) * inv2s2)
    return out if out.ndim else float(out)


def running_cost_grad(spec: CostSpec, x, v, t):
    """Gradient (d/dx, d/dv) of :func:`running_cost`."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    s2 = spec.sigma_j**2
    if spec.kind == "tracking":
        xd, vd = spec.desired(t)
        e = np.exp(-((x - xd) ** 2 + (v - vd) ** 2) * (0.5 / s2))
        gx = (x - xd) / s2 * e
        gv = (v - vd) / s2 * e
    else:
        g = (x / spec.a_x) ** 2 + (v / spec.a_v) ** 2 - 1.0
        e = np.exp(-(g**2) * (0.5 / s2))
        gx = e * g * (2.0 * x / spec.a_x**2) / s2
        gv = e * g * (2.0 * v / spec.a_v**2) / s2
    if gx.ndim:
        return gx, gv
    return float(gx), float(gv)


def cost_with_control_grad(
    spec: CostSpec, cf: ControlField, x: float, v: float, t: float
) -> tuple[float, float]:
    """Gradient of the cost integrand including the penalty term alpha*u*grad(u)."""
    gx, gv = running_cost_grad(spec, x, v, t)
    if spec.alpha:
        u, ux, uv = eval_u(cf, x, v, t)
        gx += spec.alpha * u * ux
        gv += spec.alpha * u * uv
    return gx, gv


def _phi_matrix(cf: ControlField, xs: np.ndarray, vs: np.ndarray) -> np.ndarray:
    """Basis products phi_l at many points, shape (n_points, L)."""
    from .forward import _axis_bumps_many

    bx = _axis_bumps_many(xs, cf.grid.centers_x, cf.eps_phi)
    bv = _axis_bumps_many(vs, cf.grid.centers_v, cf.eps_phi)
    return (bx[:, :, None] * bv[:, None, :]).reshape(xs.size, -1)


def quadrature_controls(grid_n_t_u: int, cf: ControlField) -> np.ndarray:
    """Control interval used on each simulation quadrature interval k=0..K-1."""
    k_sim = grid_n_t_u
    k_cf = cf.n_t_u
    return (np.arange(k_sim) * k_cf) // k_sim


def reduced_objective(
    spec: CostSpec, cf: ControlField, trajectories: list[TrajectoryRecord]
) -> float:
    """Discrete objective: particle mean of the rectangle-rule cost sum.

    For each particle, ``dtau * sum_k [ J(z(tau_{k+1}), tau_{k+1})
    + (alpha/2) * u_k(z(tau_{k+1}))^2 ]`` where ``u_k`` uses the coefficients
    of the control interval covering ``[tau_k, tau_{k+1})``.
    """
    if not trajectories:
        raise ValueError("reduced_objective needs at least one trajectory")
    grid = trajectories[0].grid
    k_sim = grid.n_t_u
    dtau = grid.dtau
    taus = grid.nodes[grid.uniform_node_idx[1:]]
    cols = quadrature_controls(k_sim, cf)
    mu_cols = cf.mu[:, cols]  # (L, K)
    total = 0.0
    for rec in trajectories:
        zs = rec.uniform_states[1:]
        costs = running_cost(spec, zs[:, 0], zs[:, 1], taus)
        if spec.alpha:
            phi = _phi_matrix(cf, zs[:, 0], zs[:, 1])
            u = np.einsum("kl,lk->k", phi, mu_cols)
            total += dtau * float(np.sum(costs + 0.5 * spec.alpha * u * u))
        else:
            total += dtau * float(np.sum(costs))
    return total / len(trajectories)
