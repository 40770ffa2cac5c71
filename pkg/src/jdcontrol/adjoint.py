"""Discrete adjoint sweeps on the forward time grids.

The adjoint pair (q, p) runs backward over exactly the forward union grid,
reusing its jump times.  The recursion is the transpose-Jacobian of the
forward scheme: Euler steps contribute ``I + dt * (grad drift)^T``, jump steps
contribute ``diag(1, gamma)``, and each uniform quadrature node subtracts its
cost-gradient source weighted by the quadrature width ``dtau`` (the terminal
node's source forms the terminal condition).  This is the exact derivative of
the discrete objective, which is what makes the reduced gradient match finite
differences to near machine precision.

In surrogate mode every appearance of the forward state inside the recursion
(drift-Jacobian coefficients and cost sources) is replaced by a per-node
Gaussian sample around the desired trajectory, so the sweep never touches the
stored path.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import csv

import numpy as np

from . import _kernels
from .control import ControlField
from .cost import CostSpec, cost_with_control_grad, quadrature_controls, running_cost_grad
from .errors import NumericalError
from .forward import Dynamics, TrajectoryRecord, _axis_bumps_many
from .jumps import JumpParams, jump_jacobian
from .timegrid import TimeGrid


@dataclass(frozen=True)
class AdjointPath:
    """Backward multipliers (q, p), one pair per forward grid node."""

    grid: TimeGrid
    states: np.ndarray


@dataclass(frozen=True)
class AdjointSource:
    """Where the adjoint reads states: the stored path, or surrogate samples.

    Surrogate mode draws ``z ~ N(z_d(t), variance_profile(t) * I)`` per node,
    trading gradient accuracy for not having to store forward trajectories.
    """

    mode: str = "exact"
    variance_profile: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if self.mode not in ("exact", "surrogate"):
            raise ValueError(f"unknown adjoint source mode {self.mode!r}")
        if self.mode == "surrogate" and self.variance_profile is None:
            raise ValueError("surrogate mode requires a variance profile")


EXACT_SOURCE = AdjointSource(mode="exact")


def linear_variance_profile(sigma0: float, slope: float) -> Callable[[np.ndarray], np.ndarray]:
    """Nonnegative, nondecreasing variance profile sigma0 + slope * t."""
    if sigma0 < 0 or slope < 0:
        raise ValueError("variance profile requires sigma0 >= 0 and slope >= 0")

    def profile(t):
        return sigma0 + slope * np.asarray(t, dtype=float)

    return profile


def estimate_variance_profile(
    trajectories: Sequence[TrajectoryRecord],
) -> Callable[[np.ndarray], np.ndarray]:
    """Fit a linear phase-space variance growth from an (uncontrolled) ensemble.

    Least-squares fit of ``var_x(t) + var_v(t)`` over the uniform nodes,
    clamped to nonnegative intercept and slope.
    """
    grid = trajectories[0].grid
    ts = grid.nodes[grid.uniform_node_idx]
    zs = np.stack([rec.uniform_states for rec in trajectories])
    var = zs.var(axis=0).sum(axis=1) / 2.0  # per-component mean variance
    slope, intercept = np.polyfit(ts, var, 1)
    return linear_variance_profile(max(float(intercept), 0.0), max(float(slope), 0.0))


def terminal_condition(
    spec: CostSpec, cf: ControlField, x_t: float, v_t: float
) -> tuple[float, float]:
    """Adjoint state at t = T: the negated cost-integrand gradient there."""
    gx, gv = cost_with_control_grad(spec, cf, x_t, v_t, cf.t_final)
    return -gx, -gv


def jump_transmission(p: JumpParams, r_post: tuple[float, float]) -> tuple[float, float]:
    """Hand the adjoint across a jump node: r_pre = (grad c)^T r_post."""
    jac = jump_jacobian(p)
    q, pv = r_post
    return float(jac[0, 0] * q), float(jac[1, 1] * pv)


def adjoint_step_back(
    dyn: Dynamics,
    cf: ControlField,
    z: tuple[float, float],
    r_next: tuple[float, float],
    dt: float,
    t: float,
    source_grad: tuple[float, float],
) -> tuple[float, float]:
    """One backward Euler-transpose step for uncoupled dynamics.

    ``q = q' + dt*((u_x + J_x) p' - sx)`` and ``p = p' + dt*(q' + (u_v + J_v) p' - sv)``
    with (J_x, J_v) the velocity-drift Jacobian of the dynamics without u.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if dyn.kind == "coupled":
        raise ValueError("coupled adjoints are handled at ensemble level")
    from .control import eval_u

    x, v = z
    _, ux, uv = eval_u(cf, x, v, t)
    jx = -dyn.eta if dyn.kind == "harmonic" else 0.0
    jv = 0.0
    if dyn.h is not None:
        hj = np.asarray(dyn.h_jac(x, v, t), dtype=float)
        jx += hj[1, 0]
        jv += hj[1, 1]
    q1, p1 = r_next
    sx, sv = source_grad
    q = q1 + dt * ((ux + jx) * p1 - sx)
    p = p1 + dt * (q1 + (uv + jv) * p1 - sv)
    return q, p


def _eval_states(
    spec: CostSpec,
    source: AdjointSource,
    traj: TrajectoryRecord,
    rng: np.random.Generator | None,
) -> np.ndarray:
    if source.mode == "exact":
        return traj.states
    if spec.desired is None:
        raise ValueError("surrogate mode requires a tracking cost with a desired trajectory")
    if rng is None:
        raise ValueError("surrogate mode requires an rng stream")
    ts = traj.grid.nodes
    xd, vd = spec.desired(ts)
    std = np.sqrt(source.variance_profile(ts))
    z = np.empty((ts.size, 2))
    draws = rng.normal(size=(ts.size, 2))
    z[:, 0] = xd + std * draws[:, 0]
    z[:, 1] = vd + std * draws[:, 1]
    return z


def _node_controls(
    cf: ControlField, z: np.ndarray, cols: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(u, u_x, u_v) at each supplied state, with a control column per state."""
    from .control import bump, bump_derivative

    g = cf.grid
    bx = _axis_bumps_many(z[:, 0], g.centers_x, cf.eps_phi)
    bv = _axis_bumps_many(z[:, 1], g.centers_v, cf.eps_phi)
    bdx = _axis_d_bumps_many(z[:, 0], g.centers_x, cf.eps_phi)
    bdv = _axis_d_bumps_many(z[:, 1], g.centers_v, cf.eps_phi)
    mu_g = cf.mu3[:, :, cols]  # (n_x, n_v, n_points)
    u = np.einsum("ni,iln,nl->n", bx, mu_g, bv)
    ux = np.einsum("ni,iln,nl->n", bdx, mu_g, bv)
    uv = np.einsum("ni,iln,nl->n", bx, mu_g, bdv)
    return u, ux, uv


def _axis_d_bumps_many(y: np.ndarray, centers: np.ndarray, eps: float) -> np.ndarray:
    d = y[:, None] - centers[None, :]
    s2 = (eps * d) ** 2
    inside = s2 < 1.0
    w = np.where(inside, 1.0 - s2, 1.0)
    val = np.where(inside, np.exp(-1.0 / w), 0.0)
    return val * (-2.0 * eps * eps * d) / (w * w)


def _source_arrays(
    spec: CostSpec, cf: ControlField, grid: TimeGrid, z: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Per-node quadrature-weighted cost sources (zero off uniform nodes 1..K)."""
    m1 = grid.n_nodes
    src_q = np.zeros(m1)
    src_p = np.zeros(m1)
    nodes_k = grid.uniform_node_idx[1:]
    taus = grid.nodes[nodes_k]
    zk = z[nodes_k]
    gx, gv = running_cost_grad(spec, zk[:, 0], zk[:, 1], taus)
    if spec.alpha:
        cols = quadrature_controls(grid.n_t_u, cf)
        u, ux, uv = _node_controls(cf, zk, cols)
        gx = gx + spec.alpha * u * ux
        gv = gv + spec.alpha * u * uv
    src_q[nodes_k] = grid.dtau * gx
    src_p[nodes_k] = grid.dtau * gv
    return src_q, src_p


def solve_adjoint(
    dyn: Dynamics,
    cf: ControlField,
    spec: CostSpec,
    traj: TrajectoryRecord,
    source: AdjointSource = EXACT_SOURCE,
    rng: np.random.Generator | None = None,
    params: JumpParams | None = None,
    particle: int = 0,
) -> AdjointPath:
    """Backward sweep for one uncoupled particle on its forward grid."""
    if dyn.kind == "coupled":
        raise ValueError("coupled adjoints are handled at ensemble level; use solve_adjoint_coupled")
    grid = traj.grid
    z = _eval_states(spec, source, traj, rng)
    gamma = params.gamma if params is not None else 0.0

    from .forward import _cf_interval_per_node

    cf_idx = _cf_interval_per_node(grid, cf)
    src_q, src_p = _source_arrays(spec, cf, grid, z)
    r = np.empty((grid.n_nodes, 2))
    if dyn.h is not None:
        bad = _recursion_with_h(dyn, cf, grid, z, cf_idx, gamma, src_q, src_p, r)
    else:
        _, ux, uv = _node_controls(cf, z, cf_idx)
        jx = -dyn.eta if dyn.kind == "harmonic" else 0.0
        bad = _kernels.adjoint_recursion(
            grid.step_sizes,
            grid.jump_flags.astype(np.uint8),
            gamma,
            np.ascontiguousarray(ux + jx),
            np.ascontiguousarray(uv),
            src_q,
            src_p,
            r,
        )
    if bad >= 0:
        raise NumericalError(
            f"particle {particle}: non-finite adjoint at node {bad}"
            f" (t = {grid.nodes[bad]:.6g})"
        )
    return AdjointPath(grid=grid, states=r)


def _recursion_with_h(dyn, cf, grid, z, cf_idx, gamma, src_q, src_p, r) -> int:
    # full 2x2 transpose steps; only taken when the nonlinear drift is present
    _, ux, uv = _node_controls(cf, z, cf_idx)
    m1 = grid.n_nodes
    r[m1 - 1] = (-src_q[m1 - 1], -src_p[m1 - 1])
    base_jx = -dyn.eta if dyn.kind == "harmonic" else 0.0
    for i in range(m1 - 2, -1, -1):
        q1, p1 = r[i + 1]
        if grid.jump_flags[i + 1]:
            q, p = q1, gamma * p1
        else:
            hj = np.asarray(dyn.h_jac(z[i, 0], z[i, 1], grid.nodes[i]), dtype=float)
            dt = grid.step_sizes[i]
            q = q1 + dt * (hj[0, 0] * q1 + (ux[i] + base_jx + hj[1, 0]) * p1)
            p = p1 + dt * ((1.0 + hj[0, 1]) * q1 + (uv[i] + hj[1, 1]) * p1)
        q -= src_q[i]
        p -= src_p[i]
        if not (np.isfinite(q) and np.isfinite(p)):
            return i
        r[i] = (q, p)
    return -1


def solve_adjoint_coupled(
    dyn: Dynamics,
    cf: ControlField,
    spec: CostSpec,
    trajectories: Sequence[TrajectoryRecord],
    params: JumpParams | None = None,
) -> list[AdjointPath]:
    """Backward sweep for a ring-coupled ensemble on the shared grid.

    The transpose of the ensemble drift Jacobian couples each q_j to the
    neighbours' p; neighbour contributions vanish on steps where the
    neighbour jumps (its row of the forward map carries no Euler drift).
    """
    if dyn.kind != "coupled":
        raise ValueError("solve_adjoint_coupled requires coupled dynamics")
    n = len(trajectories)
    grid = trajectories[0].grid
    gamma = params.gamma if params is not None else 0.0
    from .forward import _cf_interval_per_node

    cf_idx = _cf_interval_per_node(grid, cf)
    mu3 = cf.mu3
    xc, vc, eps = cf.grid.centers_x, cf.grid.centers_v, cf.eps_phi

    flags = np.stack([t.grid.jump_flags for t in trajectories])
    states = np.stack([t.states for t in trajectories])

    src_q = np.zeros((n, grid.n_nodes))
    src_p = np.zeros((n, grid.n_nodes))
    for j, traj in enumerate(trajectories):
        src_q[j], src_p[j] = _source_arrays(spec, cf, grid, traj.states)

    m1 = grid.n_nodes
    r = np.empty((n, m1, 2))
    r[:, m1 - 1, 0] = -src_q[:, m1 - 1]
    r[:, m1 - 1, 1] = -src_p[:, m1 - 1]
    for i in range(m1 - 2, -1, -1):
        q1 = r[:, i + 1, 0]
        p1 = r[:, i + 1, 1]
        keep = ~flags[:, i + 1]
        x = states[:, i, 0]
        v = states[:, i, 1]
        bx = _axis_bumps_many(x, xc, eps)
        bv = _axis_bumps_many(v, vc, eps)
        bdx = _axis_d_bumps_many(x, xc, eps)
        bdv = _axis_d_bumps_many(v, vc, eps)
        m = mu3[:, :, cf_idx[i]]
        ux = np.einsum("ni,il,nl->n", bdx, m, bv)
        uv = np.einsum("ni,il,nl->n", bx, m, bdv)
        dt = grid.step_sizes[i]
        pk = np.where(keep, p1, 0.0)
        q = q1 + dt * (
            np.where(keep, (ux - dyn.eta - 2.0 * dyn.omega) * p1, 0.0)
            + dyn.omega * (np.roll(pk, 1) + np.roll(pk, -1))
        )
        p = np.where(keep, p1 + dt * (q1 + uv * p1), gamma * p1)
        q -= src_q[:, i]
        p -= src_p[:, i]
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
            bad = int(np.flatnonzero(~(np.isfinite(q) & np.isfinite(p)))[0])
            raise NumericalError(f"particle {bad}: non-finite adjoint at node {i}")
        r[:, i, 0] = q
        r[:, i, 1] = p
    return [AdjointPath(grid=trajectories[j].grid, states=r[j]) for j in range(n)]


def dump_adjoints(adjoints: Sequence[AdjointPath], path) -> None:
    """Debug CSV of adjoint paths: columns (particle, t, q, p)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["particle", "t", "q", "p"])
        for j, adj in enumerate(adjoints):
            for i in range(adj.grid.n_nodes):
                writer.writerow(
                    [
                        j,
                        repr(float(adj.grid.nodes[i])),
                        repr(float(adj.states[i, 0])),
                        repr(float(adj.states[i, 1])),
                    ]
                )
