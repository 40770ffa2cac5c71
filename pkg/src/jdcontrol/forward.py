"""Forward integration of the controlled jump-diffusion particle system.

Between jump times the state advances with Euler-Maruyama on the union grid;
at a jump node the state is replaced by the jump map of the previous node
(no drift over that sub-step) and integration resumes from the post-jump
state.  Uncoupled particles evolve independently on their own grids; ring-
coupled ensembles march together on the shared union of all jump times so
that neighbour positions are available at every node.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from .control import ControlField, eval_u
from .errors import NumericalError
from .jumps import EMPTY_SCHEDULE, JumpParams, JumpSchedule, build_schedule
from .rng import as_seed_key, initial_rng, particle_rng
from .timegrid import MERGE_TOL, TimeGrid, build_time_grid

_KIND_CODE = {"free": _kernels.KIND_FREE, "harmonic": _kernels.KIND_HARMONIC}


@dataclass(frozen=True)
class Dynamics:
    """Drift/diffusion structure of the particle model.

    kinds: ``free`` (no restoring force), ``harmonic`` (Hook force ``-eta*x``),
    ``coupled`` (harmonic plus ring nearest-neighbour springs of strength
    ``omega``).  ``b1``/``b2`` are the constant position/velocity diffusion
    coefficients.  An optional smooth extra drift ``h(x, v, t) -> (hx, hv)``
    is supported for the uncoupled kinds; supplying it requires ``h_jac``
    (its 2x2 Jacobian) for the adjoint.
    """

    kind: str
    eta: float = 0.0
    omega: float = 0.0
    b1: float = 0.0
    b2: float = 0.0
    h: Callable[[float, float, float], tuple[float, float]] | None = None
    h_jac: Callable[[float, float, float], np.ndarray] | None = None

    def __post_init__(self):
        if self.kind not in ("free", "harmonic", "coupled"):
            raise ValueError(f"unknown dynamics kind {self.kind!r}")
        for name in ("eta", "omega", "b1", "b2"):
            val = getattr(self, name)
            if not np.isfinite(val):
                raise ValueError(f"{name} must be finite, got {val}")
        if self.b1 < 0 or self.b2 < 0:
            raise ValueError("diffusion coefficients must be nonnegative")
        if self.h is not None:
            if self.h_jac is None:
                raise ValueError("a nonlinear drift h requires its Jacobian h_jac")
            if self.kind == "coupled":
                raise ValueError("nonlinear drift h is not supported for coupled dynamics")


def drift(
    dyn: Dynamics,
    x: float,
    v: float,
    u: float,
    t: float = 0.0,
    ensemble_positions: np.ndarray | None = None,
    index: int | None = None,
) -> tuple[float, float]:
    """Deterministic drift (dx/dt, dv/dt) at one phase point.

    Coupled dynamics need the full position vector and the particle index to
    resolve the ring neighbours.
    """
    ax = v
    if dyn.kind == "free":
        av = u
    elif dyn.kind == "harmonic":
        av = u - dyn.eta * x
    else:
        if ensemble_positions is None or index is None:
            raise ValueError("coupled drift requires ensemble_positions and index")
        pos = np.asarray(ensemble_positions, dtype=float)
        n = pos.size
        left = pos[(index - 1) % n]
        right = pos[(index + 1) % n]
        av = u - dyn.eta * x - dyn.omega * (2.0 * x - left - right)
    if dyn.h is not None:
        hx, hv = dyn.h(x, v, t)
        ax += hx
        av += hv
    return ax, av


def euler_maruyama_step(
    dyn: Dynamics,
    state: tuple[float, float],
    u: float,
    dt: float,
    dbx: float,
    dbv: float,
    t: float = 0.0,
    ensemble_positions: np.ndarray | None = None,
    index: int | None = None,
) -> tuple[float, float]:
    """One Euler-Maruyama update of (x, v) with Brownian increments dbx, dbv."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    x, v = state
    ax, av = drift(dyn, x, v, u, t, ensemble_positions, index)
    return x + ax * dt + dyn.b1 * dbx, v + av * dt + dyn.b2 * dbv


@dataclass(frozen=True)
class TrajectoryRecord:
    """One particle's forward path with the noise that produced it."""

    grid: TimeGrid
    states: np.ndarray
    brownian_increments: np.ndarray
    schedule: JumpSchedule

    def state_at(self, t) -> np.ndarray:
        """Piecewise-constant path value: the state at the greatest node <= t."""
        return self.states[self.grid.state_index_at(t)]

    @property
    def uniform_states(self) -> np.ndarray:
        """States at the uniform nodes tau^0 .. tau^K."""
        return self.states[self.grid.uniform_node_idx]


def _cf_interval_per_node(grid: TimeGrid, cf: ControlField) -> np.ndarray:
    """Map each node's uniform interval to the control's own interval index.

    Requires the simulation grid count to be a multiple of the control's, so
    that control boundaries are grid nodes (the grid-containment invariant).
    """
    if grid.t_final != cf.t_final:
        raise ValueError(
            f"control horizon {cf.t_final} != simulation horizon {grid.t_final}"
        )
    if grid.n_t_u % cf.n_t_u:
        raise ValueError(
            f"simulation grid ({grid.n_t_u} intervals) must be a multiple of the"
            f" control grid ({cf.n_t_u} intervals)"
        )
    if grid.n_t_u == cf.n_t_u:
        return grid.interval_idx
    return (grid.interval_idx * cf.n_t_u) // grid.n_t_u


def simulate_path(
    dyn: Dynamics,
    cf: ControlField,
    grid: TimeGrid,
    initial: tuple[float, float],
    increments: np.ndarray,
    schedule: JumpSchedule | None = None,
    gamma: float = 0.0,
    particle: int = 0,
) -> TrajectoryRecord:
    """Deterministic forward sweep given explicit Brownian increments.

    ``increments`` has shape (n_steps, 2); jump noises are carried by the
    grid.  This is the noise-injection entry point shared by the seeded
    integrators and by self-convergence studies that construct increments
    from a common refined Brownian path.
    """
    if dyn.kind == "coupled":
        raise ValueError("coupled dynamics integrate at ensemble level; use run_ensemble")
    increments = np.ascontiguousarray(increments, dtype=float)
    if increments.shape != (grid.n_nodes - 1, 2):
        raise ValueError(
            f"increments must have shape ({grid.n_nodes - 1}, 2), got {increments.shape}"
        )
    states = np.empty((grid.n_nodes, 2))
    if dyn.h is not None:
        bad = _sweep_with_h(dyn, cf, grid, initial, increments, gamma, states)
    else:
        bad = _kernels.forward_sweep(
            grid.step_sizes,
            grid.jump_flags.astype(np.uint8),
            grid.jump_noise,
            _cf_interval_per_node(grid, cf),
            cf.mu3,
            cf.grid.centers_x,
            cf.grid.centers_v,
            cf.eps_phi,
            _KIND_CODE[dyn.kind],
            dyn.eta,
            gamma,
            dyn.b1,
            dyn.b2,
            np.ascontiguousarray(increments[:, 0]),
            np.ascontiguousarray(increments[:, 1]),
            float(initial[0]),
            float(initial[1]),
            states,
        )
    if bad >= 0:
        raise NumericalError(
            f"particle {particle}: non-finite state at node {bad}"
            f" (t = {grid.nodes[bad]:.6g})"
        )
    return TrajectoryRecord(
        grid=grid,
        states=states,
        brownian_increments=increments,
        schedule=schedule if schedule is not None else EMPTY_SCHEDULE,
    )


def _sweep_with_h(dyn, cf, grid, initial, increments, gamma, states) -> int:
    # python path for the optional nonlinear drift; mirrors the kernel
    cf_idx = _cf_interval_per_node(grid, cf)
    x, v = float(initial[0]), float(initial[1])
    states[0] = (x, v)
    for i in range(grid.n_nodes - 1):
        if grid.jump_flags[i + 1]:
            v = gamma * v + grid.jump_noise[i + 1]
        else:
            t = grid.nodes[i]
            u = _u_value(cf, x, v, cf_idx[i])
            x, v = euler_maruyama_step(
                dyn, (x, v), u, grid.step_sizes[i], increments[i, 0], increments[i, 1], t
            )
        if not (np.isfinite(x) and np.isfinite(v)):
            return i + 1
        states[i + 1] = (x, v)
    return -1


def _u_value(cf: ControlField, x: float, v: float, interval: int) -> float:
    from .control import bump

    bx = bump(x, cf.grid.centers_x, cf.eps_phi)
    bv = bump(v, cf.grid.centers_v, cf.eps_phi)
    return float(bx @ cf.mu3[:, :, interval] @ bv)


def integrate_particle(
    dyn: Dynamics,
    cf: ControlField,
    grid: TimeGrid,
    initial: tuple[float, float],
    rng: np.random.Generator,
    params: JumpParams | None = None,
    schedule: JumpSchedule | None = None,
    particle: int = 0,
) -> TrajectoryRecord:
    """Integrate one particle, drawing its Brownian increments from ``rng``."""
    if not np.all(np.isfinite(initial)):
        raise ValueError(f"initial state must be finite, got {initial}")
    n_steps = grid.n_nodes - 1
    increments = rng.normal(size=(n_steps, 2)) * np.sqrt(grid.step_sizes)[:, None]
    gamma = params.gamma if params is not None else 0.0
    return simulate_path(dyn, cf, grid, initial, increments, schedule, gamma, particle)


def run_ensemble(
    dyn: Dynamics,
    cf: ControlField,
    params: JumpParams | None,
    initial_sampler: Callable[[int, np.random.Generator], np.ndarray],
    n_particles: int,
    t_final: float,
    n_t_u: int,
    master_seed,
    workers: int = 1,
) -> list[TrajectoryRecord]:
    """Simulate N independent realizations (one per particle).

    Per-particle RNG streams derive from (seed key, particle index), so the
    result is bit-identical for any worker count; records are returned in
    particle-index order.
    """
    if n_particles < 1:
        raise ValueError(f"n_particles must be >= 1, got {n_particles}")
    key = as_seed_key(master_seed)
    z0 = np.asarray(initial_sampler(n_particles, initial_rng(key)), dtype=float)
    if z0.shape != (n_particles, 2):
        raise ValueError(f"initial sampler must return shape ({n_particles}, 2), got {z0.shape}")

    if dyn.kind == "coupled":
        if n_particles < 2:
            raise ValueError("coupled dynamics require at least 2 particles")
        return _run_coupled(dyn, cf, params, z0, t_final, n_t_u, key)

    def one(j: int) -> TrajectoryRecord:
        rng = particle_rng(key, j)
        schedule = (
            build_schedule(params, t_final, rng) if params is not None else EMPTY_SCHEDULE
        )
        grid = build_time_grid(t_final, n_t_u, schedule)
        return integrate_particle(dyn, cf, grid, z0[j], rng, params, schedule, particle=j)

    if workers <= 1:
        return [one(j) for j in range(n_particles)]
    out: list[TrajectoryRecord | None] = [None] * n_particles
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for j, rec in zip(range(n_particles), pool.map(one, range(n_particles))):
            out[j] = rec
    return out  # type: ignore[return-value]


# -- coupled ensembles: one shared union grid ---------------------------------


def build_shared_time_grids(
    t_final: float, n_t_u: int, schedules: Sequence[JumpSchedule]
) -> list[TimeGrid]:
    """Per-particle grids over the union of every particle's jump times.

    All returned grids share one node array; flags and noises are per
    particle.  Needed by coupled dynamics, where each particle's drift reads
    its neighbours' positions at every node.
    """
    n = len(schedules)
    k = int(n_t_u)
    dtau = t_final / k
    uniform = np.arange(k + 1) * dtau
    uniform[-1] = t_final
    tol = MERGE_TOL * t_final

    # events: (time, particle, noise); classify against the uniform grid
    merged: list[tuple[int, int, float]] = []  # (uniform node, particle, noise)
    extra: list[tuple[float, int, float]] = []
    for j, sched in enumerate(schedules):
        for t, noise in zip(sched.times, sched.noises):
            near = int(round(t / dtau))
            if 0 < near <= k and abs(t - uniform[near]) <= tol:
                merged.append((near, j, noise))
            else:
                extra.append((max(t, tol), j, noise))
    extra.sort()
    extra_times: list[float] = []
    extra_events: list[tuple[int, int, float]] = []  # (extra idx, particle, noise)
    for t, j, noise in extra:
        if not extra_times or t - extra_times[-1] > tol:
            extra_times.append(t)
        extra_events.append((len(extra_times) - 1, j, noise))

    nodes = np.concatenate([uniform, np.asarray(extra_times)]) if extra_times else uniform.copy()
    order = np.argsort(nodes, kind="stable")
    nodes = nodes[order]
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    uniform_idx = rank[: k + 1]
    extra_idx = rank[k + 1 :]

    m1 = nodes.size
    flags = np.zeros((n, m1), dtype=bool)
    noise_arr = np.zeros((n, m1))
    for near, j, noise in merged:
        node = uniform_idx[near]
        if not flags[j, node]:
            flags[j, node] = True
            noise_arr[j, node] = noise
    for e, j, noise in extra_events:
        node = extra_idx[e]
        if not flags[j, node]:
            flags[j, node] = True
            noise_arr[j, node] = noise

    steps = np.diff(nodes)
    if steps.size and not np.all(steps > 0):
        raise ValueError("shared time grid has a non-positive step after merging")
    interval = np.minimum(np.searchsorted(uniform, nodes, side="right") - 1, k - 1)
    interval = np.maximum(interval, 0).astype(np.int64)

    nodes.setflags(write=False)
    steps.setflags(write=False)
    uniform_idx = np.ascontiguousarray(uniform_idx)
    uniform_idx.setflags(write=False)
    interval.setflags(write=False)
    grids = []
    for j in range(n):
        fj = flags[j].copy()
        nj = noise_arr[j].copy()
        fj.setflags(write=False)
        nj.setflags(write=False)
        grids.append(
            TimeGrid(
                nodes=nodes,
                jump_flags=fj,
                jump_noise=nj,
                step_sizes=steps,
                uniform_node_idx=uniform_idx,
                interval_idx=interval,
                t_final=float(t_final),
                n_t_u=k,
            )
        )
    return grids


def _axis_bumps_many(y: np.ndarray, centers: np.ndarray, eps: float) -> np.ndarray:
    d = y[:, None] - centers[None, :]
    s2 = (eps * d) ** 2
    inside = s2 < 1.0
    w = np.where(inside, 1.0 - s2, 1.0)
    return np.where(inside, np.exp(-1.0 / w), 0.0)


def _run_coupled(dyn, cf, params, z0, t_final, n_t_u, key) -> list[TrajectoryRecord]:
    n = z0.shape[0]
    gamma = params.gamma if params is not None else 0.0
    rngs = [particle_rng(key, j) for j in range(n)]
    schedules = [
        build_schedule(params, t_final, rngs[j]) if params is not None else EMPTY_SCHEDULE
        for j in range(n)
    ]
    grids = build_shared_time_grids(t_final, n_t_u, schedules)
    grid0 = grids[0]
    m = grid0.n_nodes - 1
    sqrt_dt = np.sqrt(grid0.step_sizes)
    increments = np.empty((n, m, 2))
    for j in range(n):
        increments[j] = rngs[j].normal(size=(m, 2)) * sqrt_dt[:, None]

    flags = np.stack([g.jump_flags for g in grids])
    noises = np.stack([g.jump_noise for g in grids])
    cf_idx = _cf_interval_per_node(grid0, cf)
    mu3 = cf.mu3
    xc, vc, eps = cf.grid.centers_x, cf.grid.centers_v, cf.eps_phi

    states = np.empty((n, m + 1, 2))
    x = z0[:, 0].copy()
    v = z0[:, 1].copy()
    states[:, 0, 0] = x
    states[:, 0, 1] = v
    for i in range(m):
        jf = flags[:, i + 1]
        keep = ~jf
        bx = _axis_bumps_many(x, xc, eps)
        bv = _axis_bumps_many(v, vc, eps)
        u = np.einsum("ni,il,nl->n", bx, mu3[:, :, cf_idx[i]], bv)
        coup = 2.0 * x - np.roll(x, 1) - np.roll(x, -1)
        av = u - dyn.eta * x - dyn.omega * coup
        dt = grid0.step_sizes[i]
        x_new = np.where(keep, x + v * dt + dyn.b1 * increments[:, i, 0], x)
        v = np.where(keep, v + av * dt + dyn.b2 * increments[:, i, 1], gamma * v + noises[:, i + 1])
        x = x_new
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
            bad = int(np.flatnonzero(~(np.isfinite(x) & np.isfinite(v)))[0])
            raise NumericalError(
                f"particle {bad}: non-finite state at node {i + 1}"
                f" (t = {grid0.nodes[i + 1]:.6g})"
            )
        states[:, i + 1, 0] = x
        states[:, i + 1, 1] = v

    return [
        TrajectoryRecord(
            grid=grids[j],
            states=states[j],
            brownian_increments=increments[j],
            schedule=schedules[j],
        )
        for j in range(n)
    ]


def dump_trajectories(trajectories: Sequence[TrajectoryRecord], path) -> None:
    """Debug CSV of all paths: columns (particle, t, x, v, is_jump)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["particle", "t", "x", "v", "is_jump"])
        for j, rec in enumerate(trajectories):
            for i in range(rec.grid.n_nodes):
                writer.writerow(
                    [
                        j,
                        repr(float(rec.grid.nodes[i])),
                        repr(float(rec.states[i, 0])),
                        repr(float(rec.states[i, 1])),
                        int(rec.grid.jump_flags[i]),
                    ]
                )
