"""Reduced-gradient assembly and stochastic gradient descent with Armijo search.

Each outer iteration draws a fresh noise realization (initial samples, jump
schedules, Brownian increments), computes the exact discrete gradient from
the adjoint ensemble, and backtracks along the negative gradient; every
linesearch trial re-simulates with the iteration's frozen noise so the Armijo
comparison is made on a common realization.
"""

from __future__ import annotations

import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .adjoint import AdjointPath, AdjointSource, EXACT_SOURCE, solve_adjoint, solve_adjoint_coupled
from .control import ControlField
from .cost import CostSpec, quadrature_controls, reduced_objective, _phi_matrix
from .errors import NumericalError
from .forward import Dynamics, TrajectoryRecord, run_ensemble, _cf_interval_per_node
from .jumps import JumpParams
from .rng import as_seed_key, surrogate_rng


@dataclass(frozen=True)
class OptimizerConfig:
    alpha: float
    c_armijo: float = 1e-4
    zeta0: float = 1.0
    backtrack_factor: float = 0.5
    max_backtracks: int = 30
    tol: float = 1e-8
    n_max: int = 50
    n_particles: int = 1000
    master_seed: int = 0

    def __post_init__(self):
        problems = []
        if self.c_armijo <= 0:
            problems.append(f"c_armijo must be positive, got {self.c_armijo}")
        if self.zeta0 <= 0:
            problems.append(f"zeta0 must be positive, got {self.zeta0}")
        if not 0.0 < self.backtrack_factor < 1.0:
            problems.append(f"backtrack_factor must lie in (0, 1), got {self.backtrack_factor}")
        if self.max_backtracks < 0:
            problems.append("max_backtracks must be nonnegative")
        if self.tol < 0:
            problems.append("tol must be nonnegative")
        if self.n_max < 0:
            problems.append("n_max must be nonnegative")
        if self.n_particles < 1:
            problems.append("n_particles must be >= 1")
        if problems:
            raise ValueError("; ".join(problems))


@dataclass(frozen=True)
class IterationReport:
    iteration: int
    objective: float
    grad_norm: float
    zeta: float
    control_change: float

    def as_json(self) -> str:
        return json.dumps(
            {
                "n": self.iteration,
                "objective": self.objective,
                "grad_norm": self.grad_norm,
                "zeta": self.zeta,
                "E": self.control_change,
            },
            sort_keys=True,
        )


@dataclass(frozen=True)
class ControlProblem:
    """Everything the gradient loop needs besides the control iterate."""

    dynamics: Dynamics
    jumps: JumpParams | None
    cost: CostSpec
    initial_sampler: Callable[[int, np.random.Generator], np.ndarray]
    n_particles: int
    t_final: float
    n_t_u: int
    source: AdjointSource = EXACT_SOURCE
    workers: int = 1


def assemble_gradient(
    cf: ControlField,
    trajectories: Sequence[TrajectoryRecord],
    adjoints: Sequence[AdjointPath],
    alpha: float,
) -> np.ndarray:
    """Exact gradient of the discrete objective wrt the control coefficients.

    Per control interval c and basis l, averaged over particles:

    * penalty term: ``dtau * alpha * u_c(z(tau_{k+1})) * phi_l(z(tau_{k+1}))``
      summed over the quadrature intervals k the control interval covers;
    * adjoint term: ``- sum over Euler steps inside c of
      dt_i * phi_l(z(t_i)) * p(t_{i+1})`` with p the adjoint velocity.

    Trajectories and adjoints must be aligned particle-by-particle on the
    same grids.
    """
    if len(trajectories) != len(adjoints):
        raise ValueError("trajectories and adjoints must align one-to-one")
    l_size, k_cf = cf.mu.shape
    grad_t = np.zeros((k_cf, l_size))  # (interval, basis), transposed at the end
    dtau = None
    for rec, adj in zip(trajectories, adjoints):
        grid = rec.grid
        if adj.grid is not grid and not np.array_equal(adj.grid.nodes, grid.nodes):
            raise ValueError("adjoint path grid does not match its trajectory grid")
        dtau = grid.dtau
        cf_idx = _cf_interval_per_node(grid, cf)
        phi = _phi_matrix(cf, rec.states[:, 0], rec.states[:, 1])

        euler_steps = np.flatnonzero(~grid.jump_flags[1:])
        w = grid.step_sizes[euler_steps] * adj.states[euler_steps + 1, 1]
        np.subtract.at(grad_t, cf_idx[euler_steps], phi[euler_steps] * w[:, None])

        if alpha:
            nodes_k = grid.uniform_node_idx[1:]
            cols = quadrature_controls(grid.n_t_u, cf)
            phi_k = phi[nodes_k]
            u = np.einsum("kl,lk->k", phi_k, cf.mu[:, cols])
            np.add.at(grad_t, cols, (dtau * alpha) * u[:, None] * phi_k)
    return grad_t.T / len(trajectories)


def compute_gradient(
    problem: ControlProblem, cf: ControlField, seed_key
) -> tuple[np.ndarray, float, list[TrajectoryRecord]]:
    """One gradient evaluation: fresh ensemble, adjoint solve, assembly."""
    key = as_seed_key(seed_key)
    trajectories = run_ensemble(
        problem.dynamics,
        cf,
        problem.jumps,
        problem.initial_sampler,
        problem.n_particles,
        problem.t_final,
        problem.n_t_u,
        key,
        workers=problem.workers,
    )
    if problem.dynamics.kind == "coupled":
        adjoints = solve_adjoint_coupled(problem.dynamics, cf, problem.cost, trajectories, problem.jumps)
    else:
        def one(j: int) -> AdjointPath:
            rng = surrogate_rng(key, j) if problem.source.mode == "surrogate" else None
            return solve_adjoint(
                problem.dynamics,
                cf,
                problem.cost,
                trajectories[j],
                problem.source,
                rng,
                problem.jumps,
                particle=j,
            )

        if problem.workers <= 1:
            adjoints = [one(j) for j in range(problem.n_particles)]
        else:
            with ThreadPoolExecutor(max_workers=problem.workers) as pool:
                adjoints = list(pool.map(one, range(problem.n_particles)))
    grad = assemble_gradient(cf, trajectories, adjoints, problem.cost.alpha)
    objective = reduced_objective(problem.cost, cf, trajectories)
    return grad, objective, trajectories


def frozen_objective(problem: ControlProblem, seed_key) -> Callable[[ControlField], float]:
    """Objective evaluator that re-simulates with the given noise realization."""
    key = as_seed_key(seed_key)

    def evaluate(cf: ControlField) -> float:
        trajectories = run_ensemble(
            problem.dynamics,
            cf,
            problem.jumps,
            problem.initial_sampler,
            problem.n_particles,
            problem.t_final,
            problem.n_t_u,
            key,
            workers=problem.workers,
        )
        return reduced_objective(problem.cost, cf, trajectories)

    return evaluate


def armijo_search(
    cf: ControlField,
    direction: np.ndarray,
    gradient: np.ndarray,
    objective_eval: Callable[[ControlField], float],
    config: OptimizerConfig,
    j0: float | None = None,
) -> tuple[float, ControlField]:
    """Backtrack from zeta0 until the sufficient-decrease condition holds.

    Returns the largest accepted step among ``zeta0 * rho^k``; if no trial
    satisfies the condition within max_backtracks the smallest trial is
    returned with a warning.
    """
    if j0 is None:
        j0 = objective_eval(cf)
    gnorm2 = float(np.vdot(gradient, gradient))
    zeta = config.zeta0
    trial = cf
    for _ in range(config.max_backtracks + 1):
        trial = cf.with_mu(cf.mu + zeta * direction)
        j_trial = objective_eval(trial)
        if j_trial <= j0 - config.c_armijo * zeta * gnorm2:
            return zeta, trial
        zeta *= config.backtrack_factor
    zeta /= config.backtrack_factor  # last trial actually evaluated
    warnings.warn(
        f"Armijo search exhausted {config.max_backtracks} backtracks;"
        f" taking smallest trial step {zeta:.3e}",
        stacklevel=2,
    )
    return zeta, trial


def optimize(
    problem: ControlProblem,
    cf0: ControlField,
    config: OptimizerConfig,
    on_iteration: Callable[[IterationReport], None] | None = None,
) -> tuple[ControlField, list[IterationReport]]:
    """Gradient descent with per-iteration resampling and Armijo steps.

    Stops when the control change ``E = ||mu_next - mu||`` drops to ``tol``
    or after ``n_max`` iterations.
    """
    cf = cf0
    reports: list[IterationReport] = []
    for n in range(config.n_max):
        key = (config.master_seed, n)
        grad, objective, _ = compute_gradient(problem, cf, key)
        if not np.isfinite(objective) or not np.all(np.isfinite(grad)):
            raise NumericalError(f"iteration {n}: non-finite objective or gradient")
        direction = -grad
        assert float(np.vdot(direction, grad)) <= 0.0
        evaluator = frozen_objective(problem, key)
        zeta, cf_next = armijo_search(cf, direction, grad, evaluator, config, j0=objective)
        change = float(np.linalg.norm(cf_next.mu - cf.mu))
        report = IterationReport(
            iteration=n,
            objective=objective,
            grad_norm=float(np.linalg.norm(grad)),
            zeta=zeta,
            control_change=change,
        )
        reports.append(report)
        if on_iteration is not None:
            on_iteration(report)
        cf = cf_next
        if change <= config.tol:
            break
    return cf, reports
