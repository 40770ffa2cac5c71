"""Experiment orchestration: initial laws, ensemble statistics, runs, checks.

Six named experiments share one config schema: centering from a Gaussian or a
uniform cloud, stabilization with a time-averaged control (no optimization),
tracking a non-smooth ramp, ring-coupled oscillators on an ellipse, and the
trajectory-free (surrogate adjoint) variant of tracking.  Artifacts per run:
the final control CSV, ensemble statistics CSV for the controlled and
uncontrolled forward runs, and a JSON-lines iteration log.
"""

from __future__ import annotations

import io
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .adjoint import AdjointSource, EXACT_SOURCE, estimate_variance_profile, linear_variance_profile
from .config import RunConfig
from .control import ControlField, load_control, save_control, time_average, zero_control
from .cost import CostSpec, constant_target, ramp_target, tabulated_target
from .forward import Dynamics, TrajectoryRecord, dump_trajectories, run_ensemble
from .grid import build_grid
from .jumps import JumpParams
from .optimizer import (
    ControlProblem,
    IterationReport,
    OptimizerConfig,
    compute_gradient,
    frozen_objective,
    optimize,
)

# seed-key tags reserving independent noise realizations
_EVAL_TAG = 982451653  # final forward evaluation
_CHECK_TAG = 735632791  # gradient-check realization
_PROFILE_TAG = 452930477  # variance-profile estimation ensemble


@dataclass(frozen=True)
class InitialLaw:
    """Initial phase-space distribution; kinds mirror the experiments.

    gaussian: isotropic normal around (mean_x, mean_v);
    uniform: product box; bimodal_uniform: two Gaussian modes plus a uniform
    box component with given mixture weights; ellipse: N points equidistant
    in angle on (a_x cos, a_v sin) (deterministic).
    """

    kind: str
    mean: tuple[float, float] = (0.0, 0.0)
    var: float = 0.01
    x_bounds: tuple[float, float] = (-1.0, 1.0)
    v_bounds: tuple[float, float] = (-1.0, 1.0)
    mode1: tuple[float, float] = (1.5, 1.5)
    mode2: tuple[float, float] = (-1.5, -1.5)
    mode_var: float = 0.04
    weights: tuple[float, float, float] = (0.5, 0.2, 0.3)
    a_x: float = 1.5
    a_v: float = 1.7071067811865475


def sample_initial(law: InitialLaw, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n initial states (or place them, for the deterministic ellipse law)."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if law.kind == "gaussian":
        return np.asarray(law.mean) + np.sqrt(law.var) * rng.normal(size=(n, 2))
    if law.kind == "uniform":
        out = np.empty((n, 2))
        out[:, 0] = rng.uniform(law.x_bounds[0], law.x_bounds[1], size=n)
        out[:, 1] = rng.uniform(law.v_bounds[0], law.v_bounds[1], size=n)
        return out
    if law.kind == "bimodal_uniform":
        comp = rng.choice(3, size=n, p=law.weights)
        gauss = rng.normal(size=(n, 2))
        uni = np.empty((n, 2))
        uni[:, 0] = rng.uniform(law.x_bounds[0], law.x_bounds[1], size=n)
        uni[:, 1] = rng.uniform(law.v_bounds[0], law.v_bounds[1], size=n)
        std = np.sqrt(law.mode_var)
        out = np.where(
            (comp == 0)[:, None],
            np.asarray(law.mode1) + std * gauss,
            np.where((comp == 1)[:, None], np.asarray(law.mode2) + std * gauss, uni),
        )
        return out
    if law.kind == "ellipse":
        theta = 2.0 * np.pi * np.arange(n) / n
        return np.column_stack([law.a_x * np.cos(theta), law.a_v * np.sin(theta)])
    raise ValueError(f"unknown initial law {law.kind!r}")


@dataclass(frozen=True)
class EnsembleStats:
    """Per-uniform-node ensemble mean/std plus the optimizer objective trace."""

    t: np.ndarray
    mean_x: np.ndarray
    mean_v: np.ndarray
    std_x: np.ndarray
    std_v: np.ndarray
    objective_trace: list[float] | None = None


def compute_stats(trajectories: Sequence[TrajectoryRecord]) -> EnsembleStats:
    """Ensemble mean and population std of (x, v) at the uniform nodes."""
    if not trajectories:
        raise ValueError("compute_stats needs a nonempty ensemble")
    grid = trajectories[0].grid
    zs = np.stack([rec.uniform_states for rec in trajectories])  # (N, K+1, 2)
    return EnsembleStats(
        t=grid.nodes[grid.uniform_node_idx].copy(),
        mean_x=zs[:, :, 0].mean(axis=0),
        mean_v=zs[:, :, 1].mean(axis=0),
        std_x=zs[:, :, 0].std(axis=0),
        std_v=zs[:, :, 1].std(axis=0),
    )


def save_stats(stats: EnsembleStats, path) -> None:
    buf = io.StringIO()
    buf.write("t,mean_x,mean_v,std_x,std_v\n")
    for i in range(stats.t.size):
        buf.write(
            ",".join(
                repr(float(a))
                for a in (stats.t[i], stats.mean_x[i], stats.mean_v[i], stats.std_x[i], stats.std_v[i])
            )
        )
        buf.write("\n")
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


# -- builders from a validated RunConfig --------------------------------------


def make_initial_law(config: RunConfig) -> InitialLaw:
    if config.law == "gaussian":
        return InitialLaw(kind="gaussian", mean=(config.mean_x, config.mean_v), var=config.var)
    if config.law == "uniform":
        return InitialLaw(
            kind="uniform",
            x_bounds=(config.x_lo, config.x_hi),
            v_bounds=(config.v_lo, config.v_hi),
        )
    if config.law == "bimodal_uniform":
        return InitialLaw(
            kind="bimodal_uniform",
            mode1=(config.mode1_x, config.mode1_v),
            mode2=(config.mode2_x, config.mode2_v),
            mode_var=config.mode_var,
            weights=(config.weight1, config.weight2, config.weight_uniform),
            x_bounds=(-config.x_max, config.x_max),
            v_bounds=(-config.v_max, config.v_max),
        )
    return InitialLaw(kind="ellipse", a_x=config.a_x, a_v=config.a_v)


def make_cost(config: RunConfig) -> CostSpec:
    if config.cost_kind == "ellipse":
        return CostSpec(
            kind="ellipse", sigma_j=config.sigma_j, alpha=config.alpha,
            a_x=config.a_x, a_v=config.a_v,
        )
    if config.desired == "constant":
        desired = constant_target(config.desired_x, config.desired_v)
    elif config.desired == "ramp":
        desired = ramp_target(config.x_max, config.v_max, config.t_final)
    else:
        desired = tabulated_target(np.loadtxt(config.desired_table, delimiter=",", ndmin=2))
    return CostSpec(kind="tracking", sigma_j=config.sigma_j, alpha=config.alpha, desired=desired)


def make_problem(config: RunConfig) -> ControlProblem:
    dyn = Dynamics(kind=config.kind, eta=config.eta, omega=config.omega, b1=config.b1, b2=config.b2)
    jumps = JumpParams(gamma=config.gamma, beta=config.beta)
    cost = make_cost(config)
    law = make_initial_law(config)
    source = EXACT_SOURCE
    if config.adjoint_mode == "surrogate":
        source = AdjointSource(mode="surrogate", variance_profile=_surrogate_profile(config))
    return ControlProblem(
        dynamics=dyn,
        jumps=jumps,
        cost=cost,
        initial_sampler=lambda n, rng: sample_initial(law, n, rng),
        n_particles=config.n_particles,
        t_final=config.t_final,
        n_t_u=config.n_t_u,
        source=source,
        workers=config.workers,
    )


def _surrogate_profile(config: RunConfig):
    if config.surrogate_sigma0 is not None and config.surrogate_slope is not None:
        return linear_variance_profile(config.surrogate_sigma0, config.surrogate_slope)
    # fit the linear variance growth from one uncontrolled forward ensemble
    dyn = Dynamics(kind=config.kind, eta=config.eta, omega=config.omega, b1=config.b1, b2=config.b2)
    law = make_initial_law(config)
    trajectories = run_ensemble(
        dyn,
        zero_control(build_grid(config.x_max, config.v_max, config.n_x, config.n_v),
                     config.eps_phi, config.t_final, config.n_t_u),
        JumpParams(gamma=config.gamma, beta=config.beta),
        lambda n, rng: sample_initial(law, n, rng),
        config.n_particles,
        config.t_final,
        config.n_t_u,
        (config.master_seed, _PROFILE_TAG),
        workers=config.workers,
    )
    return estimate_variance_profile(trajectories)


def make_optimizer_config(config: RunConfig) -> OptimizerConfig:
    return OptimizerConfig(
        alpha=config.alpha,
        c_armijo=config.c_armijo,
        zeta0=config.zeta0,
        backtrack_factor=config.backtrack_factor,
        max_backtracks=config.max_backtracks,
        tol=config.tol,
        n_max=config.n_max,
        n_particles=config.n_particles,
        master_seed=config.master_seed,
    )


def initial_control(config: RunConfig) -> ControlField:
    grid = build_grid(config.x_max, config.v_max, config.n_x, config.n_v)
    return zero_control(grid, config.eps_phi, config.t_final, config.n_t_u)


# -- experiment driver ---------------------------------------------------------


def _forward_stats(
    problem: ControlProblem, cf: ControlField, seed_key, dump_path=None
) -> EnsembleStats:
    trajectories = run_ensemble(
        problem.dynamics,
        cf,
        problem.jumps,
        problem.initial_sampler,
        problem.n_particles,
        problem.t_final,
        problem.n_t_u,
        seed_key,
        workers=problem.workers,
    )
    if dump_path is not None:
        dump_trajectories(trajectories, dump_path)
    return compute_stats(trajectories)


def run_experiment(
    config: RunConfig, log_stream=None
) -> tuple[EnsembleStats, dict[str, Path]]:
    """Execute one experiment and write its artifacts.

    Returns the controlled-run statistics and the paths of everything
    written.  Reruns with the same config and seed are byte-identical.
    """
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    problem = make_problem(config)
    log_stream = log_stream if log_stream is not None else sys.stdout

    reports: list[IterationReport] = []
    if config.experiment == "stabilization":
        # average a previously optimized control; no further optimization
        cf_final = time_average(load_control(config.control_in))
    else:
        cf0 = initial_control(config)
        opt_config = make_optimizer_config(config)

        def on_iteration(report: IterationReport) -> None:
            print(report.as_json(), file=log_stream)

        cf_final, reports = optimize(problem, cf0, opt_config, on_iteration)

    paths = {
        "control": out_dir / "control.csv",
        "stats": out_dir / "stats.csv",
        "stats_uncontrolled": out_dir / "stats_uncontrolled.csv",
        "iterations": out_dir / "iterations.jsonl",
    }
    save_control(cf_final, paths["control"])
    with open(paths["iterations"], "w") as fh:
        for report in reports:
            fh.write(report.as_json())
            fh.write("\n")

    dump_path = out_dir / "trajectories.csv" if config.dump_paths else None
    if dump_path is not None:
        paths["trajectories"] = dump_path
    eval_key = (config.master_seed, _EVAL_TAG)
    stats = _forward_stats(problem, cf_final, eval_key, dump_path)
    stats_unc = _forward_stats(problem, cf_final.zeros_like(), eval_key)
    stats = EnsembleStats(
        t=stats.t,
        mean_x=stats.mean_x,
        mean_v=stats.mean_v,
        std_x=stats.std_x,
        std_v=stats.std_v,
        objective_trace=[r.objective for r in reports],
    )
    save_stats(stats, paths["stats"])
    save_stats(stats_unc, paths["stats_uncontrolled"])
    return stats, paths


# -- finite-difference gradient verification -----------------------------------


def gradient_check(
    config: RunConfig,
    n_directions: int = 20,
    fd_steps: Sequence[float] = (1e-3, 1e-4, 1e-5, 1e-6),
    mu_scale: float = 0.3,
) -> dict:
    """Frozen-noise directional derivatives vs the assembled adjoint gradient.

    Differentiates around a deterministic pseudo-random control iterate (the
    all-zero control is a stationary-ish point of the penalty term and makes
    relative errors meaningless).  For each unit direction the best step of
    the sweep counts; reported is the worst direction.
    """
    problem = make_problem(config)
    cf = initial_control(config)
    mu_rng = np.random.default_rng([config.master_seed, _CHECK_TAG, 0])
    cf = cf.with_mu(mu_scale * mu_rng.standard_normal(cf.mu.shape))

    key = (config.master_seed, _CHECK_TAG)
    grad, objective, _ = compute_gradient(problem, cf, key)
    evaluate = frozen_objective(problem, key)

    dir_rng = np.random.default_rng([config.master_seed, _CHECK_TAG, 1])
    errors = np.empty((n_directions, len(fd_steps)))
    for d in range(n_directions):
        direction = dir_rng.standard_normal(grad.shape)
        direction /= np.linalg.norm(direction)
        proj = float(np.vdot(grad, direction))
        for s, h in enumerate(fd_steps):
            j_plus = evaluate(cf.with_mu(cf.mu + h * direction))
            j_minus = evaluate(cf.with_mu(cf.mu - h * direction))
            fd = (j_plus - j_minus) / (2.0 * h)
            errors[d, s] = abs(proj - fd) / max(abs(fd), 1e-300)
    best_per_dir = errors.min(axis=1)
    worst = int(np.argmax(best_per_dir))
    report = {
        "objective": objective,
        "grad_norm": float(np.linalg.norm(grad)),
        "max_rel_error": float(best_per_dir[worst]),
        "best_step": float(fd_steps[int(np.argmin(errors[worst]))]),
        "errors": errors,
    }
    print(
        f"gradient check: max relative error {report['max_rel_error']:.3e}"
        f" at FD step {report['best_step']:.1e}"
        f" over {n_directions} directions"
    )
    return report
