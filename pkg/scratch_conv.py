"""Scratch: self-convergence slope of the piecewise-constant paths."""
import numpy as np

from jdcontrol import Dynamics, JumpParams, build_grid, build_time_grid, simulate_path, zero_control
from jdcontrol.jumps import build_schedule
from jdcontrol.rng import particle_rng


def mse_pairs(levels, k_master, t_final, n_particles, seed, dyn, jp):
    grid_template = build_grid(2.0, 2.0, 2, 2)
    cf = zero_control(grid_template, 0.5, t_final, 1)
    eval_times = np.arange(1, k_master + 1) * (t_final / k_master)
    mses = {k: 0.0 for k in levels}
    for j in range(n_particles):
        rng = particle_rng((seed,), j)
        schedule = build_schedule(jp, t_final, rng)
        master = build_time_grid(t_final, k_master, schedule)
        n_steps = master.n_nodes - 1
        db = rng.normal(size=(n_steps, 2)) * np.sqrt(master.step_sizes)[:, None]
        b_path = np.vstack([np.zeros(2), np.cumsum(db, axis=0)])

        def level_increments(grid):
            idx = np.searchsorted(master.nodes, grid.nodes)
            assert np.array_equal(master.nodes[idx], grid.nodes)
            return b_path[idx[1:]] - b_path[idx[:-1]]

        sols = {}
        for k in set(levels) | {2 * k for k in levels}:
            g = build_time_grid(t_final, k, schedule)
            rec = simulate_path(dyn, cf, g, (0.3, 0.0), level_increments(g), schedule, jp.gamma)
            sols[k] = rec.state_at(eval_times)
        for k in levels:
            mses[k] += np.mean(np.sum((sols[k] - sols[2 * k]) ** 2, axis=1))
    return {k: v / n_particles for k, v in mses.items()}


dyn = Dynamics(kind="harmonic", eta=1.0, b1=1.0, b2=1.0)
jp = JumpParams(gamma=0.9, beta=10.0)
levels = [16, 32, 64]
for seed in (2024, 7, 99):
    mses = mse_pairs(levels, 256, 2.0, 1000, seed, dyn, jp)
    dts = np.log([2.0 / k for k in levels])
    slope = np.polyfit(dts, np.log([mses[k] for k in levels]), 1)[0]
    print(f"seed {seed}: MSEs {[f'{mses[k]:.4e}' for k in levels]}, slope {slope:.3f}")
