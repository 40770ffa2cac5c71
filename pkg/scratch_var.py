"""Scratch: gradient Monte Carlo variance halves when N doubles."""
import numpy as np

from jdcontrol import (
    ControlProblem, CostSpec, Dynamics, JumpParams, build_grid, compute_gradient,
    constant_target, zero_control,
)

grid = build_grid(2.0, 2.0, 3, 3)
T, K = 1.0, 5
cf = zero_control(grid, 0.5, T, K).with_mu(
    0.2 * np.random.default_rng(11).standard_normal((9, K)))
dyn = Dynamics(kind="harmonic", eta=1.0, b1=0.2, b2=0.2)
jp = JumpParams(gamma=0.9, beta=10.0)
cost = CostSpec(kind="tracking", sigma_j=0.5, alpha=0.05, desired=constant_target(0.0, 0.0))
sampler = lambda n, r: r.normal([0.75, 0.75], 0.1, size=(n, 2))

R = 96
for n_small in (12,):
    gs, gd = [], []
    for s in range(R):
        for n, out in ((n_small, gs), (2 * n_small, gd)):
            problem = ControlProblem(dynamics=dyn, jumps=jp, cost=cost,
                                     initial_sampler=sampler, n_particles=n,
                                     t_final=T, n_t_u=K)
            g, _, _ = compute_gradient(problem, cf, (5000 + s,))
            out.append(g.ravel())
    vs = np.var(np.array(gs), axis=0).sum()
    vd = np.var(np.array(gd), axis=0).sum()
    print(f"N={n_small}: total var ratio = {vs/vd:.3f}")
