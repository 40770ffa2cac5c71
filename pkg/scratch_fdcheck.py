"""Scratch: FD-vs-adjoint consistency of the full chain (not part of the suite)."""
import numpy as np

from jdcontrol import (
    ControlProblem, CostSpec, Dynamics, JumpParams, OptimizerConfig,
    build_grid, compute_gradient, constant_target, frozen_objective, zero_control,
)

rng = np.random.default_rng(7)

grid = build_grid(2.0, 2.0, 4, 4)
T, K = 2.0, 10
cf = zero_control(grid, 0.5, T, K)
cf = cf.with_mu(0.3 * rng.standard_normal(cf.mu.shape))

dyn = Dynamics(kind="harmonic", eta=1.0, b1=0.2, b2=0.2)
jp = JumpParams(gamma=0.9, beta=10.0)
cost = CostSpec(kind="tracking", sigma_j=0.5, alpha=0.05, desired=constant_target(0.0, 0.0))


def sampler(n, r):
    return r.normal([0.75, 0.75], 0.1, size=(n, 2))


problem = ControlProblem(
    dynamics=dyn, jumps=jp, cost=cost, initial_sampler=sampler,
    n_particles=20, t_final=T, n_t_u=K,
)

key = (1234, 0)
g, j0, trajs = compute_gradient(problem, cf, key)
print("objective:", j0, " |g| =", np.linalg.norm(g))

f = frozen_objective(problem, key)
assert abs(f(cf) - j0) < 1e-14, (f(cf), j0)

worst = 0.0
for d in range(8):
    direction = rng.standard_normal(g.shape)
    direction /= np.linalg.norm(direction)
    derr = []
    for h in (1e-3, 1e-4, 1e-5, 1e-6):
        jp_ = f(cf.with_mu(cf.mu + h * direction))
        jm_ = f(cf.with_mu(cf.mu - h * direction))
        fd = (jp_ - jm_) / (2 * h)
        ad = float(np.vdot(g, direction))
        derr.append(abs(ad - fd) / max(abs(fd), 1e-300))
    best = min(derr)
    worst = max(worst, best)
    print(f"dir {d}: best rel err {best:.3e}  (per step: {[f'{e:.1e}' for e in derr]})")
print("WORST best-step rel err:", worst)
assert worst < 1e-6, worst
print("OK")
