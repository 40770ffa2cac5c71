"""Monte Carlo optimal control of jump-diffusion particle systems.

Forward Euler-Maruyama simulation with Keilson-Storer velocity jumps,
exact discrete adjoints on the same per-particle time grids, and stochastic
gradient descent with Armijo backtracking over an RBF-parametrized feedback
control.
"""

from ._kernels import BACKEND as kernel_backend
from .adjoint import (
    AdjointPath,
    AdjointSource,
    EXACT_SOURCE,
    adjoint_step_back,
    dump_adjoints,
    estimate_variance_profile,
    jump_transmission,
    linear_variance_profile,
    solve_adjoint,
    solve_adjoint_coupled,
    terminal_condition,
)
from .control import (
    BasisEval,
    ControlField,
    bump,
    bump_derivative,
    eval_basis,
    eval_u,
    load_control,
    save_control,
    time_average,
    zero_control,
)
from .cost import (
    CostSpec,
    DesiredTrajectory,
    constant_target,
    cost_with_control_grad,
    ramp_target,
    reduced_objective,
    running_cost,
    running_cost_grad,
    tabulated_target,
)
from .errors import ConfigError, NumericalError
from .forward import (
    Dynamics,
    TrajectoryRecord,
    drift,
    dump_trajectories,
    euler_maruyama_step,
    integrate_particle,
    run_ensemble,
    simulate_path,
)
from .grid import PhaseGrid, build_grid
from .jumps import (
    JumpParams,
    JumpSchedule,
    apply_jump,
    build_schedule,
    jump_frequency,
    jump_jacobian,
    sample_jump_gap,
)
from .optimizer import (
    ControlProblem,
    IterationReport,
    OptimizerConfig,
    armijo_search,
    assemble_gradient,
    compute_gradient,
    frozen_objective,
    optimize,
)
from .timegrid import TimeGrid, build_time_grid

__version__ = "0.1.0"
