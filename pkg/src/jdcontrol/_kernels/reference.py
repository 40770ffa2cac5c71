"""NumPy reference implementations of the sequential time-stepping kernels.

The compiled module ``jdcontrol._kernels._fast`` mirrors these signatures
exactly; which one backs the package is decided at import time in
``jdcontrol._kernels``.  Only the per-particle sweeps live here: they are
sequential in time (the control feeds the state back into the drift), so they
cannot be vectorized across nodes.  Everything vectorizable across particles
or basis functions stays in plain NumPy in the calling modules.
"""

from __future__ import annotations

import math

import numpy as np

KIND_FREE = 0
KIND_HARMONIC = 1


def _axis_bumps(y: float, centers: np.ndarray, eps: float) -> np.ndarray:
    d = y - centers
    s2 = (eps * d) ** 2
    inside = s2 < 1.0
    w = np.where(inside, 1.0 - s2, 1.0)
    return np.where(inside, np.exp(-1.0 / w), 0.0)


def forward_sweep(
    dts: np.ndarray,
    jump_mask: np.ndarray,
    jump_noise: np.ndarray,
    cf_interval: np.ndarray,
    mu3: np.ndarray,
    xc: np.ndarray,
    vc: np.ndarray,
    eps: float,
    kind: int,
    eta: float,
    gamma: float,
    b1: float,
    b2: float,
    dbx: np.ndarray,
    dbv: np.ndarray,
    x0: float,
    v0: float,
    out_states: np.ndarray,
) -> int:
    """March one particle across its union grid.

    Node i+1 is either a jump node (state replaced by the jump map of node i,
    no drift over that sub-step) or an Euler-Maruyama update using the control
    interval of node i.  Returns -1 on success, else the index of the first
    non-finite node.
    """
    x = float(x0)
    v = float(v0)
    out_states[0, 0] = x
    out_states[0, 1] = v
    n_steps = dts.shape[0]
    for i in range(n_steps):
        if jump_mask[i + 1]:
            v = gamma * v + jump_noise[i + 1]
        else:
            bx = _axis_bumps(x, xc, eps)
            bv = _axis_bumps(v, vc, eps)
            u = float(bx @ mu3[:, :, cf_interval[i]] @ bv)
            fv = -eta * x if kind == KIND_HARMONIC else 0.0
            dt = dts[i]
            x_new = x + v * dt + b1 * dbx[i]
            v = v + (u + fv) * dt + b2 * dbv[i]
            x = x_new
        if not (math.isfinite(x) and math.isfinite(v)):
            return i + 1
        out_states[i + 1, 0] = x
        out_states[i + 1, 1] = v
    return -1


def adjoint_recursion(
    dts: np.ndarray,
    jump_mask: np.ndarray,
    gamma: float,
    coeff_qx: np.ndarray,
    coeff_uv: np.ndarray,
    src_q: np.ndarray,
    src_p: np.ndarray,
    out_r: np.ndarray,
) -> int:
    """Backward affine recursion for one particle's adjoint pair (q, p).

    ``coeff_qx[i]`` is the x-derivative of the velocity drift at node i
    (u_x plus the dynamics Jacobian entry) and ``coeff_uv[i]`` its v-derivative;
    ``src_q/src_p`` carry the already-weighted cost sources per node (zero off
    the uniform quadrature nodes).  Crossing a jump node applies the transposed
    jump Jacobian diag(1, gamma).  Returns -1 on success, else the first
    non-finite node index.
    """
    m1 = out_r.shape[0]
    q = -src_q[m1 - 1]
    p = -src_p[m1 - 1]
    out_r[m1 - 1, 0] = q
    out_r[m1 - 1, 1] = p
    for i in range(m1 - 2, -1, -1):
        q1 = out_r[i + 1, 0]
        p1 = out_r[i + 1, 1]
        if jump_mask[i + 1]:
            q = q1
            p = gamma * p1
        else:
            dt = dts[i]
            q = q1 + dt * (coeff_qx[i] * p1)
            p = p1 + dt * (q1 + coeff_uv[i] * p1)
        q -= src_q[i]
        p -= src_p[i]
        if not (math.isfinite(q) and math.isfinite(p)):
            return i
        out_r[i, 0] = q
        out_r[i, 1] = p
    return -1
