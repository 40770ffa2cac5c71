"""Per-particle union time grids: uniform control nodes merged with jump times."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .jumps import JumpSchedule

#: jump times closer than this (relative to T) to an existing node are merged
MERGE_TOL = 1e-12


@dataclass(frozen=True)
class TimeGrid:
    """Sorted union of the uniform grid {k*dtau} and one particle's jump times.

    ``jump_flags[i]`` marks node i as a jump time and ``jump_noise[i]`` carries
    the velocity noise applied there (0 elsewhere).  ``uniform_node_idx[k]`` is
    the node index of ``k*dtau``; every uniform node is a grid node exactly.
    ``interval_idx[i]`` is the uniform interval containing node i (left-closed;
    the terminal node maps to the last interval).
    """

    nodes: np.ndarray
    jump_flags: np.ndarray
    jump_noise: np.ndarray
    step_sizes: np.ndarray
    uniform_node_idx: np.ndarray
    interval_idx: np.ndarray
    t_final: float
    n_t_u: int

    @property
    def n_nodes(self) -> int:
        return self.nodes.size

    @property
    def dtau(self) -> float:
        return self.t_final / self.n_t_u

    def state_index_at(self, t) -> np.ndarray:
        """Index of the greatest node <= t (piecewise-constant path lookup)."""
        idx = np.searchsorted(self.nodes, np.asarray(t, dtype=float), side="right") - 1
        return np.clip(idx, 0, self.n_nodes - 1)


def build_time_grid(t_final: float, n_t_u: int, schedule: JumpSchedule | None = None) -> TimeGrid:
    """Merge the uniform grid with a jump schedule into one sorted node list.

    Jump times within ``MERGE_TOL * t_final`` of a uniform node are merged onto
    that node (which keeps its exact time and is flagged as a jump); duplicates
    among jump times collapse to the first occurrence.
    """
    if n_t_u < 1:
        raise ValueError(f"n_t_u must be >= 1, got {n_t_u}")
    if t_final <= 0:
        raise ValueError(f"t_final must be positive, got {t_final}")
    k = int(n_t_u)
    dtau = t_final / k
    uniform = np.arange(k + 1) * dtau
    uniform[-1] = t_final  # guard against k*dtau != t_final by one ulp
    tol = MERGE_TOL * t_final

    times = [] if schedule is None else list(schedule.times)
    noises = [] if schedule is None else list(schedule.noises)

    extra_t, extra_noise, extra_interval = [], [], []
    merged_noise = np.zeros(k + 1)
    merged_flag = np.zeros(k + 1, dtype=bool)
    for t, noise in zip(times, noises):
        near = int(round(t / dtau))
        if 0 <= near <= k and abs(t - uniform[near]) <= tol:
            if near == 0:
                # a jump cannot precede the initial condition; keep it as the
                # earliest interior node instead
                extra_t.append(max(t, tol))
                extra_noise.append(noise)
                extra_interval.append(0)
            elif not merged_flag[near]:
                merged_flag[near] = True
                merged_noise[near] = noise
        else:
            if extra_t and abs(t - extra_t[-1]) <= tol:
                continue  # near-coincident jump times collapse to the first
            extra_t.append(t)
            extra_noise.append(noise)
            extra_interval.append(min(int(np.searchsorted(uniform, t, side="right")) - 1, k - 1))

    n_extra = len(extra_t)
    nodes = np.concatenate([uniform, np.asarray(extra_t)]) if n_extra else uniform.copy()
    flags = np.concatenate([merged_flag, np.ones(n_extra, dtype=bool)])
    noise = np.concatenate([merged_noise, np.asarray(extra_noise)])
    interval = np.concatenate(
        [np.minimum(np.arange(k + 1), k - 1), np.asarray(extra_interval, dtype=np.int64)]
    )
    order = np.argsort(nodes, kind="stable")
    nodes = nodes[order]
    flags = flags[order]
    noise = noise[order]
    interval = interval[order].astype(np.int64)

    steps = np.diff(nodes)
    if steps.size and not np.all(steps > 0):
        raise ValueError("time grid has a non-positive step after merging")

    uniform_idx = np.searchsorted(nodes, uniform)
    for arr in (nodes, flags, noise, steps, uniform_idx, interval):
        arr.setflags(write=False)
    return TimeGrid(
        nodes=nodes,
        jump_flags=flags,
        jump_noise=noise,
        step_sizes=steps,
        uniform_node_idx=uniform_idx,
        interval_idx=interval,
        t_final=float(t_final),
        n_t_u=k,
    )
