"""Deterministic RNG stream derivation.

Every stochastic quantity is drawn from a stream keyed by
``(master_seed, iteration, role, index)`` so that results are independent
of execution order and worker count.  Streams are NumPy ``Generator``
objects seeded through ``SeedSequence`` entropy lists.
"""

from __future__ import annotations

import numpy as np

_ROLE_PARTICLE = 0
_ROLE_INITIAL = 1
_ROLE_SURROGATE = 2


def as_seed_key(seed) -> tuple[int, ...]:
    """Normalize an int or tuple of ints into a seed key."""
    if isinstance(seed, (int, np.integer)):
        return (int(seed),)
    return tuple(int(s) for s in seed)


def particle_rng(seed_key, index: int) -> np.random.Generator:
    """Stream owning one particle's jump times, jump noises and increments."""
    return np.random.default_rng(list(as_seed_key(seed_key)) + [_ROLE_PARTICLE, int(index)])


def initial_rng(seed_key) -> np.random.Generator:
    """Stream for sampling the initial particle configuration."""
    return np.random.default_rng(list(as_seed_key(seed_key)) + [_ROLE_INITIAL])


def surrogate_rng(seed_key, index: int) -> np.random.Generator:
    """Stream for one particle's surrogate-mode adjoint samples."""
    return np.random.default_rng(list(as_seed_key(seed_key)) + [_ROLE_SURROGATE, int(index)])
