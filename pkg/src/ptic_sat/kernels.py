"""Local-update kernels and the episode runner.

Random streams are numpy ``Generator`` objects over the Philox-4x64
counter-based bit generator.  A stream is keyed by ``(seed, *key)`` through
``SeedSequence(entropy=seed, spawn_key=key)``, so the stream a replica sees
depends only on its key and never on execution order.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass

import numpy as np

from . import _engine
from .cnf import SearchState

Rng = np.random.Generator


class KernelKind(enum.Enum):
    WALKSAT = "walksat"
    METROPOLIS_HASTINGS = "mh"

    @property
    def code(self) -> int:
        return _engine.WALKSAT if self is KernelKind.WALKSAT else _engine.METROPOLIS


def _key_int(part) -> int:
    if isinstance(part, (int, np.integer)) and not isinstance(part, bool):
        if part < 0:
            raise ValueError("stream key parts must be non-negative")
        return int(part)
    digest = hashlib.sha256(str(part).encode()).digest()
    return int.from_bytes(digest[:8], "little")


def make_rng(seed: int, *key) -> Rng:
    """Independent Philox stream for ``(seed, *key)``.

    Key parts may be non-negative ints or strings (hashed with SHA-256).
    """
    ss = np.random.SeedSequence(entropy=_key_int(seed), spawn_key=tuple(_key_int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *key) -> int:
    """Collapse ``(seed, *key)`` into a single 64-bit seed."""
    ss = np.random.SeedSequence(entropy=_key_int(seed), spawn_key=tuple(_key_int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def random_assignment(rng: Rng, num_vars: int) -> np.ndarray:
    return rng.integers(0, 2, size=num_vars, dtype=np.uint8)


@dataclass(frozen=True)
class EpisodeOutcome:
    steps_taken: int
    solved: bool
    final_energy: int


def walksat_step(state: SearchState, eta: float, rng: Rng) -> int:
    """One WalkSAT move; returns the flipped (1-based) variable.

    A violated clause is picked uniformly.  With probability ``eta`` a
    uniformly random variable of the clause is flipped, otherwise the first
    variable (in clause order) with minimum break value.  The coin is tossed
    even when the minimum break is 0.
    """
    if state.energy == 0:
        raise ValueError("walksat_step needs at least one violated clause")
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"walk probability must lie in [0, 1], got {eta}")
    return int(_engine.walksat_step(float(eta), rng, state.formula.arrays, state.arrays)) + 1


def mh_step(state: SearchState, temperature: float, rng: Rng) -> bool:
    """Single-variable Metropolis update; returns whether the flip was kept."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    return bool(_engine.mh_step(float(temperature), rng, state.formula.arrays, state.arrays))


def run_episode(
    state: SearchState, kernel: KernelKind, temperature: float, budget: int, rng: Rng
) -> EpisodeOutcome:
    """Apply kernel steps until the state is satisfied or ``budget`` steps ran.

    For the WalkSAT kernel ``temperature`` is the walk probability.
    """
    if budget < 1:
        raise ValueError("episode budget must be >= 1")
    if kernel is KernelKind.WALKSAT:
        if not 0.0 <= temperature <= 1.0:
            raise ValueError(f"walk probability must lie in [0, 1], got {temperature}")
    elif temperature <= 0:
        raise ValueError("temperature must be positive")
    q = _engine.run_episode(
        kernel.code, float(temperature), int(budget), rng, state.formula.arrays, state.arrays
    )
    energy = state.energy
    return EpisodeOutcome(int(q), energy == 0, energy)
