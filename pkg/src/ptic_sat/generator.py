"""Seeded planted random k-SAT instances.

Each clause draws ``k`` distinct variables uniformly and each polarity by a
fair coin; clauses violated by the planted assignment are rejected, as are
repeats of an already emitted clause (compared as sorted literal sets).
An optional weight table tilts acceptance by the number of literals the
planted assignment satisfies.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cnf import Formula, as_assignment, write_dimacs
from .kernels import make_rng

PRESETS = {
    "group-2": (100, 1000, 4),
    "group-3": (50, 2200, 6),
    "group-4": (50, 4500, 7),
}


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class PlantedSpec:
    n: int
    m: int
    k: int
    seed: int
    planted: tuple[int, ...] | None = None
    # weights[j] for j = 1..k satisfied literals; index 0 unused
    weights: tuple[float, ...] | None = field(default=None)

    def __post_init__(self):
        if self.n < 1 or self.m < 1 or self.k < 1:
            raise ValueError("n, m and k must be >= 1")
        if self.k > self.n:
            raise ValueError(f"k={self.k} exceeds n={self.n}")
        if self.planted is not None:
            object.__setattr__(self, "planted", tuple(int(x) for x in as_assignment(self.planted, self.n)))
        if self.weights is not None:
            w = tuple(float(x) for x in self.weights)
            if len(w) != self.k + 1 or any(x < 0 for x in w) or max(w[1:]) <= 0:
                raise ValueError("weights need k+1 non-negative entries with a positive one in 1..k")
            object.__setattr__(self, "weights", w)

    @classmethod
    def from_preset(cls, name: str, seed: int) -> "PlantedSpec":
        try:
            n, m, k = PRESETS[name]
        except KeyError:
            raise KeyError(f"unknown generator preset {name!r}; known: {sorted(PRESETS)}") from None
        return cls(n, m, k, seed)


def generate_planted(spec: PlantedSpec, max_attempts: int | None = None) -> tuple[Formula, np.ndarray]:
    """Return ``(formula, planted_assignment)``; deterministic in ``spec``."""
    n, m, k = spec.n, spec.m, spec.k
    rng = make_rng(spec.seed, "planted", n, m, k)
    if spec.planted is None:
        planted = rng.integers(0, 2, size=n, dtype=np.uint8)
    else:
        planted = np.array(spec.planted, dtype=np.uint8)
    accept_p = None
    if spec.weights is not None:
        w = np.array(spec.weights)
        accept_p = w / w[1:].max()

    if max_attempts is None:
        max_attempts = 1000 * m + 10_000
    seen: set[tuple[int, ...]] = set()
    clauses: list[list[int]] = []
    drawn = 0
    batch = max(64, 2 * m)
    while len(clauses) < m:
        if drawn >= max_attempts:
            raise GenerationError(
                f"only {len(clauses)} of {m} clauses after {drawn} draws (n={n}, k={k})"
            )
        keys = rng.random((batch, n))
        variables = np.argpartition(keys, k - 1, axis=1)[:, :k] if k < n else np.argsort(keys, axis=1)
        signs = rng.integers(0, 2, size=(batch, k), dtype=np.uint8)
        # literal true under planted iff sign == planted value
        n_true = (signs == planted[variables]).sum(axis=1)
        ok = n_true > 0
        if accept_p is not None:
            ok &= rng.random(batch) < accept_p[n_true]
        drawn += batch
        lits = np.where(signs == 1, variables + 1, -(variables + 1))
        for row in lits[ok]:
            key = tuple(sorted(row.tolist()))
            if key in seen:
                continue
            seen.add(key)
            clauses.append(row.tolist())
            if len(clauses) == m:
                break
    return Formula(n, clauses), planted


def sidecar(spec: PlantedSpec, planted: Sequence[int]) -> dict:
    return {
        "seed": spec.seed,
        "spec": {"n": spec.n, "m": spec.m, "k": spec.k},
        "planted_assignment": [int(x) for x in planted],
    }


def write_instance(spec: PlantedSpec, cnf_path, json_path=None) -> Formula:
    """Write the DIMACS file and its JSON sidecar; returns the formula."""
    formula, planted = generate_planted(spec)
    with open(cnf_path, "wb") as fh:
        fh.write(write_dimacs(formula, comments=[f"planted k-SAT n={spec.n} m={spec.m} k={spec.k} seed={spec.seed}"]))
    if json_path is not None:
        with open(json_path, "w") as fh:
            json.dump(sidecar(spec, planted), fh, sort_keys=True)
            fh.write("\n")
    return formula
