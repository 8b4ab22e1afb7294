"""Replica-exchange orchestration (PTIC and standard parallel tempering).

Slots keep their temperature for the whole run; exchanges swap the
*configurations* (search states) held by temperature-adjacent slots.

Stream layout for a run seeded with ``seed``:

* slot ``i`` draws its initial assignment and all kernel randomness from
  ``make_rng(seed, 0, i)``;
* exchange decisions draw from ``make_rng(seed, 1)``, one uniform per
  attempted pair, whether or not the pair is accepted.

Because streams are keyed by slot, running the slot episodes serially or on
a thread pool gives bit-identical results.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .cnf import Formula, SearchState, init_state
from .kernels import KernelKind, Rng, make_rng, random_assignment, run_episode
from .metrics import ptic_iterations

# exponent clamp keeps exp() finite; e^-700 is already below any useful p
_MAX_EXPONENT = 700.0


@dataclass(frozen=True)
class TemperatureSchedule:
    temps: tuple[float, ...]

    def __post_init__(self):
        temps = tuple(float(t) for t in self.temps)
        object.__setattr__(self, "temps", temps)
        if len(temps) < 2:
            raise ValueError("a schedule needs at least two temperatures")
        if any(not math.isfinite(t) or t <= 0 for t in temps):
            raise ValueError("temperatures must be finite and positive")
        diffs = np.diff(temps)
        if not (np.all(diffs > 0) or np.all(diffs < 0)):
            raise ValueError("temperatures must be distinct and strictly monotone")

    def __len__(self):
        return len(self.temps)

    def __iter__(self):
        return iter(self.temps)

    def __getitem__(self, i):
        return self.temps[i]

    @property
    def kappa(self) -> int:
        return len(self.temps)

    def to_json(self) -> str:
        return json.dumps(list(self.temps))

    @classmethod
    def from_json(cls, text: str) -> "TemperatureSchedule":
        return cls(tuple(json.loads(text)))


def exchange_probability(e_prev: float, t_prev: float, e_next: float, t_next: float) -> float:
    """Acceptance probability for swapping the configurations of two slots.

    ``min(1, exp(dbeta * dE))`` with ``dbeta = 1/t_next - 1/t_prev`` and
    ``dE = e_next - e_prev``.
    """
    if t_prev <= 0 or t_next <= 0:
        raise ValueError("temperatures must be positive")
    exponent = (1.0 / t_next - 1.0 / t_prev) * (e_next - e_prev)
    if exponent >= 0:
        return 1.0
    return math.exp(max(exponent, -_MAX_EXPONENT))


ExchangeRule = Callable[[float, float, float, float], float]


def exchange_phase(
    energies: Sequence[float],
    temps: Sequence[float],
    rng: Rng,
    rule: ExchangeRule = exchange_probability,
) -> tuple[list[int], list[bool]]:
    """One sequential sweep of adjacent-pair exchange attempts.

    Pairs ``(i, i+1)`` are visited for ``i = 0 .. kappa-2`` in order, each
    reading the energies as left by earlier swaps in the same sweep.
    Returns ``(perm, accepted)`` where ``perm[slot]`` is the slot whose
    configuration now sits in ``slot``.
    """
    perm = list(range(len(temps)))
    e = list(energies)
    accepted = []
    for i in range(len(temps) - 1):
        p = rule(e[i], temps[i], e[i + 1], temps[i + 1])
        ok = rng.random() < p
        if ok:
            perm[i], perm[i + 1] = perm[i + 1], perm[i]
            e[i], e[i + 1] = e[i + 1], e[i]
        accepted.append(ok)
    return perm, accepted


@dataclass(frozen=True)
class TraceEvent:
    """Snapshot taken after the episodes of one round, before exchanges.

    ``occupancy[c]`` is the slot in which configuration ``c`` (named after
    the slot it started in) ran this episode.
    """

    episode: int
    slot_energies: tuple[int, ...]
    occupancy: tuple[int, ...]

    def to_json(self) -> str:
        return json.dumps(
            {
                "episode": self.episode,
                "slot_energies": list(self.slot_energies),
                "occupancy": list(self.occupancy),
            }
        )

    @classmethod
    def from_dict(cls, d: dict) -> "TraceEvent":
        return cls(int(d["episode"]), tuple(d["slot_energies"]), tuple(d["occupancy"]))


def write_trace(events: Iterable[TraceEvent], fh) -> None:
    for ev in events:
        fh.write(ev.to_json() + "\n")


def read_trace(fh) -> list[TraceEvent]:
    return [TraceEvent.from_dict(json.loads(line)) for line in fh if line.strip()]


@dataclass
class ReplicaSlot:
    index: int
    temperature: float
    state: SearchState
    config_id: int
    rng: Rng

    @property
    def incumbent_energy(self) -> int:
        return self.state.energy


@dataclass
class PticResult:
    best_assignment: np.ndarray
    best_energy: int
    solved: bool
    episodes_run: int
    kappa: int
    steps_per_episode: int
    max_episodes: int
    successful_slot: int | None = None
    successful_q: int | None = None
    total_iterations: int = 0
    exchange_attempts: list[int] = field(default_factory=list)
    exchange_accepts: list[int] = field(default_factory=list)
    trace: list[TraceEvent] = field(default_factory=list)

    @property
    def budget(self) -> int:
        """Iteration cap of the run, kappa * Q * S."""
        return self.kappa * self.steps_per_episode * self.max_episodes


def _check_schedule(kernel: KernelKind, schedule: TemperatureSchedule) -> None:
    if kernel is KernelKind.WALKSAT and any(t > 1.0 for t in schedule.temps):
        raise ValueError("walk-probability temperatures must lie in (0, 1]")


def run_ptic(
    formula: Formula,
    kernel: KernelKind,
    schedule: TemperatureSchedule,
    steps_per_episode: int,
    max_episodes: int,
    seed: int,
    trace: bool = False,
    *,
    workers: int = 1,
    exchange_rule: ExchangeRule = exchange_probability,
    observer: Callable[[int, list[ReplicaSlot]], None] | None = None,
) -> PticResult:
    """Run the PTIC loop until some slot reaches energy 0 or episodes run out.

    Every slot runs one episode of ``steps_per_episode`` kernel steps per
    round.  If several slots solve in the same round, the lowest slot index
    is credited.  Otherwise an exchange sweep follows.  ``observer`` is
    called after each exchange sweep with the slot list.
    """
    if steps_per_episode < 1 or max_episodes < 1:
        raise ValueError("steps_per_episode and max_episodes must be >= 1")
    if not isinstance(schedule, TemperatureSchedule):
        schedule = TemperatureSchedule(tuple(schedule))
    _check_schedule(kernel, schedule)
    kappa = schedule.kappa
    slots = []
    for i, temp in enumerate(schedule.temps):
        rng = make_rng(seed, 0, i)
        state = init_state(formula, random_assignment(rng, formula.num_vars))
        slots.append(ReplicaSlot(i, temp, state, i, rng))
    xrng = make_rng(seed, 1)

    best_slot = min(slots, key=lambda sl: (sl.state.energy, sl.index))
    best_assignment = best_slot.state.assignment.copy()
    best_energy = best_slot.state.energy
    attempts = [0] * (kappa - 1)
    accepts = [0] * (kappa - 1)
    events: list[TraceEvent] = []

    def episode(sl: ReplicaSlot):
        return run_episode(sl.state, kernel, sl.temperature, steps_per_episode, sl.rng)

    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for s in range(1, max_episodes + 1):
            if pool is None:
                outcomes = [episode(sl) for sl in slots]
            else:
                outcomes = list(pool.map(episode, slots))
            if trace:
                occ = [0] * kappa
                for sl in slots:
                    occ[sl.config_id] = sl.index
                events.append(
                    TraceEvent(s, tuple(sl.state.energy for sl in slots), tuple(occ))
                )
            for sl, out in zip(slots, outcomes):
                if out.solved:
                    iters = 0 if out.steps_taken == 0 else ptic_iterations(
                        kappa, steps_per_episode, s, out.steps_taken
                    )
                    return PticResult(
                        best_assignment=sl.state.assignment.copy(),
                        best_energy=0,
                        solved=True,
                        episodes_run=s,
                        kappa=kappa,
                        steps_per_episode=steps_per_episode,
                        max_episodes=max_episodes,
                        successful_slot=sl.index,
                        successful_q=out.steps_taken,
                        total_iterations=iters,
                        exchange_attempts=attempts,
                        exchange_accepts=accepts,
                        trace=events,
                    )
                if out.final_energy < best_energy:
                    best_energy = out.final_energy
                    best_assignment = sl.state.assignment.copy()

            perm, accepted = exchange_phase(
                [sl.state.energy for sl in slots], schedule.temps, xrng, exchange_rule
            )
            moved = [(slots[src].state, slots[src].config_id) for src in perm]
            for sl, (state, cid) in zip(slots, moved):
                sl.state, sl.config_id = state, cid
            for i, ok in enumerate(accepted):
                attempts[i] += 1
                accepts[i] += ok
            if observer is not None:
                observer(s, slots)
    finally:
        if pool is not None:
            pool.shutdown()

    return PticResult(
        best_assignment=best_assignment,
        best_energy=best_energy,
        solved=False,
        episodes_run=max_episodes,
        kappa=kappa,
        steps_per_episode=steps_per_episode,
        max_episodes=max_episodes,
        total_iterations=kappa * steps_per_episode * max_episodes,
        exchange_attempts=attempts,
        exchange_accepts=accepts,
        trace=events,
    )


def run_standard_pt(
    formula: Formula,
    schedule: TemperatureSchedule,
    sweeps: int,
    seed: int,
    trace: bool = False,
    **kwargs,
) -> PticResult:
    """Classic parallel tempering: Metropolis kernel, one sweep = n proposals."""
    kwargs.pop("steps_per_episode", None)
    return run_ptic(
        formula,
        KernelKind.METROPOLIS_HASTINGS,
        schedule,
        formula.num_vars,
        sweeps,
        seed,
        trace,
        **kwargs,
    )
