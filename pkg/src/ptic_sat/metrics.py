"""Benchmark arithmetic: ITS99, iteration accounting, success rates,
improvement buckets and replica-trace analytics."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence


@dataclass(frozen=True)
class RunRecord:
    solved: bool
    iterations: int
    budget: int


@dataclass(frozen=True)
class RepeatSet:
    outcomes: tuple[RunRecord, ...]

    def __post_init__(self):
        object.__setattr__(self, "outcomes", tuple(self.outcomes))
        if not self.outcomes:
            raise ValueError("a repeat set needs at least one outcome")
        budgets = {r.budget for r in self.outcomes}
        if len(budgets) != 1:
            raise ValueError(f"all repeats must share one budget, got {sorted(budgets)}")

    @classmethod
    def from_counts(cls, solved: int, gamma: int, tau: int) -> "RepeatSet":
        """Synthetic set with ``solved`` successes out of ``gamma``."""
        if not 0 <= solved <= gamma:
            raise ValueError("need 0 <= solved <= gamma")
        recs = [RunRecord(True, tau, tau)] * solved + [RunRecord(False, tau, tau)] * (gamma - solved)
        return cls(tuple(recs))

    @property
    def gamma(self) -> int:
        return len(self.outcomes)

    @property
    def tau(self) -> int:
        return self.outcomes[0].budget

    @property
    def solved(self) -> int:
        return sum(r.solved for r in self.outcomes)

    @property
    def success_probability(self) -> float:
        return self.solved / self.gamma


def r99(p: float) -> int | None:
    """Repeats needed to succeed with 99% probability; None when p == 0."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("probability outside [0, 1]")
    if p == 0.0:
        return None
    if p >= 0.99:
        return 1
    # the tolerance absorbs log round-off at exact integer ratios
    return math.ceil(math.log(0.01) / math.log1p(-p) - 1e-9)


def its99(repeats: RepeatSet) -> int | None:
    """Iterations-to-solution at 99% confidence, ``tau * R99``.

    Returns None (unsolved) when no repeat succeeded.
    """
    r = r99(repeats.success_probability)
    return None if r is None else repeats.tau * r


def ptic_iterations(kappa: int, steps_per_episode: int, episodes: int, last_steps: int) -> int:
    """Total PTIC iterations: kappa * (Q * (s - 1) + q)."""
    if kappa < 1 or steps_per_episode < 1 or episodes < 1:
        raise ValueError("kappa, Q and s must be >= 1")
    if not 1 <= last_steps <= steps_per_episode:
        raise ValueError(f"q={last_steps} outside 1..Q={steps_per_episode}")
    return kappa * (steps_per_episode * (episodes - 1) + last_steps)


def parallel_baseline_iterations(kappa: int, winner_steps: int) -> int:
    """Independent replicas halted by the first solver: kappa * winner steps."""
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    if winner_steps < 1:
        raise ValueError("winner_steps must be >= 1")
    return kappa * winner_steps


def _solved_counts(group: Sequence[RepeatSet]) -> tuple[list[int], int]:
    if not group:
        raise ValueError("empty instance group")
    gammas = {rs.gamma for rs in group}
    if len(gammas) != 1:
        raise ValueError(f"repeat counts differ across the group: {sorted(gammas)}")
    return [rs.solved for rs in group], gammas.pop()


def per_problem_success_rate(group: Sequence[RepeatSet]) -> float:
    """Mean fraction of successful repeats across instances, in percent."""
    solved, gamma = _solved_counts(group)
    return 100.0 * sum(s / gamma for s in solved) / len(solved)


def per_group_success_rate(group: Sequence[RepeatSet]) -> float:
    """Percentage of instances with at least one successful repeat."""
    solved, _ = _solved_counts(group)
    return 100.0 * sum(s > 0 for s in solved) / len(solved)


class ImprovementBucket(enum.Enum):
    DECLINE = "decline"
    SMALL = "small"
    MEDIUM = "medium"
    SIGNIFICANT = "significant"

    @classmethod
    def of(cls, delta: float) -> "ImprovementBucket":
        if delta < 0.0:
            return cls.DECLINE
        if delta < 0.2:
            return cls.SMALL
        if delta < 0.8:
            return cls.MEDIUM
        return cls.SIGNIFICANT


def improvement(its_ptic: float, its_baseline: float) -> tuple[float, ImprovementBucket]:
    """Relative advantage ``(baseline - ptic) / ptic`` and its bucket.

    The ratio is dimensionless (0.5 means the baseline needs 50% more).
    """
    if its_ptic <= 0:
        raise ValueError("PTIC ITS must be positive")
    delta = (its_baseline - its_ptic) / its_ptic
    return delta, ImprovementBucket.of(delta)


class MalformedTrace(ValueError):
    pass


@dataclass(frozen=True)
class TraceAnalytics:
    traversal: tuple[tuple[int, ...], ...]
    slot_energies: tuple[tuple[int, ...], ...]
    configuration_energies: tuple[tuple[int, ...], ...]
    successful_configuration: int | None
    distinct_temperatures: int | None


def trace_analytics(trace, successful_slot: int | None = None) -> TraceAnalytics:
    """Per-configuration traversal series and energy histories.

    ``traversal[c][e]`` is the slot configuration ``c`` ran in at episode
    ``e`` and ``slot_energies[i][e]`` the energy in slot ``i``.  With
    ``successful_slot`` given, the configuration sitting there in the last
    event is credited and its number of distinct slots is reported.
    """
    if not trace:
        raise MalformedTrace("empty trace")
    kappa = len(trace[0].occupancy)
    for ev in trace:
        if sorted(ev.occupancy) != list(range(kappa)):
            raise MalformedTrace(f"episode {ev.episode}: occupancy {list(ev.occupancy)} is not a permutation")
        if len(ev.slot_energies) != kappa:
            raise MalformedTrace(f"episode {ev.episode}: expected {kappa} slot energies")
    traversal = tuple(tuple(ev.occupancy[c] for ev in trace) for c in range(kappa))
    slot_e = tuple(tuple(ev.slot_energies[i] for ev in trace) for i in range(kappa))
    conf_e = tuple(
        tuple(ev.slot_energies[ev.occupancy[c]] for ev in trace) for c in range(kappa)
    )
    winner = distinct = None
    if successful_slot is not None:
        if not 0 <= successful_slot < kappa:
            raise MalformedTrace(f"successful slot {successful_slot} outside 0..{kappa - 1}")
        winner = trace[-1].occupancy.index(successful_slot)
        distinct = len(set(traversal[winner]))
    return TraceAnalytics(traversal, slot_e, conf_e, winner, distinct)


def infer_successful_slot(trace) -> int | None:
    """Lowest slot at energy 0 in the final event, if any."""
    last = trace[-1].slot_energies
    for i, e in enumerate(last):
        if e == 0:
            return i
    return None


def traversed_temperature_histogram(counts: Sequence[int], kappa: int) -> list[int]:
    """``hist[j]`` = number of runs whose winner visited ``j + 1`` slots."""
    hist = [0] * kappa
    for c in counts:
        if not 1 <= c <= kappa:
            raise ValueError(f"distinct count {c} outside 1..{kappa}")
        hist[c - 1] += 1
    return hist
