"""Temperature ladders and exchange-rate balancing."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np

from .cnf import Formula
from .kernels import KernelKind, derive_seed
from .ptic import TemperatureSchedule, run_ptic

PRESETS: dict[str, tuple[float, ...]] = {
    "paper-tuned-7": (1.0, 0.6, 0.25, 0.18, 0.14, 0.12, 0.1),
}


def _check_range(kappa: int, t_min: float, t_max: float) -> None:
    if kappa < 2:
        raise ValueError("kappa must be >= 2")
    if not 0 < t_min < t_max:
        raise ValueError("need 0 < t_min < t_max")


def uniform_schedule(kappa: int, t_min: float, t_max: float) -> TemperatureSchedule:
    """Temperatures equally spaced from ``t_max`` down to ``t_min``."""
    _check_range(kappa, t_min, t_max)
    temps = np.linspace(t_max, t_min, kappa)
    temps[0], temps[-1] = t_max, t_min
    return TemperatureSchedule(tuple(temps))


def inverse_linear_schedule(kappa: int, t_min: float, t_max: float) -> TemperatureSchedule:
    """Inverse temperatures equally spaced; ordered from ``t_max`` to ``t_min``."""
    _check_range(kappa, t_min, t_max)
    beta_lo, beta_hi = 1.0 / t_max, 1.0 / t_min
    i = np.arange(kappa)
    betas = (beta_hi * i + beta_lo * (kappa - 1 - i)) / (kappa - 1)
    temps = 1.0 / betas
    temps[0], temps[-1] = t_max, t_min
    return TemperatureSchedule(tuple(temps))


def preset(name: str) -> TemperatureSchedule:
    try:
        return TemperatureSchedule(PRESETS[name])
    except KeyError:
        raise KeyError(f"unknown schedule preset {name!r}; known: {sorted(PRESETS)}") from None


def parse_schedule(text: str) -> TemperatureSchedule:
    """Resolve a schedule description.

    Accepts a preset name, ``uniform:K:TMIN:TMAX``,
    ``inverse-linear:K:TMIN:TMAX``, a JSON array, a comma-separated list
    of temperatures, or a path to a JSON file holding an array.
    """
    text = text.strip()
    if text in PRESETS:
        return preset(text)
    kind, _, rest = text.partition(":")
    if kind in ("uniform", "inverse-linear") and rest:
        k, t_min, t_max = rest.split(":")
        ctor = uniform_schedule if kind == "uniform" else inverse_linear_schedule
        return ctor(int(k), float(t_min), float(t_max))
    if text.startswith("["):
        return TemperatureSchedule(tuple(json.loads(text)))
    if "," in text:
        return TemperatureSchedule(tuple(float(t) for t in text.split(",")))
    try:
        with open(text) as fh:
            return TemperatureSchedule(tuple(json.load(fh)))
    except FileNotFoundError:
        raise ValueError(f"cannot interpret schedule {text!r}") from None


@dataclass(frozen=True)
class ExchangeRateProfile:
    rates: tuple[float, ...]
    attempts: tuple[int, ...]

    def __post_init__(self):
        if len(self.rates) != len(self.attempts):
            raise ValueError("rates and attempts differ in length")
        if any(not 0.0 <= r <= 1.0 for r in self.rates):
            raise ValueError("rates must lie in [0, 1]")

    @classmethod
    def from_counts(cls, accepts: Sequence[int], attempts: Sequence[int]) -> "ExchangeRateProfile":
        if any(a <= 0 for a in attempts):
            raise InconclusiveProbe(f"probe produced no exchange attempts for some pair: {list(attempts)}")
        return cls(tuple(x / a for x, a in zip(accepts, attempts)), tuple(attempts))

    @property
    def variance(self) -> float:
        # population variance over the kappa-1 pair rates
        return float(np.var(self.rates))


class InconclusiveProbe(RuntimeError):
    pass


Probe = Callable[[TemperatureSchedule], ExchangeRateProfile]


def ptic_probe(
    formulas: Sequence[Formula],
    kernel: KernelKind = KernelKind.WALKSAT,
    steps_per_episode: int = 6270,
    episodes: int = 100,
    repeats: int = 5,
    seed: int = 0,
) -> Probe:
    """Probe measuring empirical exchange rates with short PTIC runs.

    Attempts and accepts are pooled over every formula and repeat.  Runs
    that solve early simply contribute fewer attempts.
    """
    if not formulas:
        raise ValueError("at least one probe formula is required")

    def probe(schedule: TemperatureSchedule) -> ExchangeRateProfile:
        attempts = np.zeros(schedule.kappa - 1, dtype=np.int64)
        accepts = np.zeros(schedule.kappa - 1, dtype=np.int64)
        for fi, formula in enumerate(formulas):
            for r in range(repeats):
                res = run_ptic(
                    formula, kernel, schedule, steps_per_episode, episodes,
                    seed=derive_seed(seed, "tune", fi, r),
                )
                attempts += res.exchange_attempts
                accepts += res.exchange_accepts
        return ExchangeRateProfile.from_counts(accepts.tolist(), attempts.tolist())

    return probe


def nudge(schedule: TemperatureSchedule, weakest_pair: int) -> TemperatureSchedule | None:
    """Pull one temperature of the weakest pair halfway toward its partner.

    Pair ``k`` joins slots ``k`` and ``k+1``.  Endpoints never move: for the
    first pair slot ``k+1`` moves, for the last pair slot ``k`` moves, and
    for interior pairs the member farther (in slots) from its nearest end
    moves, slot ``k+1`` on a tie.  Returns None when nothing can move.
    """
    temps = list(schedule.temps)
    kappa = len(temps)
    k = weakest_pair
    if not 0 <= k < kappa - 1:
        raise IndexError(f"pair {k} outside 0..{kappa - 2}")
    if kappa == 2:
        return None

    def depth(j):
        return min(j, kappa - 1 - j)

    if k == 0:
        j = 1
    elif k + 1 == kappa - 1:
        j = k
    else:
        j = k if depth(k) > depth(k + 1) else k + 1
    partner = k + 1 if j == k else k
    new = (temps[j] + temps[partner]) / 2.0
    if new in (temps[j], temps[partner]):
        return None
    temps[j] = new
    return TemperatureSchedule(tuple(temps))


@dataclass(frozen=True)
class TuningStep:
    schedule: TemperatureSchedule
    profile: ExchangeRateProfile
    variance: float
    accepted: bool


def tuning_steps(initial: TemperatureSchedule, probe: Probe, max_iterations: int = 50) -> Iterator[TuningStep]:
    """Yield each probed schedule with its rate profile.

    Stops after the first probe whose rate variance exceeds the previous
    accepted one, when no temperature can move any more, or after
    ``max_iterations`` probes.
    """
    schedule = initial
    best_var = float("inf")
    for _ in range(max_iterations):
        profile = probe(schedule)
        var = profile.variance
        if var > best_var:
            yield TuningStep(schedule, profile, var, False)
            return
        best_var = var
        yield TuningStep(schedule, profile, var, True)
        k = int(np.argmin(profile.rates))
        nxt = nudge(schedule, k)
        if nxt is None:
            return
        schedule = nxt


def tune_schedule(
    initial: TemperatureSchedule,
    probe_formulas: Sequence[Formula] | None = None,
    kernel: KernelKind = KernelKind.WALKSAT,
    steps_per_episode: int = 6270,
    probe_episodes: int = 100,
    seed: int = 0,
    *,
    repeats: int = 5,
    probe: Probe | None = None,
    max_iterations: int = 50,
) -> TemperatureSchedule:
    """Balance exchange rates by repeatedly narrowing the weakest pair.

    Returns the last schedule whose rate variance did not increase.  A
    custom ``probe`` replaces the PTIC-based measurement.
    """
    if probe is None:
        if not probe_formulas:
            raise ValueError("need probe formulas or a probe")
        probe = ptic_probe(probe_formulas, kernel, steps_per_episode, probe_episodes, repeats, seed)
    result = initial
    for step in tuning_steps(initial, probe, max_iterations):
        if step.accepted:
            result = step.schedule
    return result
