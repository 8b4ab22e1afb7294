"""Benchmark harness: repeats, ITS tables, raw run archive and audit.

Every repeat draws from streams keyed by
``(master_seed, instance_id, algorithm_id, repeat, replica)``: the run seed is
``derive_seed(master_seed, instance_id, algorithm_id, repeat)`` and replica
``i`` of that run uses ``make_rng(run_seed, 0, i)``.  Output therefore does
not depend on the worker count or on scheduling order.

Files written to ``out_dir``:

* ``results.csv``  one row per (instance, algorithm, budget), flushed per instance
* ``runs.jsonl``   raw per-repeat outcomes, enough to recompute every row
* ``summary.json`` rows plus group success rates, written at the end
* ``traces/``      per-run JSONL traces when tracing is on
"""

from __future__ import annotations

import csv
import io
import json
import logging
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from .cnf import Formula, SearchState, init_state, read_dimacs
from .generator import PRESETS as GENERATOR_PRESETS
from .generator import PlantedSpec, generate_planted
from .kernels import KernelKind, derive_seed, make_rng, random_assignment, run_episode
from .metrics import (
    RepeatSet,
    RunRecord,
    improvement,
    its99,
    parallel_baseline_iterations,
    per_group_success_rate,
    per_problem_success_rate,
)
from .ptic import run_ptic, run_standard_pt, write_trace
from .schedule import parse_schedule

log = logging.getLogger(__name__)

ALGORITHMS = ("walksat", "pa-walksat", "ptic-walksat", "standard-pt")
CSV_SCHEMA = "ptic-sat results v1"
CSV_COLUMNS = (
    "instance",
    "group",
    "algorithm",
    "gamma",
    "solved",
    "tau",
    "its",
    "delta_vs_baseline",
    "bucket",
    "mean_iterations",
    "superseded",
)

PROFILES: dict[str, dict[str, Any]] = {
    "desk": {
        "gamma": 10,
        "gamma_overrides": {},
        "eta": 0.5,
        "walksat_cap": 100_000,
        "walksat_escalate": 200_000,
        "schedule": "paper-tuned-7",
        "steps_per_episode": 1000,
        "max_episodes": 100,
        "pa_cap": 100_000,
        "pt_schedule": "2.0,0.5,0.1",
        "pt_sweeps": 2000,
    },
    "paper": {
        "gamma": 100,
        "gamma_overrides": {"walksat": 5000},
        "eta": 0.5,
        "walksat_cap": 500_000,
        "walksat_escalate": 1_000_000,
        "schedule": "paper-tuned-7",
        "steps_per_episode": 6270,
        "max_episodes": 1000,
        "pa_cap": 6_270_000,
        "pt_schedule": "2.0,0.5,0.1",
        "pt_sweeps": 100_000,
    },
}


@dataclass(frozen=True)
class Instance:
    id: str
    group: str
    path: str | None = None
    preset: str | None = None
    seed: int | None = None

    def load(self) -> Formula:
        if self.path is not None:
            return read_dimacs(self.path)
        formula, _ = generate_planted(PlantedSpec.from_preset(self.preset, self.seed))
        return formula


def expand_instances(entries: Iterable) -> list[Instance]:
    """Turn config entries into instances.

    An entry is a DIMACS path, ``{"path": ..., "group": ...}``, a
    ``"PRESET:COUNT[:FIRST_SEED]"`` string, or
    ``{"preset": ..., "count": ..., "first_seed": ...}``.
    """
    out = []
    for entry in entries:
        if isinstance(entry, str) and entry.split(":")[0] in GENERATOR_PRESETS:
            parts = entry.split(":")
            count = int(parts[1]) if len(parts) > 1 else 1
            first = int(parts[2]) if len(parts) > 2 else 0
            entry = {"preset": parts[0], "count": count, "first_seed": first}
        if isinstance(entry, str):
            entry = {"path": entry}
        if "preset" in entry:
            name = entry["preset"]
            if name not in GENERATOR_PRESETS:
                raise ValueError(f"unknown generator preset {name!r}")
            seeds = entry.get("seeds")
            if seeds is None:
                first = int(entry.get("first_seed", 0))
                seeds = range(first, first + int(entry.get("count", 1)))
            for s in seeds:
                out.append(Instance(f"{name}-s{s}", entry.get("group", name), preset=name, seed=int(s)))
        else:
            path = str(entry["path"])
            out.append(Instance(entry.get("id", Path(path).stem), entry.get("group", "file"), path=path))
    ids = [inst.id for inst in out]
    if len(set(ids)) != len(ids):
        raise ValueError("instance ids must be unique")
    return out


@dataclass
class RunConfig:
    instances: list = field(default_factory=list)
    algorithms: list = field(default_factory=lambda: ["walksat", "pa-walksat", "ptic-walksat"])
    baselines: list = field(default_factory=lambda: ["walksat", "pa-walksat"])
    seed: int = 0
    workers: int = 1
    out_dir: str = "bench-out"
    trace: bool = False
    profile: str = "desk"
    gamma: int = 10
    gamma_overrides: dict = field(default_factory=dict)
    eta: float = 0.5
    walksat_cap: int = 100_000
    walksat_escalate: int | None = 200_000
    schedule: str = "paper-tuned-7"
    steps_per_episode: int = 1000
    max_episodes: int = 100
    pa_cap: int = 100_000
    pt_schedule: str = "2.0,0.5,0.1"
    pt_sweeps: int = 2000

    @classmethod
    def build(cls, profile: str = "desk", file_values: dict | None = None, overrides: dict | None = None) -> "RunConfig":
        """Layer values: profile < config file < explicit overrides."""
        if profile not in PROFILES:
            raise ValueError(f"unknown profile {profile!r}; known: {sorted(PROFILES)}")
        values: dict[str, Any] = {"profile": profile, **PROFILES[profile]}
        known = {f.name for f in fields(cls)}
        for layer in (file_values or {}, overrides or {}):
            unknown = set(layer) - known
            if unknown:
                raise ValueError(f"unknown config keys: {sorted(unknown)}")
            values.update({k: v for k, v in layer.items() if v is not None})
        cfg = cls(**values)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad:
            raise ValueError(f"unknown algorithms {bad}; known: {list(ALGORITHMS)}")
        if self.gamma < 1 or any(int(g) < 1 for g in self.gamma_overrides.values()):
            raise ValueError("gamma must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if {"pa-walksat", "ptic-walksat"} & set(self.algorithms):
            parse_schedule(self.schedule)
        if "standard-pt" in self.algorithms:
            parse_schedule(self.pt_schedule)
        for name in ("walksat_cap", "steps_per_episode", "max_episodes", "pa_cap", "pt_sweeps"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    def gamma_for(self, algorithm: str) -> int:
        return int(self.gamma_overrides.get(algorithm, self.gamma))

    def echo(self) -> dict:
        """Config as recorded in outputs; excludes fields that must not affect results."""
        d = asdict(self)
        for k in ("workers", "out_dir"):
            d.pop(k)
        return d


# -- single repeats -----------------------------------------------------------


def walksat_trial(formula: Formula, eta: float, cap: int, seed: int) -> tuple[RunRecord, SearchState]:
    rng = make_rng(seed, 0, 0)
    state = init_state(formula, random_assignment(rng, formula.num_vars))
    out = run_episode(state, KernelKind.WALKSAT, eta, cap, rng)
    return RunRecord(out.solved, out.steps_taken if out.solved else cap, cap), state


def run_walksat(formula: Formula, eta: float, cap: int, seed: int) -> RunRecord:
    return walksat_trial(formula, eta, cap, seed)[0]


def pa_walksat_trial(
    formula: Formula, temps, cap: int, seed: int, chunk: int = 10_000
) -> tuple[RunRecord, list[SearchState]]:
    """Independent WalkSAT replicas, one per walk probability.

    Replicas advance in lockstep chunks; since they never interact, the
    earliest solver found this way is the one with the fewest steps, the
    same answer as running every replica to its cap.  Returns the record
    and the replica states where they stopped.
    """
    kappa = len(temps)
    states, rngs = [], []
    for i in range(kappa):
        rng = make_rng(seed, 0, i)
        states.append(init_state(formula, random_assignment(rng, formula.num_vars)))
        rngs.append(rng)
    done = 0
    while True:
        solved_at = [done for st in states if st.energy == 0]
        if solved_at:
            break
        if done >= cap:
            return RunRecord(False, kappa * cap, kappa * cap), states
        step = min(chunk, cap - done)
        for st, rng, eta in zip(states, rngs, temps):
            out = run_episode(st, KernelKind.WALKSAT, eta, step, rng)
            if out.solved:
                solved_at.append(done + out.steps_taken)
        if solved_at:
            break
        done += step
    winner = min(solved_at)
    iters = 0 if winner == 0 else parallel_baseline_iterations(kappa, winner)
    return RunRecord(True, iters, kappa * cap), states


def run_pa_walksat(formula: Formula, temps, cap: int, seed: int, chunk: int = 10_000) -> RunRecord:
    return pa_walksat_trial(formula, temps, cap, seed, chunk)[0]


@dataclass(frozen=True)
class Task:
    instance_index: int
    algorithm: str
    cap: int | None
    repeat: int
    seed: int
    trace: bool


@dataclass
class TaskResult:
    record: RunRecord
    trace: list | None = None


def execute(task: Task, formula: Formula, cfg: RunConfig) -> TaskResult:
    alg = task.algorithm
    if alg == "walksat":
        return TaskResult(run_walksat(formula, cfg.eta, task.cap, task.seed))
    if alg == "pa-walksat":
        return TaskResult(run_pa_walksat(formula, parse_schedule(cfg.schedule).temps, cfg.pa_cap, task.seed))
    if alg == "ptic-walksat":
        res = run_ptic(
            formula,
            KernelKind.WALKSAT,
            parse_schedule(cfg.schedule),
            cfg.steps_per_episode,
            cfg.max_episodes,
            task.seed,
            trace=task.trace,
        )
    elif alg == "standard-pt":
        res = run_standard_pt(formula, parse_schedule(cfg.pt_schedule), cfg.pt_sweeps, task.seed, trace=task.trace)
    else:
        raise ValueError(f"unknown algorithm {alg!r}")
    return TaskResult(RunRecord(res.solved, res.total_iterations, res.budget), res.trace if task.trace else None)


def _worker(args):
    task, formula, cfg = args
    return execute(task, formula, cfg)


# -- aggregation ----------------------------------------------------------------


def algorithm_id(algorithm: str, cap: int | None) -> str:
    return algorithm if cap is None else f"{algorithm}@{cap}"


def summarize(instance: Instance, algorithm: str, records: list[RunRecord], superseded: bool = False) -> dict:
    rs = RepeatSet(tuple(records))
    its = its99(rs)
    solved_iters = [r.iterations for r in records if r.solved]
    return {
        "instance": instance.id,
        "group": instance.group,
        "algorithm": algorithm,
        "gamma": rs.gamma,
        "solved": rs.solved,
        "tau": rs.tau,
        "its": its,
        "delta_vs_baseline": None,
        "bucket": None,
        "mean_iterations": float(np.mean(solved_iters)) if solved_iters else None,
        "superseded": superseded,
    }


def attach_deltas(rows: list[dict], baselines: Iterable[str]) -> None:
    """Fill ``delta_vs_baseline``/``bucket`` on final baseline rows.

    The value is PTIC's improvement over that row's algorithm; rows where
    either side is unsolved are marked "unsolved" and carry no delta.
    """
    ptic = [r for r in rows if r["algorithm"] == "ptic-walksat" and not r["superseded"]]
    if not ptic:
        return
    its_ptic = ptic[0]["its"]
    for row in rows:
        if row["algorithm"] not in baselines or row["superseded"]:
            continue
        if its_ptic is None or row["its"] is None:
            row["bucket"] = "unsolved"
            continue
        delta, bucket = improvement(its_ptic, row["its"])
        row["delta_vs_baseline"] = delta
        row["bucket"] = bucket.value


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(round(value, 10))
    return str(value)


def format_rows(rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for row in rows:
        w.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def csv_header() -> str:
    return f"# {CSV_SCHEMA}\n" + ",".join(CSV_COLUMNS) + "\n"


def group_rates(rows: list[dict], runs: list[dict]) -> dict:
    """Success rates per group and algorithm over final rows."""
    by_key: dict[tuple, list[RunRecord]] = {}
    for r in runs:
        key = (r["instance"], r["algorithm"], r["tau"])
        by_key.setdefault(key, []).append(RunRecord(r["solved"], r["iterations"], r["budget"]))
    out: dict[str, dict] = {}
    final = [r for r in rows if not r["superseded"]]
    groups = sorted({r["group"] for r in final})
    for g in groups:
        out[g] = {}
        algs = sorted({r["algorithm"] for r in final if r["group"] == g})
        for alg in algs:
            sets = [
                RepeatSet(tuple(by_key[(r["instance"], alg, r["tau"])]))
                for r in final
                if r["group"] == g and r["algorithm"] == alg
            ]
            try:
                out[g][alg] = {
                    "instances": len(sets),
                    "per_problem_success_rate": per_problem_success_rate(sets),
                    "per_group_success_rate": per_group_success_rate(sets),
                }
            except ValueError as exc:
                out[g][alg] = {"instances": len(sets), "error": str(exc)}
    return out


# -- driver ------------------------------------------------------------------------


def _tasks_for(index: int, inst: Instance, cfg: RunConfig, algorithms, cap_for) -> list[Task]:
    tasks = []
    for alg in algorithms:
        cap = cap_for(alg)
        aid = algorithm_id(alg, cap)
        for rep in range(cfg.gamma_for(alg)):
            seed = derive_seed(cfg.seed, inst.id, aid, rep)
            tasks.append(Task(index, alg, cap, rep, seed, cfg.trace and alg in ("ptic-walksat", "standard-pt")))
    return tasks


class _Runner:
    def __init__(self, workers: int):
        self.pool = None
        if workers > 1:
            ctx = multiprocessing.get_context("spawn")
            self.pool = ProcessPoolExecutor(max_workers=workers, mp_context=ctx)

    def map(self, fn, items):
        if self.pool is None:
            return map(fn, items)
        return self.pool.map(fn, items)

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()


def run_benchmark(cfg: RunConfig) -> list[dict]:
    """Run every (instance, algorithm) pair and write the output files.

    Instances that fail to load are skipped and listed under ``errors`` in
    the summary.  Returns the result rows.
    """
    cfg.validate()
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if cfg.trace:
        (out_dir / "traces").mkdir(exist_ok=True)
    instances = expand_instances(cfg.instances)
    if not instances:
        raise ValueError("no instances to benchmark")

    formulas: dict[int, Formula] = {}
    errors = []
    for i, inst in enumerate(instances):
        try:
            formulas[i] = inst.load()
        except Exception as exc:  # isolate per-instance failures
            log.error("instance %s failed to load: %s", inst.id, exc)
            errors.append({"instance": inst.id, "error": str(exc)})

    def first_cap(alg):
        return cfg.walksat_cap if alg == "walksat" else None

    jobs = [
        (t, formulas[t.instance_index], cfg)
        for i in sorted(formulas)
        for t in _tasks_for(i, instances[i], cfg, cfg.algorithms, first_cap)
    ]
    all_rows: list[dict] = []
    all_runs: list[dict] = []
    runner = _Runner(cfg.workers)
    csv_path = out_dir / "results.csv"
    runs_path = out_dir / "runs.jsonl"
    try:
        with open(csv_path, "w") as csv_fh, open(runs_path, "w") as runs_fh:
            csv_fh.write(csv_header())
            csv_fh.flush()
            results = runner.map(_worker, jobs)
            pending: dict[tuple, list] = {}
            expected = {}
            for t, _, _ in jobs:
                expected[t.instance_index] = expected.get(t.instance_index, 0) + 1
            got = {}
            for (task, _, _), result in zip(jobs, results):
                i = task.instance_index
                pending.setdefault((i, task.algorithm, task.cap), []).append((task, result))
                got[i] = got.get(i, 0) + 1
                if got[i] < expected[i]:
                    continue
                rows, runs = _finish_instance(i, instances[i], formulas[i], cfg, pending, runner, out_dir)
                csv_fh.write(format_rows(rows))
                for r in runs:
                    runs_fh.write(json.dumps(r, sort_keys=True) + "\n")
                csv_fh.flush()
                runs_fh.flush()
                all_rows.extend(rows)
                all_runs.extend(runs)
    finally:
        runner.close()

    summary = {
        "schema": CSV_SCHEMA,
        "config": cfg.echo(),
        "rows": all_rows,
        "groups": group_rates(all_rows, all_runs),
        "errors": errors,
    }
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return all_rows


def _finish_instance(i, inst, formula, cfg, pending, runner, out_dir):
    rows, runs = [], []

    def absorb(alg, cap, pairs, superseded=False):
        pairs = sorted(pairs, key=lambda p: p[0].repeat)
        records = [res.record for _, res in pairs]
        rows.append(summarize(inst, alg, records, superseded))
        for task, res in pairs:
            runs.append(
                {
                    "instance": inst.id,
                    "group": inst.group,
                    "algorithm": alg,
                    "tau": res.record.budget,
                    "repeat": task.repeat,
                    "seed": task.seed,
                    "solved": res.record.solved,
                    "iterations": res.record.iterations,
                    "budget": res.record.budget,
                }
            )
            if res.trace is not None:
                path = out_dir / "traces" / f"{inst.id}__{alg}__r{task.repeat}.jsonl"
                with open(path, "w") as fh:
                    write_trace(res.trace, fh)

    for alg in cfg.algorithms:
        key = (i, alg, cfg.walksat_cap if alg == "walksat" else None)
        pairs = pending.pop(key)
        if alg == "walksat" and cfg.walksat_escalate and not any(r.record.solved for _, r in pairs):
            absorb(alg, key[2], pairs, superseded=True)
            extra = _tasks_for(i, inst, cfg, ["walksat"], lambda a: cfg.walksat_escalate)
            results = list(runner.map(_worker, [(t, formula, cfg) for t in extra]))
            absorb(alg, cfg.walksat_escalate, list(zip(extra, results)))
        else:
            absorb(alg, key[2], pairs)
    attach_deltas(rows, cfg.baselines)
    return rows, runs


# -- audit -------------------------------------------------------------------------


def read_results(path) -> list[dict]:
    with open(path) as fh:
        lines = [line for line in fh if not line.startswith("#")]
    return list(csv.DictReader(lines))


def audit(out_dir) -> list[str]:
    """Recompute every CSV row's ITS from ``runs.jsonl``; return mismatches."""
    out_dir = Path(out_dir)
    rows = read_results(out_dir / "results.csv")
    groups: dict[tuple, list[RunRecord]] = {}
    with open(out_dir / "runs.jsonl") as fh:
        for line in fh:
            r = json.loads(line)
            groups.setdefault((r["instance"], r["algorithm"], str(r["tau"])), []).append(
                RunRecord(r["solved"], r["iterations"], r["budget"])
            )
    problems = []
    for row in rows:
        key = (row["instance"], row["algorithm"], row["tau"])
        recs = groups.get(key)
        if not recs:
            problems.append(f"{key}: no archived runs")
            continue
        rs = RepeatSet(tuple(recs))
        its = its99(rs)
        if str(rs.gamma) != row["gamma"] or str(rs.solved) != row["solved"]:
            problems.append(f"{key}: gamma/solved {row['gamma']}/{row['solved']} vs runs {rs.gamma}/{rs.solved}")
        if _fmt(its) != row["its"]:
            problems.append(f"{key}: its {row['its']!r} vs recomputed {_fmt(its)!r}")
    return problems
