"""``ptic-sat`` command line.

Settings are layered, later wins: built-in defaults < ``--profile`` <
``--config`` JSON file < ``PTIC_SAT_*`` environment variables < flags.
The environment variables mirror the global flags: ``PTIC_SAT_CONFIG``,
``PTIC_SAT_SEED``, ``PTIC_SAT_WORKERS``, ``PTIC_SAT_PROFILE``,
``PTIC_SAT_OUT_DIR`` and ``PTIC_SAT_TRACE``.

Exit codes: 0 success / solved, 10 unsolved (``solve``), 1 audit mismatch,
2 usage, I/O or parse error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import energy as energy_mod
from .bench import RunConfig, audit, run_benchmark
from .bench import pa_walksat_trial, walksat_trial
from .cnf import CNFError, read_dimacs, write_dimacs
from .generator import PRESETS as GENERATOR_PRESETS
from .generator import PlantedSpec, generate_planted, sidecar
from .kernels import KernelKind
from .metrics import infer_successful_slot, trace_analytics
from .ptic import read_trace, run_ptic, run_standard_pt, write_trace
from .schedule import inverse_linear_schedule, parse_schedule, tune_schedule

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_USAGE = 2
EXIT_UNSOLVED = 10

ENV_PREFIX = "PTIC_SAT_"

log = logging.getLogger("ptic_sat")


class UsageError(Exception):
    pass


def _env(name: str):
    return os.environ.get(ENV_PREFIX + name)


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError("config file must hold a JSON object")
    return data


def _env_layer() -> dict:
    layer = {}
    for key, conv in (("SEED", int), ("WORKERS", int), ("OUT_DIR", str)):
        raw = _env(key)
        if raw is not None:
            try:
                layer[key.lower()] = conv(raw)
            except ValueError:
                raise UsageError(f"{ENV_PREFIX}{key}={raw!r} is not valid") from None
    raw = _env("TRACE")
    if raw is not None:
        layer["trace"] = raw.lower() in ("1", "true", "yes", "on")
    return layer


def _settings(args) -> tuple[str, dict]:
    """Resolve profile and the merged config-file + env layer."""
    config_path = args.config or _env("CONFIG")
    file_values = _load_config_file(config_path)
    profile = args.profile or _env("PROFILE") or file_values.pop("profile", None) or "desk"
    file_values.pop("profile", None)
    merged = {**file_values, **_env_layer()}
    return profile, merged


def _global_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--workers", type=int, help="worker processes")
    p.add_argument("--profile", choices=["desk", "paper"], help="parameter profile")
    p.add_argument("--out-dir", help="output directory")
    p.add_argument("--trace", action="store_true", default=None, help="record replica traces")


def _algorithm_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--schedule", help="preset name, uniform:K:TMIN:TMAX, inverse-linear:K:TMIN:TMAX, list or JSON file")
    p.add_argument("--kappa", type=int, help="replicas; without --schedule uses inverse-linear:K:0.1:1.0")
    p.add_argument("-Q", "--steps-per-episode", type=int, dest="steps_per_episode")
    p.add_argument("-S", "--max-episodes", type=int, dest="max_episodes")
    p.add_argument("--eta", type=float, help="walk probability for single WalkSAT")
    p.add_argument("--walksat-cap", type=int, help="WalkSAT iteration cap")
    p.add_argument("--pa-cap", type=int, help="per-replica cap for PA-WalkSAT")
    p.add_argument("--pt-schedule", help="temperatures for standard PT")
    p.add_argument("--pt-sweeps", type=int, help="sweep limit for standard PT")


def _algorithm_overrides(args) -> dict:
    out = {}
    for name in ("steps_per_episode", "max_episodes", "eta", "walksat_cap", "pa_cap", "pt_schedule", "pt_sweeps"):
        value = getattr(args, name, None)
        if value is not None:
            out[name] = value
    schedule = getattr(args, "schedule", None)
    kappa = getattr(args, "kappa", None)
    if schedule is None and kappa is not None:
        schedule = f"inverse-linear:{kappa}:0.1:1.0"
    if schedule is not None:
        try:
            sched = parse_schedule(schedule)
        except (ValueError, KeyError) as exc:
            raise UsageError(str(exc)) from None
        if kappa is not None and sched.kappa != kappa:
            raise UsageError(f"--kappa {kappa} disagrees with schedule of {sched.kappa} temperatures")
        out["schedule"] = schedule
    return out


def _build_config(args, extra: dict | None = None) -> RunConfig:
    profile, file_layer = _settings(args)
    overrides = {
        "seed": args.seed,
        "workers": args.workers,
        "out_dir": args.out_dir,
        "trace": args.trace,
        **_algorithm_overrides(args),
        **(extra or {}),
    }
    try:
        return RunConfig.build(profile, file_layer, {k: v for k, v in overrides.items() if v is not None})
    except (ValueError, KeyError) as exc:
        raise UsageError(str(exc)) from None


# -- subcommands ---------------------------------------------------------------


def cmd_solve(args) -> int:
    try:
        formula = read_dimacs(args.instance)
    except OSError as exc:
        raise UsageError(f"cannot read {args.instance}: {exc.strerror or exc}") from None
    except CNFError as exc:
        raise UsageError(f"{args.instance}: {exc}") from None
    cfg = _build_config(args)
    alg = args.algorithm
    assignment = None
    if alg in ("ptic-walksat", "standard-pt"):
        if alg == "ptic-walksat":
            res = run_ptic(
                formula, KernelKind.WALKSAT, parse_schedule(cfg.schedule),
                cfg.steps_per_episode, cfg.max_episodes, cfg.seed, trace=cfg.trace or bool(args.trace_file),
            )
        else:
            res = run_standard_pt(
                formula, parse_schedule(cfg.pt_schedule), cfg.pt_sweeps, cfg.seed,
                trace=cfg.trace or bool(args.trace_file),
            )
        solved, energy, iters, budget = res.solved, res.best_energy, res.total_iterations, res.budget
        assignment = res.best_assignment
        if args.trace_file:
            with open(args.trace_file, "w") as fh:
                write_trace(res.trace, fh)
    else:
        if alg == "walksat":
            rec, state = walksat_trial(formula, cfg.eta, cfg.walksat_cap, cfg.seed)
            states = [state]
        else:
            rec, states = pa_walksat_trial(formula, parse_schedule(cfg.schedule).temps, cfg.pa_cap, cfg.seed)
        solved, iters, budget = rec.solved, rec.iterations, rec.budget
        final = min(states, key=lambda st: st.energy)
        # baselines report where their replicas stopped, not a running minimum
        energy = final.energy
        assignment = final.assignment
    print(f"s {'SATISFIABLE' if solved else 'UNKNOWN'}")
    print(f"c algorithm {alg}")
    print(f"c best_energy {energy}")
    print(f"c iterations {iters}")
    print(f"c budget {budget}")
    if args.print_assignment and assignment is not None:
        lits = [str(v + 1) if b else str(-(v + 1)) for v, b in enumerate(assignment)]
        print("v " + " ".join(lits) + " 0")
    return EXIT_OK if solved else EXIT_UNSOLVED


def cmd_bench(args) -> int:
    extra = {}
    instances = list(args.instances or []) + list(args.generate or [])
    if instances:
        extra["instances"] = instances
    if args.algorithms:
        extra["algorithms"] = args.algorithms
    if args.gamma:
        extra["gamma"] = args.gamma
    cfg = _build_config(args, extra)
    if not cfg.instances:
        raise UsageError("no instances given (use positional paths, --generate or the config file)")
    try:
        rows = run_benchmark(cfg)
    except (ValueError, OSError) as exc:
        raise UsageError(str(exc)) from None
    print(f"wrote {len(rows)} rows to {Path(cfg.out_dir) / 'results.csv'}")
    return EXIT_OK


def cmd_generate(args) -> int:
    if args.preset:
        n, m, k = GENERATOR_PRESETS[args.preset]
    else:
        n, m, k = args.n, args.m, args.k
        if None in (n, m, k):
            raise UsageError("give --preset or all of --n --m --k")
    seed = args.seed if args.seed is not None else int(_env("SEED") or 0)
    out_dir = Path(args.out_dir or _env("OUT_DIR") or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = args.preset or f"k{k}-n{n}-m{m}"
    for s in range(seed, seed + args.count):
        spec = PlantedSpec(n, m, k, s)
        formula, planted = generate_planted(spec)
        base = out_dir / f"{stem}-s{s}"
        base.with_suffix(".cnf").write_bytes(
            write_dimacs(formula, comments=[f"planted k-SAT n={n} m={m} k={k} seed={s}"])
        )
        with open(base.with_suffix(".json"), "w") as fh:
            json.dump(sidecar(spec, planted), fh, sort_keys=True)
            fh.write("\n")
        print(base.with_suffix(".cnf"))
    return EXIT_OK


def cmd_tune(args) -> int:
    if args.schedule:
        initial = parse_schedule(args.schedule)
    else:
        initial = inverse_linear_schedule(args.kappa or 7, 0.1, 1.0)
    try:
        probes = [read_dimacs(p) for p in args.probe]
    except (OSError, CNFError) as exc:
        raise UsageError(str(exc)) from None
    seed = args.seed if args.seed is not None else int(_env("SEED") or 0)
    tuned = tune_schedule(
        initial, probes, KernelKind.WALKSAT, args.steps_per_episode, args.episodes, seed,
        repeats=args.repeats, max_iterations=args.max_iterations,
    )
    text = tuned.to_json()
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return EXIT_OK


def cmd_energy(args) -> int:
    overrides = {}
    if args.q is not None:
        overrides["q"] = args.q
    if args.vpu_stat_mode:
        overrides["vpu_stat_mode"] = energy_mod.VpuStaticMode(args.vpu_stat_mode)
    try:
        params = energy_mod.preset(args.preset, **overrides)
    except KeyError as exc:
        raise UsageError(str(exc.args[0])) from None
    report = energy_mod.overhead(params).to_dict()
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return EXIT_OK


def cmd_audit(args) -> int:
    out_dir = args.out_dir or _env("OUT_DIR")
    if not out_dir:
        raise UsageError("--out-dir is required")
    try:
        problems = audit(out_dir)
    except OSError as exc:
        raise UsageError(str(exc)) from None
    for p in problems:
        print(p)
    print("audit ok" if not problems else f"audit found {len(problems)} mismatches")
    return EXIT_OK if not problems else EXIT_MISMATCH


def cmd_trace_stats(args) -> int:
    try:
        with open(args.trace_path) as fh:
            trace = read_trace(fh)
    except OSError as exc:
        raise UsageError(str(exc)) from None
    slot = args.successful_slot
    if slot is None:
        slot = infer_successful_slot(trace)
    stats = trace_analytics(trace, slot)
    print(
        json.dumps(
            {
                "episodes": len(trace),
                "successful_slot": slot,
                "successful_configuration": stats.successful_configuration,
                "distinct_temperatures": stats.distinct_temperatures,
                "traversal": [list(t) for t in stats.traversal],
                "slot_energies": [list(e) for e in stats.slot_energies],
            },
            indent=2,
        )
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ptic-sat", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one DIMACS instance")
    p.add_argument("instance")
    p.add_argument("--algorithm", choices=["walksat", "pa-walksat", "ptic-walksat", "standard-pt"], default="ptic-walksat")
    p.add_argument("--print-assignment", action="store_true")
    p.add_argument("--trace-file", help="write the replica trace (JSONL) here")
    _global_flags(p)
    _algorithm_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bench", help="run the benchmark suite")
    p.add_argument("instances", nargs="*", help="DIMACS files")
    p.add_argument("--generate", action="append", metavar="PRESET:COUNT[:FIRST_SEED]")
    p.add_argument("--algorithms", nargs="+")
    p.add_argument("--gamma", type=int)
    _global_flags(p)
    _algorithm_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("generate", help="write planted k-SAT instances")
    p.add_argument("--preset", choices=sorted(GENERATOR_PRESETS))
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("tune", help="balance exchange rates of a schedule")
    p.add_argument("--schedule")
    p.add_argument("--kappa", type=int)
    p.add_argument("--probe", nargs="+", required=True, help="probe DIMACS files")
    p.add_argument("-Q", "--steps-per-episode", type=int, default=6270)
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--max-iterations", type=int, default=50)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("energy", help="exchange overhead of an accelerator preset")
    p.add_argument("preset", choices=sorted(energy_mod.PRESETS))
    p.add_argument("--q", type=int)
    p.add_argument("--vpu-stat-mode", choices=[m.value for m in energy_mod.VpuStaticMode])
    p.add_argument("--out")
    p.set_defaults(func=cmd_energy)

    p = sub.add_parser("audit", help="recompute result rows from archived runs")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("trace-stats", help="traversal statistics of a replica trace")
    p.add_argument("trace_path")
    p.add_argument("--successful-slot", type=int)
    p.set_defaults(func=cmd_trace_stats)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"ptic-sat: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
