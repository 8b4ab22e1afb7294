import json

import pytest

from conftest import EXAMPLE_DIMACS
from ptic_sat import cli
from ptic_sat.cnf import read_dimacs
from ptic_sat.schedule import inverse_linear_schedule

ALGORITHMS = ["walksat", "pa-walksat", "ptic-walksat", "standard-pt"]


@pytest.fixture
def files(tmp_path):
    ex = tmp_path / "ex.cnf"
    ex.write_text(EXAMPLE_DIMACS)
    unsat = tmp_path / "unsat.cnf"
    unsat.write_text("p cnf 1 2\n1 0\n-1 0\n")
    return ex, unsat


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in ("SEED", "WORKERS", "PROFILE", "OUT_DIR", "CONFIG", "TRACE"):
        monkeypatch.delenv(cli.ENV_PREFIX + name, raising=False)


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def report(out):
    return dict(line[2:].split(" ", 1) for line in out.splitlines() if line.startswith("c "))


class TestSolve:
    def test_example_solved(self, capsys, files):
        code, out, _ = run(capsys, "solve", files[0], "--kappa", 2, "-Q", 100, "-S", 50, "--print-assignment")
        assert code == 0
        assert out.splitlines()[0] == "s SATISFIABLE"
        assert report(out)["best_energy"] == "0"
        vline = [line for line in out.splitlines() if line.startswith("v ")][0]
        lits = [int(t) for t in vline[2:].split()][:-1]
        assert read_dimacs(files[0]).evaluate([int(l > 0) for l in lits]) == 0

    @pytest.mark.parametrize("algorithm", ALGORITHMS)
    def test_unsat_exit_code(self, capsys, files, algorithm):
        code, out, _ = run(
            capsys, "solve", files[1], "--algorithm", algorithm, "-Q", 10, "-S", 5,
            "--walksat-cap", 200, "--pa-cap", 50, "--pt-sweeps", 20,
        )
        assert code == cli.EXIT_UNSOLVED == 10
        assert report(out)["best_energy"] == "1"

    @pytest.mark.parametrize("algorithm", ALGORITHMS)
    def test_every_algorithm_solves_example(self, capsys, files, algorithm):
        code, out, _ = run(capsys, "solve", files[0], "--algorithm", algorithm)
        assert code == 0 and report(out)["best_energy"] == "0"

    def test_iterations_follow_episode_accounting(self, capsys, files):
        code, out, _ = run(capsys, "solve", files[1], "--kappa", 3, "-Q", 10, "-S", 5)
        assert report(out)["iterations"] == "150"

    def test_missing_file(self, capsys, tmp_path):
        code, _, err = run(capsys, "solve", tmp_path / "nope.cnf")
        assert code == 2 and "cannot read" in err

    def test_parse_error(self, capsys, tmp_path):
        bad = tmp_path / "bad.cnf"
        bad.write_text("p cnf 2 1\n1 3 0\n")
        code, _, err = run(capsys, "solve", bad)
        assert code == 2 and "line 2" in err

    def test_kappa_schedule_conflict(self, capsys, files):
        code, _, err = run(capsys, "solve", files[0], "--kappa", 3, "--schedule", "paper-tuned-7")
        assert code == 2

    def test_bad_config_file(self, capsys, files, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text("[1, 2]")
        assert run(capsys, "solve", files[0], "--config", cfg)[0] == 2
        cfg.write_text('{"unknown_key": 1}')
        assert run(capsys, "solve", files[0], "--config", cfg)[0] == 2

    def test_trace_file(self, capsys, files, tmp_path):
        trace = tmp_path / "t.jsonl"
        code, _, _ = run(capsys, "solve", files[1], "--kappa", 3, "-Q", 5, "-S", 4, "--trace-file", trace)
        assert code == 10
        events = [json.loads(line) for line in trace.read_text().splitlines()]
        assert [e["episode"] for e in events] == [1, 2, 3, 4]
        code, out, _ = run(capsys, "trace-stats", trace, "--successful-slot", 0)
        stats = json.loads(out)
        assert code == 0 and stats["episodes"] == 4 and 1 <= stats["distinct_temperatures"] <= 3


class TestPrecedence:
    def build(self, argv):
        args = cli.build_parser().parse_args(argv)
        return cli._build_config(args)

    def test_layers(self, tmp_path, monkeypatch):
        cfg_file = tmp_path / "c.json"
        cfg_file.write_text(json.dumps({"seed": 5, "gamma": 4, "profile": "paper", "workers": 2}))
        base = ["bench", "--config", str(cfg_file)]
        cfg = self.build(base)
        assert (cfg.profile, cfg.seed, cfg.gamma, cfg.workers, cfg.steps_per_episode) == ("paper", 5, 4, 2, 6270)
        monkeypatch.setenv("PTIC_SAT_SEED", "6")
        monkeypatch.setenv("PTIC_SAT_PROFILE", "desk")
        cfg = self.build(base)
        assert (cfg.profile, cfg.seed, cfg.gamma, cfg.steps_per_episode) == ("desk", 6, 4, 1000)
        cfg = self.build(base + ["--seed", "7", "--profile", "paper"])
        assert (cfg.profile, cfg.seed) == ("paper", 7)

    def test_config_from_env(self, tmp_path, monkeypatch):
        cfg_file = tmp_path / "c.json"
        cfg_file.write_text(json.dumps({"gamma": 9}))
        monkeypatch.setenv("PTIC_SAT_CONFIG", str(cfg_file))
        monkeypatch.setenv("PTIC_SAT_WORKERS", "3")
        monkeypatch.setenv("PTIC_SAT_TRACE", "yes")
        cfg = self.build(["bench"])
        assert (cfg.gamma, cfg.workers, cfg.trace) == (9, 3, True)

    def test_bad_env(self, capsys, monkeypatch, files):
        monkeypatch.setenv("PTIC_SAT_SEED", "abc")
        assert run(capsys, "solve", files[0])[0] == 2

    def test_kappa_builds_inverse_linear(self):
        cfg = self.build(["bench", "--kappa", "5"])
        assert cfg.schedule == "inverse-linear:5:0.1:1.0"


class TestOtherCommands:
    def test_generate(self, capsys, tmp_path):
        code, out, _ = run(capsys, "generate", "--preset", "group-4", "--seed", 7, "--out-dir", tmp_path)
        assert code == 0
        f = read_dimacs(tmp_path / "group-4-s7.cnf")
        side = json.loads((tmp_path / "group-4-s7.json").read_text())
        assert side["seed"] == 7 and f.evaluate(side["planted_assignment"]) == 0

    def test_generate_custom_and_count(self, capsys, tmp_path):
        code, out, _ = run(capsys, "generate", "--n", 10, "--m", 30, "--k", 3, "--seed", 1, "--count", 3, "--out-dir", tmp_path)
        assert code == 0 and len(out.splitlines()) == 3
        assert run(capsys, "generate", "--n", 10)[0] == 2

    def test_energy(self, capsys, tmp_path):
        out_file = tmp_path / "e.json"
        code, out, _ = run(capsys, "energy", "pubo-paper", "--out", out_file)
        rep = json.loads(out)
        assert code == 0 and rep["reported_fraction"] == pytest.approx(0.6615, abs=1e-4)
        assert json.loads(out_file.read_text()) == rep
        code, out, _ = run(capsys, "energy", "camsat-paper", "--q", 100, "--vpu-stat-mode", "per-iteration")
        rep = json.loads(out)
        assert rep["q"] == 100 and rep["reported_fraction"] is None and rep["vpu_stat_mode"] == "per-iteration"

    def test_tune(self, capsys, tmp_path):
        run(capsys, "generate", "--preset", "group-3", "--seed", 2, "--out-dir", tmp_path)
        out_file = tmp_path / "sched.json"
        code, _, _ = run(
            capsys, "tune", "--kappa", 7, "--probe", tmp_path / "group-3-s2.cnf", "-Q", 200,
            "--episodes", 10, "--repeats", 1, "--max-iterations", 3, "--out", out_file,
        )
        assert code == 0
        temps = json.loads(out_file.read_text())
        initial = inverse_linear_schedule(7, 0.1, 1.0)
        assert len(temps) == 7 and temps[0] == initial[0] and temps[-1] == initial[-1]
        assert all(a > b for a, b in zip(temps, temps[1:]))

    def test_bench_and_audit(self, capsys, tmp_path, files):
        out_dir = tmp_path / "b"
        code, _, _ = run(
            capsys, "bench", files[0], "--generate", "group-3:1", "--gamma", 2, "--out-dir", out_dir,
            "-Q", 100, "-S", 20, "--walksat-cap", 5000, "--pa-cap", 2000, "--trace",
        )
        assert code == 0
        assert run(capsys, "audit", "--out-dir", out_dir)[0] == 0
        lines = (out_dir / "results.csv").read_text().splitlines()
        lines[2] = lines[2].replace(",2,", ",1,", 1)
        (out_dir / "results.csv").write_text("\n".join(lines) + "\n")
        code, out, _ = run(capsys, "audit", "--out-dir", out_dir)
        assert code == 1 and "mismatch" in out

    def test_bench_without_instances(self, capsys, tmp_path):
        assert run(capsys, "bench", "--out-dir", tmp_path)[0] == 2

    def test_audit_missing_dir(self, capsys, tmp_path):
        assert run(capsys, "audit", "--out-dir", tmp_path / "none")[0] == 2
