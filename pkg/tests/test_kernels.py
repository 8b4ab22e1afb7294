import math

import numpy as np
import pytest

from conftest import naive_break_make, naive_violated, random_clauses
from ptic_sat.cnf import Formula, init_state
from ptic_sat.generator import PlantedSpec, generate_planted
from ptic_sat.kernels import (
    EpisodeOutcome,
    KernelKind,
    derive_seed,
    make_rng,
    mh_step,
    random_assignment,
    run_episode,
    walksat_step,
)


class ReferenceWalker:
    """Plain-Python WalkSAT/Metropolis replay built on full re-evaluation.

    Keeps the violated clauses in the same dense order as the fast state
    (ascending ids initially; newly violated ids appended in ascending
    order, satisfied ids swap-removed in ascending order) so that it
    consumes random draws identically.
    """

    def __init__(self, clauses, assignment):
        self.clauses = clauses
        self.x = list(assignment)
        self.viol = naive_violated(clauses, self.x)

    def _flip(self, v):
        before = set(naive_violated(self.clauses, self.x))
        self.x[v - 1] ^= 1
        after = set(naive_violated(self.clauses, self.x))
        self.viol.extend(sorted(after - before))
        for c in sorted(before - after):
            i = self.viol.index(c)
            self.viol[i] = self.viol[-1]
            self.viol.pop()

    def walksat(self, eta, rng):
        c = self.viol[rng.integers(0, len(self.viol))]
        clause = self.clauses[c]
        breaks = [naive_break_make(self.clauses, self.x, abs(l))[0] for l in clause]
        greedy = breaks.index(min(breaks))
        if rng.random() < eta:
            pos = int(rng.integers(0, len(clause)))
        else:
            pos = greedy
        v = abs(clause[pos])
        self._flip(v)
        return v

    def mh(self, temperature, rng):
        v = int(rng.integers(0, len(self.x))) + 1
        b, m = naive_break_make(self.clauses, self.x, v)
        delta = b - m
        if delta <= 0 or rng.random() < math.exp(-delta / temperature):
            self._flip(v)
            return True
        return False


def _mh_test_state():
    # at (1,1) flipping either variable violates exactly two clauses
    f = Formula(2, [[1], [2], [1, -2], [2, -1]])
    return init_state(f, [1, 1])


class TestStreams:
    def test_same_key_same_stream(self):
        assert np.array_equal(make_rng(7, 0, 3).random(8), make_rng(7, 0, 3).random(8))

    def test_distinct_keys_distinct_streams(self):
        draws = {tuple(make_rng(7, *key).integers(0, 2**62, 4)) for key in [(0, 0), (0, 1), (1, 0), (1,), ("a",), ("b",)]}
        assert len(draws) == 6
        assert make_rng(7, 0).random() != make_rng(8, 0).random()

    def test_derive_seed(self):
        assert derive_seed(1, "inst", "alg", 0) == derive_seed(1, "inst", "alg", 0)
        seeds = {derive_seed(1, "inst", "alg", r) for r in range(200)}
        assert len(seeds) == 200
        assert all(0 <= s < 2**64 for s in seeds)

    def test_negative_key_rejected(self):
        with pytest.raises(ValueError):
            make_rng(1, -1)


class TestWalkSatStep:
    def test_greedy_on_example(self, example):
        s = init_state(example, [0, 0, 0, 0])
        assert walksat_step(s, 0.0, make_rng(0)) == 4
        assert s.energy == 0

    def test_greedy_limit_from_above(self, example):
        # eta -> 0+: the coin essentially never lands on the walk branch
        for seed in range(50):
            s = init_state(example, [0, 0, 0, 0])
            assert walksat_step(s, 1e-12, make_rng(seed)) == 4

    def test_single_literal_clause(self):
        s = init_state(Formula(1, [[1]]), [0])
        assert walksat_step(s, 0.5, make_rng(1)) == 1
        assert s.energy == 0

    def test_full_walk_is_uniform_over_clause(self):
        base = init_state(Formula(3, [[1, 2, 3]]), [0, 0, 0])
        rng = make_rng(11)
        counts = np.zeros(3)
        trials = 10_000
        for _ in range(trials):
            counts[walksat_step(base.copy(), 1.0, rng) - 1] += 1
        chi2 = float(((counts - trials / 3) ** 2 / (trials / 3)).sum())
        # chi-square with 2 dof: survival function is exp(-x / 2)
        assert math.exp(-chi2 / 2) > 0.01

    def test_requires_violated_clause(self, example):
        with pytest.raises(ValueError):
            walksat_step(init_state(example, [0, 1, 0, 1]), 0.5, make_rng(0))

    @pytest.mark.parametrize("eta", [-0.1, 1.5])
    def test_eta_range(self, example, eta):
        with pytest.raises(ValueError):
            walksat_step(init_state(example, [0] * 4), eta, make_rng(0))

    def test_greedy_never_exceeds_clause_minimum(self):
        rng_f = np.random.default_rng(5)
        steps = 0
        while steps < 1000:
            n = int(rng_f.integers(3, 10))
            clauses = random_clauses(rng_f, n, int(rng_f.integers(5, 30)))
            s = init_state(Formula(n, clauses), rng_f.integers(0, 2, n))
            rng = make_rng(steps)
            for _ in range(40):
                if s.energy == 0:
                    break
                allowed = set()
                for c in s.violated:
                    breaks = [s.break_value(abs(l)) for l in clauses[c]]
                    allowed.add(abs(clauses[c][breaks.index(min(breaks))]))
                before = s.assignment.copy()
                v = walksat_step(s, 0.0, rng)
                assert v in allowed
                assert int((before != s.assignment).sum()) == 1
                steps += 1

    def test_trajectory_matches_reference(self):
        rng_f = np.random.default_rng(21)
        for case in range(40):
            n = int(rng_f.integers(3, 12))
            clauses = random_clauses(rng_f, n, int(rng_f.integers(5, 40)))
            a = rng_f.integers(0, 2, n).tolist()
            eta = float(rng_f.choice([0.0, 0.2, 0.5, 1.0]))
            fast = init_state(Formula(n, clauses), a)
            ref = ReferenceWalker(clauses, a)
            r1, r2 = make_rng(case, 9), make_rng(case, 9)
            for _ in range(60):
                if fast.energy == 0:
                    assert not ref.viol
                    break
                assert walksat_step(fast, eta, r1) == ref.walksat(eta, r2)
                assert fast.violated == ref.viol
                assert fast.assignment.tolist() == ref.x


class TestMetropolisStep:
    @pytest.mark.parametrize(
        "clauses, start",
        [([[1], [2]], [0, 0]), ([[1, 2]], [1, 1])],
        ids=["delta-negative", "delta-zero"],
    )
    def test_non_uphill_always_accepted(self, clauses, start):
        base = init_state(Formula(2, clauses), start)
        rng = make_rng(3)
        for _ in range(500):
            s = base.copy()
            assert mh_step(s, 1e-9, rng)
            assert int((s.assignment != base.assignment).sum()) == 1

    def test_uphill_acceptance_rate(self):
        base = _mh_test_state()
        assert base.break_value(1) - base.make_value(1) == 2
        assert base.break_value(2) - base.make_value(2) == 2
        rng = make_rng(17)
        trials = 100_000
        hits = 0
        s = base.copy()
        for _ in range(trials):
            if mh_step(s, 1.0, rng):
                hits += 1
                s = base.copy()
        assert abs(hits / trials - math.exp(-2)) < 0.01

    def test_hot_limit_accepts_everything(self):
        base = _mh_test_state()
        rng = make_rng(4)
        trials = 10_000
        hits = 0
        for _ in range(trials):
            hits += mh_step(base.copy(), 1e6, rng)
        assert hits / trials > 0.999

    def test_temperature_positive(self, example):
        with pytest.raises(ValueError):
            mh_step(init_state(example, [0] * 4), 0.0, make_rng(0))

    def test_trajectory_matches_reference(self):
        rng_f = np.random.default_rng(8)
        for case in range(30):
            n = int(rng_f.integers(2, 10))
            clauses = random_clauses(rng_f, n, int(rng_f.integers(3, 30)))
            a = rng_f.integers(0, 2, n).tolist()
            temp = float(rng_f.choice([0.1, 0.5, 2.0]))
            fast = init_state(Formula(n, clauses), a)
            ref = ReferenceWalker(clauses, a)
            r1, r2 = make_rng(case, 2), make_rng(case, 2)
            for _ in range(80):
                before = fast.assignment.copy()
                assert mh_step(fast, temp, r1) == ref.mh(temp, r2)
                assert int((before != fast.assignment).sum()) <= 1
                assert fast.assignment.tolist() == ref.x
                assert fast.violated == ref.viol


class TestEpisode:
    def test_solved_input_takes_no_steps(self, example):
        s = init_state(example, [0, 1, 0, 1])
        out = run_episode(s, KernelKind.WALKSAT, 0.5, 100, make_rng(0))
        assert out == EpisodeOutcome(0, True, 0)

    def test_example_always_solved(self, example):
        for seed in range(100):
            s = init_state(example, [0, 0, 0, 0])
            out = run_episode(s, KernelKind.WALKSAT, 0.5, 1000, make_rng(seed))
            assert out.solved and out.steps_taken >= 1 and out.final_energy == 0
            assert example.evaluate(s.assignment) == 0

    def test_unsat_exhausts_budget(self, unsat):
        for kernel, temp in [(KernelKind.WALKSAT, 0.5), (KernelKind.METROPOLIS_HASTINGS, 1.0)]:
            s = init_state(unsat, [0])
            out = run_episode(s, kernel, temp, 50, make_rng(1))
            assert out == EpisodeOutcome(50, False, 1)

    def test_deterministic(self):
        f, _ = generate_planted(PlantedSpec(30, 120, 3, 4))
        outs = []
        for _ in range(2):
            rng = make_rng(99, 0, 0)
            s = init_state(f, random_assignment(rng, f.num_vars))
            outs.append((run_episode(s, KernelKind.WALKSAT, 0.3, 500, rng), s.assignment.tolist()))
        assert outs[0] == outs[1]

    def test_episode_matches_stepwise(self):
        f, _ = generate_planted(PlantedSpec(40, 170, 3, 2))
        for kernel, temp, step in [
            (KernelKind.WALKSAT, 0.4, walksat_step),
            (KernelKind.METROPOLIS_HASTINGS, 0.7, mh_step),
        ]:
            a = make_rng(1).integers(0, 2, 40)
            s1, s2 = init_state(f, a), init_state(f, a)
            r1, r2 = make_rng(6), make_rng(6)
            out = run_episode(s1, kernel, temp, 300, r1)
            q = 0
            while s2.energy > 0 and q < 300:
                step(s2, temp, r2)
                q += 1
            assert out.steps_taken == q
            assert s1 == s2

    def test_planted_3sat_solved(self):
        solved = 0
        for seed in range(100):
            f, _ = generate_planted(PlantedSpec(50, 150, 3, seed))
            rng = make_rng(seed, 0, 0)
            s = init_state(f, random_assignment(rng, 50))
            solved += run_episode(s, KernelKind.WALKSAT, 0.5, 100_000, rng).solved
        assert solved >= 99

    def test_parameter_checks(self, example):
        s = init_state(example, [0] * 4)
        with pytest.raises(ValueError):
            run_episode(s, KernelKind.WALKSAT, 0.5, 0, make_rng(0))
        with pytest.raises(ValueError):
            run_episode(s, KernelKind.WALKSAT, 1.5, 10, make_rng(0))
        with pytest.raises(ValueError):
            run_episode(s, KernelKind.METROPOLIS_HASTINGS, -1.0, 10, make_rng(0))
