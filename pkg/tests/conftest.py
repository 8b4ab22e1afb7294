import time

import numpy as np
import pytest

from ptic_sat.cnf import Formula

_criteria: dict[str, dict] = {}


def pytest_runtest_setup(item):
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        cid, title = mark.args
        entry = _criteria.setdefault(cid, {"title": title, "ok": True, "seconds": 0.0, "tests": 0})
        entry["tests"] += 1
        item._criterion_id = cid
        item._criterion_start = time.perf_counter()


def pytest_runtest_makereport(item, call):
    cid = getattr(item, "_criterion_id", None)
    if cid is None:
        return
    if call.when == "call":
        _criteria[cid]["seconds"] += time.perf_counter() - item._criterion_start
    if call.excinfo is not None and not call.excinfo.errisinstance(pytest.skip.Exception):
        _criteria[cid]["ok"] = False


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_criteria, key=lambda c: int(c.lstrip("AC"))):
        e = _criteria[cid]
        status = "PASS" if e["ok"] else "FAIL"
        terminalreporter.write_line(f"{status} {cid:<5} {e['title']}  ({e['tests']} tests, {e['seconds']:.1f}s)")


# worked 4-variable example: (x1 | ~x2 | x4) & (x2 | ~x3) & (x3 | x4) & (~x1 | ~x3)
EXAMPLE_CLAUSES = [[1, -2, 4], [2, -3], [3, 4], [-1, -3]]
EXAMPLE_DIMACS = "p cnf 4 4\n1 -2 4 0\n2 -3 0\n3 4 0\n-1 -3 0"


@pytest.fixture
def example():
    return Formula(4, EXAMPLE_CLAUSES)


@pytest.fixture
def unsat():
    return Formula(1, [[1], [-1]])


def naive_violated(clauses, assignment):
    """Violated clause ids by direct evaluation of every literal."""
    out = []
    for cid, clause in enumerate(clauses):
        if not any((assignment[abs(l) - 1] == 1) == (l > 0) for l in clause):
            out.append(cid)
    return out


def naive_break_make(clauses, assignment, var):
    """Break and make of ``var`` (1-based) by flipping a copy and re-evaluating."""
    before = set(naive_violated(clauses, assignment))
    flipped = list(assignment)
    flipped[var - 1] ^= 1
    after = set(naive_violated(clauses, flipped))
    return len(after - before), len(before - after)


def random_clauses(rng: np.random.Generator, n: int, m: int, kmax: int = 4) -> list[list[int]]:
    clauses = []
    for _ in range(m):
        k = int(rng.integers(1, min(kmax, n) + 1))
        vs = rng.choice(n, size=k, replace=False) + 1
        signs = rng.integers(0, 2, size=k) * 2 - 1
        clauses.append([int(v * s) for v, s in zip(vs, signs)])
    return clauses
