"""Compiled inner loops.

Everything here works on plain arrays so it can be jitted once and cached.

Literal code = 2 * var + neg, with ``var`` 0-based and ``neg`` = 1 for a
negated occurrence.  A literal is true iff ``assign[var] != neg``.

Formula arrays ``fa`` = (lit_var, lit_neg, clause_ptr, occ_ptr, occ_clause).
State arrays ``sa`` = (assign, sat_count, viol, viol_pos, meta) where
``viol[:meta[0]]`` lists the violated clause ids and ``viol_pos[c]`` is the
position of ``c`` in that list or -1.
"""

import math

import numba

_jit = numba.njit(cache=True, nogil=True)

WALKSAT = 0
METROPOLIS = 1


@_jit
def recount(fa, sa):
    lit_var, lit_neg, clause_ptr, occ_ptr, occ_clause = fa
    assign, sat_count, viol, viol_pos, meta = sa
    nviol = 0
    for c in range(clause_ptr.size - 1):
        cnt = 0
        for p in range(clause_ptr[c], clause_ptr[c + 1]):
            if assign[lit_var[p]] != lit_neg[p]:
                cnt += 1
        sat_count[c] = cnt
        if cnt == 0:
            viol[nviol] = c
            viol_pos[c] = nviol
            nviol += 1
        else:
            viol_pos[c] = -1
    meta[0] = nviol


@_jit
def flip(v, fa, sa):
    occ_ptr = fa[3]
    occ_clause = fa[4]
    assign, sat_count, viol, viol_pos, meta = sa
    a = assign[v]
    was_true = 2 * v + 1 - a
    now_true = 2 * v + a
    assign[v] = 1 - a
    nviol = meta[0]
    for p in range(occ_ptr[was_true], occ_ptr[was_true + 1]):
        c = occ_clause[p]
        sat_count[c] -= 1
        if sat_count[c] == 0:
            viol[nviol] = c
            viol_pos[c] = nviol
            nviol += 1
    for p in range(occ_ptr[now_true], occ_ptr[now_true + 1]):
        c = occ_clause[p]
        sat_count[c] += 1
        if sat_count[c] == 1:
            # swap-remove keeps the violated list dense for O(1) sampling
            i = viol_pos[c]
            last = viol[nviol - 1]
            viol[i] = last
            viol_pos[last] = i
            viol_pos[c] = -1
            nviol -= 1
    meta[0] = nviol


@_jit
def break_value(v, fa, sa):
    occ_ptr = fa[3]
    occ_clause = fa[4]
    assign = sa[0]
    sat_count = sa[1]
    code = 2 * v + 1 - assign[v]
    total = 0
    for p in range(occ_ptr[code], occ_ptr[code + 1]):
        if sat_count[occ_clause[p]] == 1:
            total += 1
    return total


@_jit
def make_value(v, fa, sa):
    occ_ptr = fa[3]
    occ_clause = fa[4]
    assign = sa[0]
    sat_count = sa[1]
    code = 2 * v + assign[v]
    total = 0
    for p in range(occ_ptr[code], occ_ptr[code + 1]):
        if sat_count[occ_clause[p]] == 0:
            total += 1
    return total


@_jit
def walksat_step(eta, rng, fa, sa):
    lit_var = fa[0]
    clause_ptr = fa[2]
    viol = sa[2]
    meta = sa[4]
    c = viol[rng.integers(0, meta[0])]
    start = clause_ptr[c]
    stop = clause_ptr[c + 1]
    # sentinel above any attainable break value (m + 1)
    best = clause_ptr.size
    best_pos = start
    for p in range(start, stop):
        z = break_value(lit_var[p], fa, sa)
        if best > z:
            best = z
            best_pos = p
    if rng.random() < eta:
        pos = start + rng.integers(0, stop - start)
    else:
        pos = best_pos
    v = lit_var[pos]
    flip(v, fa, sa)
    return v


@_jit
def mh_step(temperature, rng, fa, sa):
    n = sa[0].size
    v = rng.integers(0, n)
    delta = break_value(v, fa, sa) - make_value(v, fa, sa)
    if delta <= 0:
        flip(v, fa, sa)
        return True
    if rng.random() < math.exp(-delta / temperature):
        flip(v, fa, sa)
        return True
    return False


@_jit
def run_episode(kind, temperature, budget, rng, fa, sa):
    meta = sa[4]
    q = 0
    if kind == WALKSAT:
        while meta[0] > 0 and q < budget:
            walksat_step(temperature, rng, fa, sa)
            q += 1
    else:
        while meta[0] > 0 and q < budget:
            mh_step(temperature, rng, fa, sa)
            q += 1
    return q
