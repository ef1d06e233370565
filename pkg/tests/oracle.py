"""Independent brute-force references built on itertools.product and math.fsum.

Nothing here calls the package's enumeration or moment code; instances are
read only through their laws and kernel tables.
"""
import itertools
import math
from collections import defaultdict


def coordinates(inst):
    """Independent coordinates as (slot, index) pairs; undecoupled slots share one coordinate."""
    if inst.decoupled:
        return [(j, i) for j in range(inst.m) for i in range(inst.n)]
    return [(0, i) for i in range(inst.n)]


def configurations(inst, coords=None):
    """Yield (probability, {coordinate: atom position}) over the joint atom grid."""
    coords = coordinates(inst) if coords is None else coords
    ranges = [range(len(inst.law(j, i))) for j, i in coords]
    for choice in itertools.product(*ranges):
        prob = 1.0
        for (j, i), a in zip(coords, choice):
            prob *= float(inst.law(j, i).probs[a])
        yield prob, dict(zip(coords, choice))


def _atom(inst, assign, j, i):
    return assign[(j, i)] if inst.decoupled else assign[(0, i)]


def ustat_value(inst, assign):
    terms = []
    for idx in inst.indices():
        pos = tuple(_atom(inst, assign, j, i) for j, i in enumerate(idx))
        terms.append(float(inst.table(idx)[pos]))
    return math.fsum(terms)


def ustat_law(inst):
    """dict value -> probability, values rounded to 12 significant digits."""
    law = defaultdict(float)
    for prob, assign in configurations(inst):
        law[float(f"{ustat_value(inst, assign):.12g}")] += prob
    return dict(law)


def ustat_moment(inst, p):
    return math.fsum(prob * abs(ustat_value(inst, assign)) ** p
                     for prob, assign in configurations(inst))


def ustat_tail(inst, x, slack=1e-9):
    return math.fsum(prob for prob, assign in configurations(inst)
                     if abs(ustat_value(inst, assign)) >= x - slack)


def _block_sums(inst, J):
    """For each J-block configuration: (prob, {i_J: list of (inner prob, sum_{i_Jc} h_i)})."""
    Jc = [j for j in range(inst.m) if j not in J]
    outer = [(j, i) for j in J for i in range(inst.n)]
    inner = [(j, i) for j in Jc for i in range(inst.n)]
    for prob, a_out in configurations(inst, outer):
        per_index = {}
        for iJ in itertools.product(range(inst.n), repeat=len(J)):
            rows = []
            for q, a_in in configurations(inst, inner):
                assign = {**a_out, **a_in}
                total = []
                for iJc in itertools.product(range(inst.n), repeat=len(Jc)):
                    idx = [0] * inst.m
                    for a, j in enumerate(J):
                        idx[j] = iJ[a]
                    for a, j in enumerate(Jc):
                        idx[j] = iJc[a]
                    pos = tuple(assign[(j, idx[j])] for j in range(inst.m))
                    total.append(float(inst.table(tuple(idx))[pos]))
                rows.append((q, math.fsum(total)))
            per_index[iJ] = rows
        yield prob, per_index


def mixed_moment(inst, J, p):
    """sum_{i_J} E_J (sum_{i_Jc} E_Jc h_i)^p for nonnegative inner sums."""
    out = []
    for prob, per_index in _block_sums(inst, J):
        vals = [math.fsum(q * s for q, s in rows) for rows in per_index.values()]
        out.append(prob * math.fsum(v ** p for v in vals))
    return math.fsum(out)


def max_mixed_moment(inst, J, p):
    out = []
    for prob, per_index in _block_sums(inst, J):
        vals = [math.fsum(q * s for q, s in rows) for rows in per_index.values()]
        out.append(prob * max(v ** p for v in vals))
    return math.fsum(out)


def lr_mixed_moment(inst, J, p, r):
    out = []
    for prob, per_index in _block_sums(inst, J):
        vals = [math.fsum(q * s ** r for q, s in rows) for rows in per_index.values()]
        out.append(prob * max(v ** (p / r) for v in vals))
    return math.fsum(out)


def rel_close(a, b, rel=1e-9, abs_tol=1e-12):
    return abs(a - b) <= rel * max(abs(a), abs(b)) + abs_tol
