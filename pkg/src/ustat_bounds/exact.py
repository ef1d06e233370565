"""Exact enumeration of U-statistic laws and of the mixed-moment functionals.

Every quantity is computed by summing over the full finite product space, in
double precision with a fixed reduction order (results do not depend on the
number of worker threads).
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from .model import (DiscreteDistribution, EmpiricalClass, UStatInstance,
                    multi_indices)

ENUMERATION_CAP = 10**7
CHUNK = 1 << 16
MERGE_ATOL = 1e-12
NEG_TOL = 1e-12


def resolve_cap(cap: int | None) -> int:
    """``cap`` itself, or the module default ``ENUMERATION_CAP`` when None."""
    return ENUMERATION_CAP if cap is None else int(cap)


def set_enumeration_cap(cap: int) -> int:
    """Change the default configuration cap; returns the previous value."""
    global ENUMERATION_CAP
    if cap < 1:
        raise ValueError("cap must be positive")
    old, ENUMERATION_CAP = ENUMERATION_CAP, int(cap)
    return old


class EnumerationInfeasible(RuntimeError):
    def __init__(self, count: int, cap: int):
        self.count = count
        self.cap = cap
        super().__init__(f"enumeration infeasible: {count} configurations exceed cap {cap}")


class NegativeInnerSum(ValueError):
    pass


class FiniteDistribution:
    """Exact law of a real random variable: sorted distinct values, positive probs."""

    __slots__ = ("values", "probs")

    def __init__(self, values, probs):
        v = np.asarray(values, dtype=float)
        p = np.asarray(probs, dtype=float)
        v.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "probs", p)

    def __setattr__(self, name, value):
        raise AttributeError("FiniteDistribution is immutable")

    @classmethod
    def from_pairs(cls, values, probs, atol: float = MERGE_ATOL) -> "FiniteDistribution":
        """Merge (value, prob) pairs: sort, add up values within ``atol`` of a group start."""
        values = np.asarray(values, dtype=float).ravel()
        probs = np.asarray(probs, dtype=float).ravel()
        keep = probs > 0
        values, probs = values[keep], probs[keep]
        u, inv = np.unique(values, return_inverse=True)
        w = np.bincount(inv.ravel(), weights=probs, minlength=u.size)
        return cls(*_merge_sorted(u, w, atol))

    @classmethod
    def point_mass(cls, value: float) -> "FiniteDistribution":
        return cls([float(value)], [1.0])

    @classmethod
    def from_law(cls, law: DiscreteDistribution) -> "FiniteDistribution":
        return cls.from_pairs(law.atoms, law.probs)

    def __len__(self):
        return self.values.size

    def __eq__(self, other):
        if not isinstance(other, FiniteDistribution):
            return NotImplemented
        return np.array_equal(self.values, other.values) and np.array_equal(self.probs, other.probs)

    def __repr__(self):
        body = ", ".join(f"{v:g}: {p:g}" for v, p in zip(self.values[:8], self.probs[:8]))
        more = ", ..." if self.values.size > 8 else ""
        return f"FiniteDistribution({{{body}{more}}})"

    def total(self) -> float:
        return math.fsum(self.probs)

    def mean(self) -> float:
        return math.fsum(self.values * self.probs)

    def expect(self, fn: Callable[[np.ndarray], np.ndarray]) -> float:
        return math.fsum(np.asarray(fn(self.values), dtype=float) * self.probs)

    def abs(self) -> "FiniteDistribution":
        return FiniteDistribution.from_pairs(np.abs(self.values), self.probs)

    def map(self, fn) -> "FiniteDistribution":
        return FiniteDistribution.from_pairs(fn(self.values), self.probs)

    def tail(self, x: float, strict: bool = False, slack: float = 0.0) -> float:
        """P(X >= x) (or P(X > x) if strict); ``slack`` widens the comparison."""
        if strict:
            mask = self.values > x + slack
        else:
            mask = self.values >= x - slack
        return math.fsum(self.probs[mask])

    def tails(self, xs, strict: bool = False, slack: float = 0.0) -> np.ndarray:
        return np.array([self.tail(float(x), strict, slack) for x in np.atleast_1d(xs)])


def _merge_sorted(values: np.ndarray, probs: np.ndarray, atol: float):
    if values.size == 0:
        return values, probs
    starts = [0]
    anchor = values[0]
    for k in range(1, values.size):
        if values[k] - anchor > atol:
            starts.append(k)
            anchor = values[k]
    starts = np.asarray(starts)
    return values[starts], np.add.reduceat(probs, starts)


def moment(dist: FiniteDistribution, p: float, kind: str = "absolute") -> float:
    """E|X|^p (absolute) or E X^p (raw, integer p whenever X can be negative)."""
    if p <= 0:
        raise ValueError("p must be positive")
    if kind == "absolute":
        return math.fsum(dist.probs * np.abs(dist.values) ** p)
    if kind == "raw":
        if float(p).is_integer():
            return math.fsum(dist.probs * dist.values ** int(p))
        if np.any(dist.values < 0):
            raise ValueError("raw moment with non-integer p needs a nonnegative support")
        return math.fsum(dist.probs * dist.values ** p)
    raise ValueError(f"unknown moment kind {kind!r}")


# enumeration core ------------------------------------------------------------------


@dataclass
class EnumerationProblem:
    """Independent finite coordinates and kernel terms that read some of them.

    ``terms`` holds ``(coords, table)``; axis a of ``table`` is indexed by the atom
    of coordinate ``coords[a]``.  The enumerated variable is the sum of all terms.
    """

    probs: list
    terms: list

    def count(self) -> int:
        return math.prod(len(p) for p in self.probs)

    def flatten(self) -> dict:
        radices = np.array([len(p) for p in self.probs], dtype=np.int64)
        prob_off = np.zeros(len(self.probs), dtype=np.int64)
        if len(self.probs) > 1:
            prob_off[1:] = np.cumsum(radices)[:-1]
        probs_flat = (np.concatenate([np.asarray(p, float) for p in self.probs])
                      if self.probs else np.zeros(0))
        live = [(c, np.ascontiguousarray(t, dtype=float)) for c, t in self.terms if np.any(t != 0)]
        width = max((len(c) for c, _ in live), default=1)
        coords = np.zeros((len(live), width), dtype=np.int64)
        strides = np.zeros((len(live), width), dtype=np.int64)
        table_off = np.zeros(len(live), dtype=np.int64)
        flat, off = [], 0
        for k, (c, t) in enumerate(live):
            coords[k, :len(c)] = c
            strides[k, :len(c)] = [s // t.itemsize for s in t.strides]
            table_off[k] = off
            flat.append(t.ravel())
            off += t.size
        return dict(
            radices=radices, probs_flat=np.ascontiguousarray(probs_flat), prob_off=prob_off,
            tables_flat=np.concatenate(flat) if flat else np.zeros(1),
            table_off=table_off, term_coords=coords, term_strides=strides)


def instance_problem(inst: UStatInstance) -> EnumerationProblem:
    """Enumeration problem whose sum is the U-statistic of ``inst``."""
    m, n = inst.m, inst.n
    if inst.decoupled:
        probs = [inst.law(j, i).probs for j in range(m) for i in range(n)]
        terms = [(tuple(j * n + i for j, i in enumerate(idx)), inst.table(idx))
                 for idx in inst.indices()]
    else:
        probs = [inst.law(0, i).probs for i in range(n)]
        terms = [(tuple(idx), inst.table(idx)) for idx in inst.indices()]
    return EnumerationProblem(probs, terms)


def signed_problem(problem: EnumerationProblem) -> EnumerationProblem:
    """Adjoin an independent Rademacher sign to every coordinate.

    Atom ``a`` of a coordinate with ``k`` atoms becomes ``a`` (sign -1) and
    ``a + k`` (sign +1); each term is multiplied by the signs it reads.
    """
    probs = [np.concatenate([0.5 * np.asarray(p), 0.5 * np.asarray(p)]) for p in problem.probs]
    terms = []
    for coords, t in problem.terms:
        t = np.asarray(t, dtype=float)
        for ax in range(t.ndim):
            t = np.concatenate([-t, t], axis=ax)
        terms.append((coords, t))
    return EnumerationProblem(probs, terms)


def enumerate_problem(problem: EnumerationProblem, cap: int | None = None,
                      threads: int = 1, backend: str | None = None) -> FiniteDistribution:
    """Exact law of the sum of terms, by full configuration enumeration."""
    cap = resolve_cap(cap)
    total = problem.count()
    if total > cap:
        raise EnumerationInfeasible(total, cap)
    flat = problem.flatten()
    enum_chunk, _ = _kernels.get_backend(backend)

    def run(start):
        count = min(CHUNK, total - start)
        vals = np.empty(count)
        prs = np.empty(count)
        enum_chunk(start, count, flat["radices"], flat["probs_flat"], flat["prob_off"],
                   flat["tables_flat"], flat["table_off"], flat["term_coords"],
                   flat["term_strides"], vals, prs)
        u, inv = np.unique(vals, return_inverse=True)
        return u, np.bincount(inv.ravel(), weights=prs, minlength=u.size)

    starts = range(0, total, CHUNK)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, starts))
    else:
        parts = [run(s) for s in starts]
    values = np.concatenate([u for u, _ in parts])
    probs = np.concatenate([w for _, w in parts])
    return FiniteDistribution.from_pairs(values, probs)


def exact_distribution(inst: UStatInstance, cap: int | None = None, threads: int = 1,
                       backend: str | None = None) -> FiniteDistribution:
    """Exact law of sum_i h_i over the instance's coordinates."""
    if backend is None and "dist" in inst._cache:
        return inst._cache["dist"]
    dist = enumerate_problem(instance_problem(inst), cap, threads, backend)
    if backend is None:
        inst._cache["dist"] = dist
    return dist


def chaos_moment(inst: UStatInstance, p: float, cap: int | None = None,
                 threads: int = 1) -> float:
    """E|sum_i eps_{i_1}^(1)...eps_{i_m}^(m) h_i|^p with an independent Rademacher array."""
    _require_decoupled(inst)
    key = "chaos-dist"
    if key not in inst._cache:
        inst._cache[key] = enumerate_problem(signed_problem(instance_problem(inst)), cap, threads)
    return moment(inst._cache[key], p)


def ustat_moment(inst: UStatInstance, p: float, cap: int | None = None) -> float:
    """E|sum_i h_i|^p."""
    return moment(exact_distribution(inst, cap), p)


def pushforward(law: DiscreteDistribution, table) -> FiniteDistribution:
    """Law of h(X) for X ~ law and h given on the atoms."""
    return FiniteDistribution.from_pairs(np.asarray(table, dtype=float), law.probs)


def coordinate_laws(inst: UStatInstance) -> list:
    """Laws of the summands xi_i = h_i(X_i) of an order-1 instance."""
    if inst.m != 1:
        raise ValueError("coordinate laws are defined for order-1 instances")
    return [pushforward(inst.law(0, i), inst.table((i,))) for i in range(inst.n)]


# mixed moments --------------------------------------------------------------------


def _require_decoupled(inst: UStatInstance):
    if not inst.decoupled:
        raise ValueError("mixed moments are defined for decoupled instances; "
                         "use inst.decoupled_twin()")


def _normalize_J(J, m: int) -> tuple:
    J = tuple(sorted(set(int(j) for j in J)))
    if any(j < 0 or j >= m for j in J):
        raise ValueError(f"J={J} is not a subset of slots 0..{m - 1}")
    return J


def _power(x, p: float, absolute: bool):
    x = np.asarray(x, dtype=float)
    if absolute:
        return np.abs(x) ** p
    if float(p).is_integer():
        return x ** int(p)
    if np.any(x < -NEG_TOL * max(1.0, float(np.max(np.abs(x), initial=0.0)))):
        raise NegativeInnerSum("inner conditional sum is negative and p is not an integer; "
                               "use absolute=True")
    return np.clip(x, 0.0, None) ** p


def _prob_grid(laws: Sequence[DiscreteDistribution]) -> np.ndarray:
    w = np.ones(())
    for law in laws:
        w = np.multiply.outer(w, law.probs)
    return w


def conditional_tables(inst: UStatInstance, J) -> dict:
    """g_{i_J}(x_J) = sum_{i_{J^c}} E_{J^c} h_i, keyed by i_J; axes follow J."""
    _require_decoupled(inst)
    J = _normalize_J(J, inst.m)
    key = ("cond", J)
    if key in inst._cache:
        return inst._cache[key]
    Jc = [j for j in range(inst.m) if j not in J]
    out = {}
    for idx in inst.indices():
        t = inst.table(idx)
        for j in reversed(Jc):
            t = np.tensordot(t, inst.law(j, idx[j]).probs, axes=([j], [0]))
        k = tuple(idx[j] for j in J)
        out[k] = out[k] + t if k in out else np.asarray(t, dtype=float)
    inst._cache[key] = out
    return out


def lr_tables(inst: UStatInstance, J, r: float, cap: int | None = None) -> dict:
    """E_{J^c}(sum_{i_{J^c}} h_i)^r as a function of x_J, keyed by i_J."""
    cap = resolve_cap(cap)
    _require_decoupled(inst)
    J = _normalize_J(J, inst.m)
    m, n = inst.m, inst.n
    Jc = [j for j in range(m) if j not in J]
    block = [inst.law(j, i) for j in Jc for i in range(n)]
    bsizes = [len(l) for l in block]
    weights = _prob_grid(block)
    out = {}
    for k in itertools.product(range(n), repeat=len(J)):
        jsizes = [len(inst.law(j, k[a])) for a, j in enumerate(J)]
        if math.prod(jsizes) * math.prod(bsizes) > cap:
            raise EnumerationInfeasible(math.prod(jsizes) * math.prod(bsizes), cap)
        acc = np.zeros(jsizes + bsizes)
        for rest in itertools.product(range(n), repeat=len(Jc)):
            idx = [0] * m
            for a, j in enumerate(J):
                idx[j] = k[a]
            for q, j in enumerate(Jc):
                idx[j] = rest[q]
            t = np.transpose(inst.table(tuple(idx)), list(J) + Jc)
            shape = jsizes + [1] * len(bsizes)
            for q, j in enumerate(Jc):
                shape[len(J) + q * n + rest[q]] = t.shape[len(J) + q]
            acc = acc + t.reshape(shape)
        val = _power(acc, r, absolute=False)
        axes = list(range(len(J), len(J) + len(bsizes)))
        out[k] = np.tensordot(val, weights, axes=(axes, list(range(len(bsizes)))))
    return out


def _sum_outer(inst: UStatInstance, J: tuple, tables: dict, f) -> float:
    parts = []
    for k in sorted(tables):
        w = _prob_grid([inst.law(j, k[a]) for a, j in enumerate(J)])
        parts.append(math.fsum(np.ravel(w * f(tables[k]))))
    return math.fsum(parts)


def _max_outer(inst: UStatInstance, J: tuple, tables: dict, f, cap: int | None) -> float:
    cap = resolve_cap(cap)
    n = inst.n
    block = [inst.law(j, i) for j in J for i in range(n)]
    size = math.prod(len(l) for l in block)
    if size > cap:
        raise EnumerationInfeasible(size, cap)
    acc = np.full([len(l) for l in block], -np.inf)
    for k in sorted(tables):
        v = np.asarray(f(tables[k]), dtype=float)
        shape = [1] * len(block)
        for a in range(len(J)):
            shape[a * n + k[a]] = v.shape[a]
        acc = np.maximum(acc, v.reshape(shape))
    return math.fsum(np.ravel(_prob_grid(block) * acc))


def mixed_moment(inst: UStatInstance, J, p: float, absolute: bool = False) -> float:
    """sum_{i_J} E_J (sum_{i_{J^c}} E_{J^c} h_i)^p."""
    J = _normalize_J(J, inst.m)
    return _sum_outer(inst, J, conditional_tables(inst, J), lambda g: _power(g, p, absolute))


def max_mixed_moment(inst: UStatInstance, J, p: float, absolute: bool = False,
                     cap: int | None = None) -> float:
    """E_J max_{i_J} (sum_{i_{J^c}} E_{J^c} h_i)^p."""
    J = _normalize_J(J, inst.m)
    return _max_outer(inst, J, conditional_tables(inst, J),
                      lambda g: _power(g, p, absolute), cap)


def lr_mixed_moment(inst: UStatInstance, J, p: float, r: float,
                    cap: int | None = None) -> float:
    """E_J max_{i_J} (E_{J^c} (sum_{i_{J^c}} h_i)^r)^{p/r}; needs 0 < r < p."""
    if not 0 < r < p:
        raise ValueError(f"need 0 < r < p, got r={r}, p={p}")
    J = _normalize_J(J, inst.m)
    key = ("lr", J, float(r))
    if key not in inst._cache:
        inst._cache[key] = lr_tables(inst, J, r, cap)
    return _max_outer(inst, J, inst._cache[key], lambda g: _power(g, p / r, False), cap)


def subsets(m: int, nonempty: bool = False):
    """All subsets of range(m) as sorted tuples, by size then lexicographically."""
    start = 1 if nonempty else 0
    return [c for s in range(start, m + 1) for c in itertools.combinations(range(m), s)]


# empirical processes ------------------------------------------------------------------


@dataclass(frozen=True)
class EmpiricalSup:
    """Exact functionals of S = sup_f sum_i f(Z_i) for a finite class."""

    distribution: FiniteDistribution
    p: float
    moment_p: float        # E|S|^p
    mean_abs: float        # E|S|
    sigma2: float          # sup_f sum_i E f(Z_i)^2
    envelope_moment: float  # E max_i sup_f |f(Z_i)|^p
    a: float               # max_i sup_f ||f(Z_i)||_inf


def empirical_sup_moment(cls: EmpiricalClass, p: float, cap: int | None = None,
                         tol: float = 1e-10) -> EmpiricalSup:
    if p < 1:
        raise ValueError("p must be at least 1")
    problems = cls.validate(tol)
    if problems:
        raise ValueError("; ".join(problems))
    cap = resolve_cap(cap)
    radices = [len(z) for z in cls.variables]
    total = math.prod(radices)
    if total > cap:
        raise EnumerationInfeasible(total, cap)
    digits = np.unravel_index(np.arange(total), radices)
    w = np.ones(total)
    for law, d in zip(cls.variables, digits):
        w = w * law.probs[d]
    if cls.functions:
        sums = []
        for f in cls.functions:
            s = np.zeros(total)
            for col, d in zip(f, digits):
                s = s + col[d]
            sums.append(s)
        S = np.max(np.vstack(sums), axis=0)
        env = np.zeros(total)
        for i, d in enumerate(digits):
            Fi = np.max(np.abs(np.vstack([f[i] for f in cls.functions])), axis=0)
            env = np.maximum(env, Fi[d])
        sigma2 = max(math.fsum(math.fsum(law.probs * col ** 2) for col, law in zip(f, cls.variables))
                     for f in cls.functions)
        a = max(float(np.max(np.abs(col))) for f in cls.functions for col in f)
    else:
        S = env = np.zeros(total)
        sigma2 = a = 0.0
    dist = FiniteDistribution.from_pairs(S, w)
    return EmpiricalSup(
        distribution=dist, p=p,
        moment_p=math.fsum(w * np.abs(S) ** p),
        mean_abs=math.fsum(w * np.abs(S)),
        sigma2=sigma2,
        envelope_moment=math.fsum(w * env ** p),
        a=a)
