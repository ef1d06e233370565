"""Finite discrete models for generalized (decoupled or undecoupled) U-statistics.

A model is an m x n grid of independent coordinate variables with finite laws
and, for every multi-index ``i`` in ``{0..n-1}^m``, a kernel table indexed by
the atom positions of the m coordinates that kernel reads.  Everything here is
immutable once built; derived instances are new objects.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, InitVar
from typing import Callable, Iterable, Iterator, Mapping, Sequence

import numpy as np

DECOUPLED = "decoupled"
UNDECOUPLED = "undecoupled"
MODES = (DECOUPLED, UNDECOUPLED)

NONNEGATIVE = "nonnegative"
CANONICAL = "canonical"
SEPARATELY_SYMMETRIC = "separately-symmetric"
FLAGS = (NONNEGATIVE, CANONICAL, SEPARATELY_SYMMETRIC)

FAMILIES = (
    "nonneg",
    "canonical",
    "symmetric-undecoupled",
    "gaussian-chaos-analog",
    "bernoulli-product",
    "separately-symmetric",
)

CANONICAL_TOL = 1e-10
PROB_SUM_TOL = 1e-12


class InvalidInstance(ValueError):
    """Raised when an instance fails validation; carries every violation."""

    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


def _readonly(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


class DiscreteDistribution:
    """Law of one coordinate: distinct real atoms with positive masses.

    Zero-mass atoms are dropped on construction; ``kept`` records which of the
    supplied positions survived so callers can slice kernel tables to match.
    Sum-to-one is *not* enforced here (``validate`` reports it).
    """

    __slots__ = ("atoms", "probs", "kept", "supplied")

    def __init__(self, atoms, probs):
        a = np.asarray(atoms, dtype=float).ravel()
        p = np.asarray(probs, dtype=float).ravel()
        if a.shape != p.shape:
            raise ValueError(f"atoms ({a.size}) and probs ({p.size}) differ in length")
        keep = np.flatnonzero(p != 0.0)
        object.__setattr__(self, "atoms", _readonly(a[keep]))
        object.__setattr__(self, "probs", _readonly(p[keep]))
        object.__setattr__(self, "kept", tuple(int(k) for k in keep))
        object.__setattr__(self, "supplied", int(a.size))

    def __setattr__(self, name, value):
        raise AttributeError("DiscreteDistribution is immutable")

    def __len__(self):
        return self.atoms.size

    def __eq__(self, other):
        if not isinstance(other, DiscreteDistribution):
            return NotImplemented
        return (np.array_equal(self.atoms, other.atoms)
                and np.array_equal(self.probs, other.probs))

    def __hash__(self):
        return hash((self.atoms.tobytes(), self.probs.tobytes()))

    def __repr__(self):
        pairs = ", ".join(f"{a:g}: {p:g}" for a, p in zip(self.atoms, self.probs))
        return f"DiscreteDistribution({{{pairs}}})"

    def mean(self) -> float:
        return math.fsum(self.atoms * self.probs)

    def validate(self, path: str = "law") -> list[str]:
        out = []
        if self.atoms.size == 0:
            return [f"{path}: no atoms with positive mass"]
        if not (np.all(np.isfinite(self.atoms)) and np.all(np.isfinite(self.probs))):
            out.append(f"{path}: non-finite atoms or probs")
        if np.any(self.probs < 0) or np.any(self.probs > 1):
            out.append(f"{path}.probs: entries outside [0, 1]")
        total = math.fsum(self.probs)
        if abs(total - 1.0) > PROB_SUM_TOL:
            out.append(f"{path}.probs: probs sum {total!r} != 1")
        if np.unique(self.atoms).size != self.atoms.size:
            out.append(f"{path}.atoms: atoms are not distinct")
        return out

    @classmethod
    def uniform(cls, atoms) -> "DiscreteDistribution":
        a = np.asarray(atoms, dtype=float)
        return cls(a, np.full(a.size, 1.0 / a.size))

    @classmethod
    def rademacher(cls) -> "DiscreteDistribution":
        return cls([-1.0, 1.0], [0.5, 0.5])

    @classmethod
    def centered_bernoulli(cls, prob: float) -> "DiscreteDistribution":
        return cls([-prob, 1.0 - prob], [1.0 - prob, prob])


@dataclass(frozen=True, eq=False)
class VariableGrid:
    """Laws of the coordinate variables, ``laws[j][i]`` for slot j, index i."""

    m: int
    n: int
    laws: tuple

    def law(self, j: int, i: int) -> DiscreteDistribution:
        return self.laws[j][i]

    def atom_count(self, j: int, i: int) -> int:
        return len(self.laws[j][i])

    def __eq__(self, other):
        if not isinstance(other, VariableGrid):
            return NotImplemented
        return (self.m, self.n) == (other.m, other.n) and all(
            a == b for ra, rb in zip(self.laws, other.laws) for a, b in zip(ra, rb))


@dataclass(frozen=True, eq=False)
class KernelTensor:
    """Kernel tables keyed by 0-based multi-index tuples."""

    m: int
    n: int
    tables: Mapping[tuple, np.ndarray]

    def __eq__(self, other):
        if not isinstance(other, KernelTensor):
            return NotImplemented
        if (self.m, self.n) != (other.m, other.n) or set(self.tables) != set(other.tables):
            return False
        return all(np.array_equal(self.tables[k], other.tables[k]) for k in self.tables)


def multi_indices(m: int, n: int) -> Iterator[tuple]:
    """All of ``{0..n-1}^m`` in lexicographic order."""
    return itertools.product(range(n), repeat=m)


@dataclass(frozen=True, eq=False)
class UStatInstance:
    """A generalized U-statistic: variable grid, kernel tables and a mode.

    ``flags`` are declared properties (nonnegative, canonical,
    separately-symmetric); they are checked at construction.
    """

    grid: VariableGrid
    kernel: KernelTensor
    mode: str = DECOUPLED
    flags: frozenset = frozenset()
    name: str = ""
    validate: InitVar[bool] = True
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self, validate):
        object.__setattr__(self, "flags", frozenset(self.flags))
        if validate:
            problems = validate_instance(self)
            if problems:
                raise InvalidInstance(problems)

    @property
    def m(self) -> int:
        return self.grid.m

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def decoupled(self) -> bool:
        return self.mode == DECOUPLED

    def table(self, index: Sequence[int]) -> np.ndarray:
        return self.kernel.tables[tuple(index)]

    def law(self, j: int, i: int) -> DiscreteDistribution:
        return self.grid.laws[j][i]

    def indices(self) -> Iterator[tuple]:
        return multi_indices(self.m, self.n)

    def __eq__(self, other):
        if not isinstance(other, UStatInstance):
            return NotImplemented
        return (self.mode == other.mode and self.grid == other.grid
                and self.kernel == other.kernel and self.flags == other.flags)

    def config_count(self) -> int:
        """Number of joint atom configurations of all live coordinates."""
        if self.decoupled:
            counts = [len(law) for row in self.grid.laws for law in row]
        else:
            counts = [len(law) for law in self.grid.laws[0]]
        return math.prod(counts)

    # derived instances ------------------------------------------------------

    def with_tables(self, fn: Callable[[tuple, np.ndarray], np.ndarray],
                    flags: Iterable[str] = (), name: str | None = None,
                    mode: str | None = None) -> "UStatInstance":
        tables = {i: _readonly(fn(i, t)) for i, t in self.kernel.tables.items()}
        return UStatInstance(
            self.grid, KernelTensor(self.m, self.n, tables),
            mode=self.mode if mode is None else mode,
            flags=frozenset(flags), name=self.name if name is None else name)

    def scaled(self, c: float) -> "UStatInstance":
        keep = self.flags if c > 0 else self.flags - {NONNEGATIVE}
        return self.with_tables(lambda i, t: c * t, keep)

    def squared(self) -> "UStatInstance":
        """Same grid with kernels ``h**2`` (a nonnegative instance)."""
        return self.with_tables(lambda i, t: t * t, {NONNEGATIVE})

    def absolute(self) -> "UStatInstance":
        return self.with_tables(lambda i, t: np.abs(t), {NONNEGATIVE})

    def relabeled(self, perm: Sequence[int]) -> "UStatInstance":
        """Relabel the index set: new index ``perm[i]`` carries old index ``i``."""
        perm = list(perm)
        inv = np.argsort(perm)
        laws = tuple(tuple(row[inv[k]] for k in range(self.n)) for row in self.grid.laws)
        tables = {tuple(perm[a] for a in i): t for i, t in self.kernel.tables.items()}
        return UStatInstance(VariableGrid(self.m, self.n, laws),
                             KernelTensor(self.m, self.n, tables),
                             mode=self.mode, flags=self.flags, name=self.name)

    def decoupled_twin(self) -> "UStatInstance":
        """Decoupled version of an undecoupled instance (independent copies per slot)."""
        if self.decoupled:
            return self
        return UStatInstance(self.grid, self.kernel, mode=DECOUPLED,
                             flags=self.flags - {SEPARATELY_SYMMETRIC}, name=self.name)


def make_instance(laws, tables: Mapping[tuple, np.ndarray], mode: str = DECOUPLED,
                  flags: Iterable[str] = (), name: str = "",
                  validate: bool = True) -> UStatInstance:
    """Build an instance from raw laws and tables.

    ``laws`` is an m x n nested sequence of DiscreteDistribution (for
    undecoupled mode a length-n sequence is also accepted and reused for every
    slot).  Table slices belonging to dropped zero-mass atoms are removed.
    """
    tables = {tuple(int(a) for a in k): np.asarray(v, dtype=float) for k, v in tables.items()}
    m = len(next(iter(tables))) if tables else len(laws)
    if mode == UNDECOUPLED and laws and isinstance(laws[0], DiscreteDistribution):
        laws = [list(laws)] * m
    laws = tuple(tuple(row) for row in laws)
    n = len(laws[0]) if laws else 0
    trimmed = {}
    for idx, t in tables.items():
        sl = []
        for j, i in enumerate(idx):
            try:
                law = laws[j][i]
            except IndexError:
                sl = None
                break
            dropped = law.supplied != len(law)
            sl.append(list(law.kept) if dropped and t.ndim > j and t.shape[j] == law.supplied
                      else None)
        if sl is not None and t.ndim == len(sl):
            for ax, keep in enumerate(sl):
                if keep is not None:
                    t = np.take(t, keep, axis=ax)
        trimmed[idx] = _readonly(t)
    return UStatInstance(VariableGrid(len(laws), n, laws), KernelTensor(len(laws), n, trimmed),
                         mode=mode, flags=frozenset(flags), name=name, validate=validate)


# validation ------------------------------------------------------------------


def validate_instance(inst: UStatInstance) -> list[str]:
    """Every invariant violation of ``inst``, each with a path; [] if valid."""
    out: list[str] = []
    g, k = inst.grid, inst.kernel
    if inst.mode not in MODES:
        out.append(f"mode: unknown mode {inst.mode!r}")
    unknown = set(inst.flags) - set(FLAGS)
    if unknown:
        out.append(f"flags: unknown flags {sorted(unknown)}")
    if g.m < 1 or g.n < 1:
        out.append(f"grid: m={g.m}, n={g.n} must be positive")
        return out
    if len(g.laws) != g.m or any(len(row) != g.n for row in g.laws):
        out.append(f"variables: table is not {g.m} x {g.n}")
        return out
    for j in range(g.m):
        for i in range(g.n):
            out.extend(g.laws[j][i].validate(f"variables[{j}][{i}]"))
    if out:
        return out
    if k.m != g.m or k.n != g.n:
        out.append(f"kernels: kernel dimensions ({k.m}, {k.n}) differ from grid ({g.m}, {g.n})")
        return out
    for idx in multi_indices(g.m, g.n):
        label = "(" + ",".join(str(a + 1) for a in idx) + ")"
        if idx not in k.tables:
            out.append(f"kernels: kernel index {label} absent")
            continue
        t = k.tables[idx]
        want = tuple(g.atom_count(j, i) for j, i in enumerate(idx))
        if t.shape != want:
            out.append(f"kernels{label}.table: shape {t.shape} != atom counts {want}")
        elif not np.all(np.isfinite(t)):
            out.append(f"kernels{label}.table: non-finite entries")
    extra = set(k.tables) - set(multi_indices(g.m, g.n))
    for idx in sorted(extra):
        out.append(f"kernels: unexpected kernel index {tuple(a + 1 for a in idx)}")
    if out:
        return out
    if inst.mode == UNDECOUPLED:
        out.extend(_undecoupled_violations(inst))
    if NONNEGATIVE in inst.flags:
        for idx, t in k.tables.items():
            if np.any(t < 0):
                out.append(f"kernels{_label(idx)}: negative entry in nonnegative instance")
                break
    if CANONICAL in inst.flags and not is_canonical(inst):
        out.append("flags: declared canonical but some E_j h_i != 0")
    if SEPARATELY_SYMMETRIC in inst.flags and not is_separately_symmetric(inst):
        out.append("flags: declared separately-symmetric but a law or kernel is not")
    return out


def _label(idx) -> str:
    return "(" + ",".join(str(a + 1) for a in idx) + ")"


def _undecoupled_violations(inst: UStatInstance, tol: float = 1e-12) -> list[str]:
    out = []
    g = inst.grid
    for i in range(g.n):
        if any(g.laws[j][i] != g.laws[0][i] for j in range(1, g.m)):
            out.append(f"variables[*][{i}]: laws differ across slots in undecoupled mode")
    for idx, t in inst.kernel.tables.items():
        if len(set(idx)) < len(idx) and np.any(t != 0):
            out.append(f"kernels{_label(idx)}: diagonal kernel nonzero")
    for idx, t in inst.kernel.tables.items():
        for s in itertools.permutations(range(inst.m)):
            other = inst.kernel.tables[tuple(idx[a] for a in s)]
            if other.shape != tuple(t.shape[a] for a in s) or not np.allclose(
                    other, np.transpose(t, s), rtol=0, atol=tol):
                out.append(f"kernels{_label(idx)}: kernel not symmetric under permutation {s}")
                return out
    return out


# canonical projection ----------------------------------------------------------


def _cond_expectation(t: np.ndarray, probs: np.ndarray, axis: int) -> np.ndarray:
    return np.expand_dims(np.tensordot(t, probs, axes=([axis], [0])), axis)


def is_canonical(inst: UStatInstance, tol: float = CANONICAL_TOL) -> bool:
    """True iff every single-coordinate conditional mean of every kernel is within tol of 0."""
    for idx, t in inst.kernel.tables.items():
        for j, i in enumerate(idx):
            if np.max(np.abs(_cond_expectation(t, inst.law(j, i).probs, j)), initial=0.0) > tol:
                return False
    return True


def hoeffding_projection(inst: UStatInstance) -> UStatInstance:
    """Apply prod_j (I - E_j) to every kernel table."""

    def project(idx, t):
        t = np.array(t, dtype=float)
        for j, i in enumerate(idx):
            t = t - _cond_expectation(t, inst.law(j, i).probs, j)
        return t

    flags = (inst.flags - {NONNEGATIVE}) | {CANONICAL}
    return inst.with_tables(project, flags)


def is_separately_symmetric(inst: UStatInstance, tol: float = 1e-12) -> bool:
    """Symmetric laws and kernels odd in each coordinate separately."""
    for row in inst.grid.laws:
        for law in row:
            if not (np.allclose(law.atoms, -law.atoms[::-1], rtol=0, atol=tol)
                    and np.allclose(law.probs, law.probs[::-1], rtol=0, atol=tol)):
                return False
    for t in inst.kernel.tables.values():
        for ax in range(t.ndim):
            if not np.allclose(t, -np.flip(t, axis=ax), rtol=0, atol=tol):
                return False
    return True


def undecouple(inst: UStatInstance) -> UStatInstance:
    """Turn a decoupled instance with copy laws and symmetric kernels into a regular one."""
    if not inst.decoupled:
        raise ValueError("instance is already undecoupled")
    g = inst.grid
    for i in range(g.n):
        if any(g.laws[j][i] != g.laws[0][i] for j in range(1, g.m)):
            raise ValueError(f"laws of index {i + 1} differ across slots")
    candidate = UStatInstance(g, inst.kernel, mode=UNDECOUPLED, flags=inst.flags,
                              name=inst.name, validate=False)
    problems = _undecoupled_violations(candidate)
    if problems:
        raise ValueError("; ".join(problems))
    laws = tuple(tuple(g.laws[0]) for _ in range(g.m))
    return UStatInstance(VariableGrid(g.m, g.n, laws), inst.kernel, mode=UNDECOUPLED,
                         flags=inst.flags, name=inst.name)


# generation ------------------------------------------------------------------


def _random_law(rng: np.random.Generator, k: int) -> DiscreteDistribution:
    atoms = np.sort(rng.normal(size=k))
    probs = rng.dirichlet(np.full(k, 2.0))
    return DiscreteDistribution(atoms, probs)


def _symmetric_law(rng: np.random.Generator, k: int) -> DiscreteDistribution:
    half = k // 2
    mags = np.sort(rng.uniform(0.2, 2.0, size=half))
    w = rng.dirichlet(np.full(half + (k % 2), 2.0))
    if k % 2:
        atoms = np.concatenate([-mags[::-1], [0.0], mags])
        probs = np.concatenate([w[1:][::-1] / 2, [w[0]], w[1:] / 2])
    else:
        atoms = np.concatenate([-mags[::-1], mags])
        probs = np.concatenate([w[::-1] / 2, w / 2])
    return DiscreteDistribution(atoms, probs)


def generate_instance(family: str, m: int, n: int, atom_count: int, seed: int,
                      **options) -> UStatInstance:
    """Seeded instance from one of the corpus families.

    Options: ``coefficients`` (n x n array) for gaussian-chaos-analog,
    ``kernel`` in {"canonical", "nonneg", "raw"} for symmetric-undecoupled.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")
    if atom_count < 2:
        raise ValueError("atom_count must be at least 2")
    if m < 1 or n < 1:
        raise ValueError("m and n must be positive")
    rng = np.random.default_rng(seed)
    name = f"{family}-m{m}-n{n}-a{atom_count}-s{seed}"

    if family in ("gaussian-chaos-analog", "bernoulli-product"):
        if m != 2:
            raise ValueError(f"{family} is an order-2 family")
        if family == "gaussian-chaos-analog":
            law = DiscreteDistribution.rademacher()
            coef = options.get("coefficients")
            coef = rng.normal(size=(n, n)) if coef is None else np.asarray(coef, dtype=float)
            if coef.shape != (n, n):
                raise ValueError(f"coefficients must be {n} x {n}")
            base = np.outer(law.atoms, law.atoms)
            tables = {(i, j): coef[i, j] * base for i in range(n) for j in range(n)}
        else:
            law = DiscreteDistribution.centered_bernoulli(1.0 / n)
            base = np.outer(law.atoms, law.atoms)
            tables = {(i, j): base for i in range(n) for j in range(n)}
        laws = [[law] * n for _ in range(2)]
        return make_instance(laws, tables, flags={CANONICAL}, name=name)

    if family == "symmetric-undecoupled":
        kind = options.get("kernel", "canonical")
        if m > n:
            raise ValueError("symmetric-undecoupled needs m <= n")
        row = [_random_law(rng, atom_count) for _ in range(n)]
        shape = lambda idx: tuple(len(row[i]) for i in idx)
        tables = {}
        for idx in multi_indices(m, n):
            if len(set(idx)) < m:
                tables[idx] = np.zeros(shape(idx))
            elif list(idx) == sorted(idx):
                raw = rng.gamma(0.5, size=shape(idx)) if kind == "nonneg" else rng.normal(size=shape(idx))
                for s in itertools.permutations(range(m)):
                    tables[tuple(idx[a] for a in s)] = np.transpose(raw, s)
        inst = make_instance([row] * m, tables, mode=UNDECOUPLED,
                             flags={NONNEGATIVE} if kind == "nonneg" else (), name=name)
        return hoeffding_projection(inst) if kind == "canonical" else inst

    if family == "separately-symmetric":
        laws = [[_symmetric_law(rng, atom_count) for _ in range(n)] for _ in range(m)]
    else:
        laws = [[_random_law(rng, atom_count) for _ in range(n)] for _ in range(m)]
    tables = {}
    for idx in multi_indices(m, n):
        shape = tuple(len(laws[j][i]) for j, i in enumerate(idx))
        scale = math.exp(rng.normal())
        if family == "nonneg":
            t = scale * rng.gamma(0.5, size=shape)
            t[rng.random(size=shape) < 0.2] = 0.0
        else:
            t = scale * rng.normal(size=shape)
            if family == "separately-symmetric":
                for ax in range(m):
                    t = 0.5 * (t - np.flip(t, axis=ax))
        tables[idx] = t
    if family == "nonneg":
        return make_instance(laws, tables, flags={NONNEGATIVE}, name=name)
    if family == "separately-symmetric":
        return make_instance(laws, tables, flags={SEPARATELY_SYMMETRIC}, name=name)
    return hoeffding_projection(make_instance(laws, tables, name=name))


# empirical-process classes --------------------------------------------------


@dataclass(frozen=True, eq=False)
class EmpiricalClass:
    """Finite class of score functions over independent discrete Z_1..Z_k.

    ``functions[f][i]`` is the table of f over the atoms of ``variables[i]``.
    """

    variables: tuple
    functions: tuple
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "functions", tuple(
            tuple(_readonly(col) for col in f) for f in self.functions))

    def validate(self, tol: float = CANONICAL_TOL) -> list[str]:
        out = []
        for i, law in enumerate(self.variables):
            out.extend(law.validate(f"variables[{i}]"))
        for a, f in enumerate(self.functions):
            if len(f) != len(self.variables):
                out.append(f"functions[{a}]: {len(f)} tables for {len(self.variables)} variables")
                continue
            for i, (col, law) in enumerate(zip(f, self.variables)):
                if col.shape != law.atoms.shape:
                    out.append(f"functions[{a}][{i}]: shape {col.shape} != {law.atoms.shape}")
                elif abs(float(np.dot(col, law.probs))) > tol:
                    out.append(f"functions[{a}][{i}]: not centered (E f = {float(np.dot(col, law.probs)):.3g})")
        return out

    def __eq__(self, other):
        if not isinstance(other, EmpiricalClass):
            return NotImplemented
        return (len(self.functions) == len(other.functions)
                and all(a == b for a, b in zip(self.variables, other.variables))
                and all(np.array_equal(x, y) for f, g in zip(self.functions, other.functions)
                        for x, y in zip(f, g)))


def generate_empirical_class(k: int, size: int, seed: int, atom_count: int = 2) -> EmpiricalClass:
    """Random centered class of ``size`` functions over ``k`` independent variables.

    Half of the draws (rounded down) are paired with their negatives so that
    sup-type and absolute-value behaviour both appear in a corpus.
    """
    rng = np.random.default_rng(seed)
    variables = [_random_law(rng, atom_count) for _ in range(k)]
    funcs = []
    while len(funcs) < size:
        scale = math.exp(0.5 * rng.normal())
        f = []
        for law in variables:
            col = scale * rng.normal(size=len(law))
            col = col - np.dot(col, law.probs)
            f.append(col)
        funcs.append(f)
        if len(funcs) < size and rng.random() < 0.5:
            funcs.append([-c for c in f])
    return EmpiricalClass(variables, funcs, name=f"empirical-k{k}-f{size}-s{seed}")
