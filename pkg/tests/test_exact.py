import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracle
from ustat_bounds import generate_instance, make_instance
from ustat_bounds.exact import (EnumerationInfeasible, FiniteDistribution, NegativeInnerSum,
                                chaos_moment, coordinate_laws, empirical_sup_moment,
                                exact_distribution, lr_mixed_moment, max_mixed_moment,
                                mixed_moment, moment, set_enumeration_cap, subsets, ustat_moment)
from ustat_bounds.model import generate_empirical_class, undecouple

SMALL = [("nonneg", m, n, a) for m in (1, 2) for n in (2, 3) for a in (2, 3) if m * n * a <= 12] + [
    ("canonical", 2, 2, 2), ("canonical", 2, 2, 3), ("separately-symmetric", 2, 2, 2)]


def _law_as_dict(dist):
    return {float(f"{v:.12g}"): p for v, p in zip(dist.values, dist.probs)}


@pytest.mark.parametrize("family,m,n,a", SMALL)
@pytest.mark.parametrize("seed", [0, 1])
def test_distribution_matches_brute_force(family, m, n, a, seed):
    inst = generate_instance(family, m, n, a, seed)
    got = _law_as_dict(exact_distribution(inst))
    want = oracle.ustat_law(inst)
    assert set(got) == set(want)
    for v in want:
        assert got[v] == pytest.approx(want[v], rel=1e-12, abs=1e-15)


@pytest.mark.parametrize("p", [0.5, 1.0, 2.0, 3.5])
def test_moment_matches_brute_force(p):
    for seed in range(5):
        inst = generate_instance("canonical", 2, 2, 2, seed)
        assert oracle.rel_close(ustat_moment(inst, p), oracle.ustat_moment(inst, p), 1e-12)


def test_undecoupled_distribution():
    inst = generate_instance("symmetric-undecoupled", 2, 3, 2, seed=4)
    got = _law_as_dict(exact_distribution(inst))
    want = oracle.ustat_law(inst)
    assert set(got) == set(want)
    assert math.fsum(got.values()) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("J", [(), (0,), (1,), (0, 1)])
def test_mixed_moments_match_brute_force(J):
    inst = generate_instance("nonneg", 2, 2, 2, seed=3)
    for p in (1.0, 1.5, 3.0):
        assert oracle.rel_close(mixed_moment(inst, J, p), oracle.mixed_moment(inst, J, p))
        assert oracle.rel_close(max_mixed_moment(inst, J, p), oracle.max_mixed_moment(inst, J, p))
        for r in (0.25, 0.5):
            if r < p:
                assert oracle.rel_close(lr_mixed_moment(inst, J, p, r),
                                        oracle.lr_mixed_moment(inst, J, p, r))


def test_mixed_moment_extremes():
    inst = generate_instance("nonneg", 2, 2, 3, seed=9)
    p = 2.5
    # J = all slots: sum_i E h_i^p; J = empty: (E U)^p
    full = math.fsum(
        float(np.sum(np.multiply.outer(inst.law(0, i).probs, inst.law(1, j).probs)
                     * inst.table((i, j)) ** p)) for i, j in inst.indices())
    assert mixed_moment(inst, (0, 1), p) == pytest.approx(full, rel=1e-12)
    assert mixed_moment(inst, (), p) == pytest.approx(exact_distribution(inst).mean() ** p, rel=1e-12)


def test_mixed_moment_rejects_negative_inner_sum():
    inst = generate_instance("canonical", 2, 2, 2, seed=0)
    with pytest.raises(NegativeInnerSum):
        mixed_moment(inst, (0, 1), 1.5)
    assert mixed_moment(inst, (0, 1), 1.5, absolute=True) > 0
    assert mixed_moment(inst, (0, 1), 2.0) > 0


def test_lr_requires_r_below_p():
    inst = generate_instance("nonneg", 2, 2, 2, seed=0)
    with pytest.raises(ValueError):
        lr_mixed_moment(inst, (0,), 1.0, 1.0)


def test_mixed_requires_decoupled():
    inst = generate_instance("symmetric-undecoupled", 2, 2, 2, seed=0, kernel="nonneg")
    with pytest.raises(ValueError, match="decoupled"):
        mixed_moment(inst, (0,), 2.0)


def test_subsets_order():
    assert subsets(2) == [(), (0,), (1,), (0, 1)]
    assert subsets(3, nonempty=True)[:3] == [(0,), (1,), (2,)]
    assert len(subsets(3)) == 8


def test_cap_is_enforced():
    inst = generate_instance("nonneg", 2, 3, 2, seed=1)   # 2^6 configurations
    with pytest.raises(EnumerationInfeasible) as err:
        exact_distribution(inst, cap=10)
    assert err.value.count == 64 and err.value.cap == 10
    old = set_enumeration_cap(10)
    try:
        with pytest.raises(EnumerationInfeasible):
            exact_distribution(generate_instance("nonneg", 2, 3, 2, seed=2))
    finally:
        set_enumeration_cap(old)


def test_threads_and_backends_agree():
    inst = generate_instance("nonneg", 3, 3, 2, seed=5)
    a = exact_distribution(inst, threads=1, backend="python")
    b = exact_distribution(inst, threads=3, backend="python")
    assert a == b
    try:
        c = exact_distribution(inst, backend="cython")
    except ValueError:
        pytest.skip("compiled backend not built")
    assert a == c


def test_chaos_moment_of_separately_symmetric_equals_moment():
    inst = generate_instance("separately-symmetric", 2, 2, 2, seed=1)
    for p in (1.0, 2.0, 3.0):
        assert chaos_moment(inst, p) == pytest.approx(ustat_moment(inst, p), rel=1e-12)


def test_chaos_moment_brute_force():
    inst = generate_instance("canonical", 2, 2, 2, seed=7)
    # multiply every table by independent signs per coordinate: sum over sign patterns
    total = []
    for eps in itertools.product((-1.0, 1.0), repeat=4):
        e = {(0, 0): eps[0], (0, 1): eps[1], (1, 0): eps[2], (1, 1): eps[3]}
        signed = make_instance([[inst.law(j, i) for i in range(2)] for j in range(2)],
                               {idx: e[(0, idx[0])] * e[(1, idx[1])] * inst.table(idx)
                                for idx in inst.indices()})
        total.append(0.0625 * oracle.ustat_moment(signed, 3.0))
    assert chaos_moment(inst, 3.0) == pytest.approx(math.fsum(total), rel=1e-12)


def test_coordinate_laws():
    inst = generate_instance("nonneg", 1, 3, 2, seed=2)
    laws = coordinate_laws(inst)
    assert len(laws) == 3
    for i, d in enumerate(laws):
        assert d.total() == pytest.approx(1.0)
        assert d.mean() == pytest.approx(float(inst.law(0, i).probs @ inst.table((i,))))
    with pytest.raises(ValueError):
        coordinate_laws(generate_instance("nonneg", 2, 2, 2, seed=0))


def test_finite_distribution_basics():
    d = FiniteDistribution.from_pairs([1.0, -1.0, 1.0 + 1e-14, 2.0], [0.25, 0.25, 0.25, 0.25])
    assert list(d.values) == [-1.0, 1.0, 2.0]
    assert list(d.probs) == [0.25, 0.5, 0.25]
    assert d.tail(1.0) == 0.75 and d.tail(1.0, strict=True) == 0.25
    assert moment(d, 2) == pytest.approx(0.25 + 0.5 + 1.0)
    assert moment(d, 1, kind="raw") == pytest.approx(0.75)
    assert d.abs().values.tolist() == [1.0, 2.0]
    assert FiniteDistribution.point_mass(3.0).mean() == 3.0
    with pytest.raises(AttributeError):
        d.values = None


def test_empirical_sup_brute_force():
    cls = generate_empirical_class(3, 4, seed=3)
    res = empirical_sup_moment(cls, 2.0)
    vals, probs = [], []
    for choice in itertools.product(*[range(len(v)) for v in cls.variables]):
        pr = math.prod(float(v.probs[a]) for v, a in zip(cls.variables, choice))
        s = max(math.fsum(float(f[i][a]) for i, a in enumerate(choice)) for f in cls.functions)
        vals.append(s)
        probs.append(pr)
    assert res.moment_p == pytest.approx(math.fsum(p * v * v for p, v in zip(probs, vals)), rel=1e-12)
    assert res.mean_abs == pytest.approx(math.fsum(p * abs(v) for p, v in zip(probs, vals)), rel=1e-12)
    assert res.distribution.total() == pytest.approx(1.0)


# properties -------------------------------------------------------------------------------------

seeds = st.integers(0, 10_000)


@given(seeds, st.sampled_from([(1, 3, 2), (2, 2, 2), (1, 2, 3)]))
def test_total_mass_is_one(seed, shape):
    m, n, a = shape
    assert exact_distribution(generate_instance("nonneg", m, n, a, seed)).total() == pytest.approx(1.0, abs=1e-12)


@given(seeds, st.floats(0.1, 3.0), st.floats(0.1, 4.0))
def test_moment_homogeneity(seed, c, p):
    inst = generate_instance("canonical", 2, 2, 2, seed)
    assert ustat_moment(inst.scaled(c), p) == pytest.approx(c ** p * ustat_moment(inst, p), rel=1e-9)


@given(seeds, st.permutations([0, 1, 2]))
def test_relabeling_invariance(seed, perm):
    inst = generate_instance("nonneg", 2, 3, 2, seed)
    other = inst.relabeled(perm)
    for p in (1.0, 2.5):
        assert ustat_moment(other, p) == pytest.approx(ustat_moment(inst, p), rel=1e-12)
        for J in subsets(2):
            assert mixed_moment(other, J, p) == pytest.approx(mixed_moment(inst, J, p), rel=1e-12)


@given(seeds)
def test_centered_mean_is_zero(seed):
    inst = generate_instance("canonical", 2, 2, 2, seed)
    dist = exact_distribution(inst)
    scale = max(1.0, moment(dist, 1.0))
    assert abs(dist.mean()) <= 1e-12 * scale * 10


@given(seeds)
def test_lyapunov(seed):
    dist = exact_distribution(generate_instance("canonical", 2, 2, 2, seed))
    norms = [moment(dist, p) ** (1 / p) for p in (0.5, 1.0, 2.0, 3.0)]
    assert all(a <= b * (1 + 1e-12) for a, b in zip(norms, norms[1:]))


@given(seeds)
def test_undecouple_roundtrip_law(seed):
    inst = generate_instance("symmetric-undecoupled", 2, 2, 2, seed)
    twin = inst.decoupled_twin()
    assert undecouple(twin).mode == inst.mode
    assert exact_distribution(undecouple(twin)) == exact_distribution(inst)
