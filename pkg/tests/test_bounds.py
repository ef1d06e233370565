import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ustat_bounds import DiscreteDistribution, generate_instance
from ustat_bounds.bounds import (BoundParams, abcd_params, active_regime, delta0, exp_bound_eval,
                                 expand_iid, exponent_terms, iid_params, operator_norm,
                                 paley_zygmund_bound, phi, power_norm, quantile_t0,
                                 talagrand_threshold, v0)
from ustat_bounds.exact import FiniteDistribution


def _random_law(rng, k, low=0.0, high=3.0, zero_prob=0.0):
    atoms = np.unique(np.round(rng.uniform(low, high, size=k), 3))
    if zero_prob and rng.random() < zero_prob:
        atoms[0] = 0.0
        atoms = np.unique(atoms)
    probs = rng.dirichlet(np.ones(atoms.size))
    return DiscreteDistribution(atoms, probs)


# A, B, C, D --------------------------------------------------------------------------------------


def _abcd_by_loops(inst):
    n = inst.n
    A = max(abs(float(v)) for ij in inst.indices() for v in np.ravel(inst.table(ij)))
    C2 = 0.0
    for i in range(n):
        for j in range(n):
            px, py = inst.law(0, i).probs, inst.law(1, j).probs
            t = inst.table((i, j))
            C2 += sum(px[a] * py[b] * t[a, b] ** 2 for a in range(len(px)) for b in range(len(py)))
    col = max(sum(sum(inst.law(0, i).probs[a] * inst.table((i, j))[a, b] ** 2
                      for a in range(len(inst.law(0, i))))
                  for i in range(n))
              for j in range(n) for b in range(len(inst.law(1, j))))
    row = max(sum(sum(inst.law(1, j).probs[b] * inst.table((i, j))[a, b] ** 2
                      for b in range(len(inst.law(1, j))))
                  for j in range(n))
              for i in range(n) for a in range(len(inst.law(0, i))))
    # operator norm of (f, g) -> E sum h_ij f_i g_j on L2 of the coordinates
    rows = []
    for i in range(n):
        for a in range(len(inst.law(0, i))):
            r = []
            for j in range(n):
                for b in range(len(inst.law(1, j))):
                    r.append(math.sqrt(inst.law(0, i).probs[a] * inst.law(1, j).probs[b])
                             * inst.table((i, j))[a, b])
            rows.append(r)
    D = float(np.linalg.svd(np.array(rows), compute_uv=False)[0])
    return A, math.sqrt(max(col, row)), math.sqrt(C2), D


@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("n,atoms", [(2, 2), (3, 3)])
def test_abcd_match_loops(seed, n, atoms):
    inst = generate_instance("canonical", 2, n, atoms, seed)
    got = abcd_params(inst)
    A, B, C, D = _abcd_by_loops(inst)
    assert got.A == pytest.approx(A, rel=1e-12)
    assert got.B == pytest.approx(B, rel=1e-12)
    assert got.C == pytest.approx(C, rel=1e-12)
    assert got.D == pytest.approx(D, rel=1e-10)
    assert got.D <= got.C * (1 + 1e-12)


def test_abcd_power_equals_svd():
    inst = generate_instance("canonical", 2, 6, 3, seed=4)
    assert abcd_params(inst, "power").D == pytest.approx(abcd_params(inst, "svd").D, rel=1e-8)


def test_abcd_rejects_non_canonical_and_wrong_order():
    with pytest.raises(ValueError, match="canonical"):
        abcd_params(generate_instance("nonneg", 2, 2, 2, 0))
    with pytest.raises(ValueError, match="order-2"):
        abcd_params(generate_instance("canonical", 3, 2, 2, 0))


def test_centered_operator_norm_matches_for_canonical():
    inst = generate_instance("canonical", 2, 3, 2, seed=1)
    assert abcd_params(inst, centered=True).D == pytest.approx(abcd_params(inst).D, rel=1e-10)


def test_all_ones_chaos_parameters():
    n = 5
    inst = generate_instance("gaussian-chaos-analog", 2, n, 2, 0, coefficients=np.ones((n, n)))
    p = abcd_params(inst)
    assert (p.A, p.B, p.C, p.D) == pytest.approx((1.0, math.sqrt(n), n, n), rel=1e-12)


def test_iid_params_against_expanded_instance():
    law = DiscreteDistribution([-1.0, 0.0, 2.0], [0.4, 0.4, 0.2])
    x = law.atoms - law.mean()
    law = DiscreteDistribution(x, law.probs)
    h = np.outer(x, x) + 0.5 * np.outer(x ** 2 - float(law.probs @ x ** 2), x)
    for n in (2, 3, 5):
        iid = iid_params(h, law, n)
        full = abcd_params(expand_iid(h, law, n))
        assert iid.A == pytest.approx(full.A, rel=1e-12)
        assert iid.C == pytest.approx(full.C, rel=1e-12)
        assert iid.D == pytest.approx(full.D, rel=1e-10)
        assert full.B ** 2 <= iid.B ** 2 * (1 + 1e-12)
        assert iid.B ** 2 <= 2 * full.B ** 2 * (1 + 1e-12)


def test_iid_params_rejects_non_degenerate():
    law = DiscreteDistribution.rademacher()
    with pytest.raises(ValueError, match="degenerate"):
        iid_params(np.ones((2, 2)), law, 3)


@given(st.integers(0, 10_000), st.integers(1, 40), st.integers(1, 40))
def test_power_norm_matches_svd(seed, r, c):
    M = np.random.default_rng(seed).normal(size=(r, c))
    assert power_norm(M) == pytest.approx(float(np.linalg.svd(M, compute_uv=False)[0]), rel=1e-8)


def test_power_norm_with_ones_orthogonal_top_vector():
    M = np.array([[1.0, -1.0], [-1.0, 1.0]])
    assert power_norm(M) == pytest.approx(2.0, rel=1e-10)
    assert power_norm(np.zeros((3, 2))) == 0.0
    with pytest.raises(ValueError):
        operator_norm(M, "lanczos")


# quantiles and fixed points -------------------------------------------------------------------------


@given(st.integers(0, 100_000), st.floats(0.01, 0.99))
def test_t0_strict_tail_pair(seed, q):
    rng = np.random.default_rng(seed)
    d = FiniteDistribution.from_law(_random_law(rng, int(rng.integers(1, 7)), zero_prob=0.3))
    t0 = quantile_t0(d, q)
    assert t0 >= 0
    assert d.tail(t0, strict=True) <= q + 1e-15
    if t0 > 0:
        # every smaller threshold leaves more than q above it
        below = d.values[d.values < t0]
        probe = math.nextafter(t0, 0.0) if below.size == 0 else float(below[-1])
        assert d.tail(max(probe, 0.0), strict=True) > q or probe < 0


def test_t0_edge_cases():
    d = FiniteDistribution([0.0, 1.0, 2.0], [0.25, 0.25, 0.5])
    assert quantile_t0(d, 0.5) == 1.0       # P(A > 1) = 0.5
    assert quantile_t0(d, 0.49) == 2.0
    assert quantile_t0(d, 0.75) == 0.0
    assert quantile_t0(d, 1.0) == 0.0
    with pytest.raises(ValueError):
        quantile_t0(d, 0.0)


@given(st.integers(0, 100_000), st.integers(1, 6))
def test_delta0_pair(seed, k):
    rng = np.random.default_rng(seed)
    laws = [FiniteDistribution.from_law(_random_law(rng, int(rng.integers(1, 5)), zero_prob=0.3))
            for _ in range(k)]
    d = delta0(laws)
    strict = math.fsum(x.tail(d, strict=True) for x in laws)
    assert strict <= 1 + 1e-12
    if d > 0:
        assert math.fsum(x.tail(d) for x in laws) >= 1 - 1e-12


def test_delta0_examples():
    ones = [FiniteDistribution.point_mass(1.0)] * 3
    assert delta0(ones) == 1.0
    assert delta0([FiniteDistribution([0.0, 5.0], [0.5, 0.5])]) == 0.0
    with pytest.raises(ValueError):
        delta0([])


@given(st.integers(0, 100_000), st.integers(1, 6))
def test_v0_fixed_point_and_maximality(seed, k):
    rng = np.random.default_rng(seed)
    laws = [FiniteDistribution.from_law(_random_law(rng, int(rng.integers(1, 5)), zero_prob=0.3))
            for _ in range(k)]
    v = v0(laws)
    assert abs(phi(laws, v) - v) <= 1e-9 * max(1.0, v)
    for t in (v * (1 + 1e-6) + 1e-9, v + 0.1, 2 * v + 1, v + 10.0):
        assert phi(laws, t) < t
    assert delta0(laws) <= v * (1 + 1e-12) + 1e-12


def test_v0_examples():
    # n copies of the constant 1: phi(v) = n min(1, v), largest fixed point n
    assert v0([FiniteDistribution.point_mass(1.0)] * 4) == pytest.approx(4.0)
    # a single variable: phi(v) = E(xi ^ v) < v for v > 0 unless xi >= v a.s.
    assert v0([FiniteDistribution([0.0, 2.0], [0.5, 0.5])]) == pytest.approx(0.0)
    assert v0([FiniteDistribution.point_mass(3.0)] * 2, truncation=1.0) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        v0([FiniteDistribution([-1.0, 1.0], [0.5, 0.5])])


# closed forms ---------------------------------------------------------------------------------------


def test_paley_zygmund_values_and_errors():
    assert paley_zygmund_bound(0.5, 1.0, 2.0, 1.0, 2.0) == pytest.approx((0.5 * 0.5) ** 2)
    for args in [(0.0, 1, 2, 1, 1), (0.5, 2, 1, 1, 1), (0.5, 1, 2, 0, 1), (0.5, 1, 2, 3, 1)]:
        with pytest.raises(ValueError):
            paley_zygmund_bound(*args)


def test_talagrand_threshold():
    assert talagrand_threshold(1.0, 2.0, 0.5, 2.0) == pytest.approx(2 + 2 * 4 + 34.5)
    with pytest.raises(ValueError):
        talagrand_threshold(-1, 1, 1, 1)


def test_unit_parameters_give_e_inverse():
    p = BoundParams(1.0, 1.0, 1.0, 1.0)
    assert exp_bound_eval("four-regime", p, 1.0, 1.0) == pytest.approx(math.exp(-1.0))
    assert exp_bound_eval("three-regime", p, 1.0, 1.0) == pytest.approx(math.exp(-1.0))
    assert exp_bound_eval("bernstein", p, 1.0, 1.0) == pytest.approx(math.e ** 2 * math.exp(-math.e ** -2))


def test_zero_parameters():
    assert exp_bound_eval("four-regime", BoundParams(0, 0, 0, 0), 1.0) == 0.0
    terms = exponent_terms(BoundParams(1.0, 0.0, 2.0, 0.0), 4.0)
    assert set(terms) == {"x^2", "x^1/2"}
    with pytest.raises(ValueError):
        exp_bound_eval("four-regime", BoundParams(1, 1, 1, 1), 0.0)
    with pytest.raises(ValueError):
        exp_bound_eval("seven-regime", BoundParams(1, 1, 1, 1), 1.0)


@given(st.floats(0.01, 10), st.floats(0.01, 10), st.floats(0.01, 10), st.floats(0.01, 10),
       st.floats(0.1, 5), st.sampled_from(["bernstein", "three-regime", "four-regime"]))
def test_bounds_nonincreasing_in_x(A, B, C, D, L, form):
    p = BoundParams(A, B, C, D)
    xs = np.geomspace(0.01, 1e4, 40)
    vals = [exp_bound_eval(form, p, float(x), L) for x in xs]
    assert all(b <= a * (1 + 1e-12) for a, b in zip(vals, vals[1:]))


def test_regimes_for_all_ones_chaos():
    n = 10.0
    p = BoundParams(A=1.0, B=math.sqrt(n), C=n, D=n)
    assert active_regime(p, 0.5 * n) == "x^2"
    assert active_regime(p, 3 * n) == "x"
    assert active_regime(p, 2 * n * n) == "x^1/2"


def test_regime_for_single_row_chaos():
    n = 100.0
    p = BoundParams(A=1.0, B=math.sqrt(n), C=math.sqrt(n), D=math.sqrt(n))
    assert active_regime(p, 50.0) == "x^2/3"
