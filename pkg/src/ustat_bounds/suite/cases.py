"""Registry of checkable inequalities.

Each case turns a subject (a U-statistic instance or a finite empirical class)
plus exponents into an :class:`Evaluation`: a fixed left side and a right side
that may depend on one free constant.  ``lhs <= rhs`` is the claim in every
case; lower bounds are written with the bound on the left.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .. import bounds as B
from ..exact import (EmpiricalSup, coordinate_laws, chaos_moment, empirical_sup_moment,
                     exact_distribution, lr_mixed_moment, max_mixed_moment, mixed_moment,
                     moment, subsets)
from ..model import EmpiricalClass, UStatInstance, is_canonical, is_separately_symmetric

EXACT, FIT, TAIL_EXACT, TAIL_FIT, REPORT, EQUALITY = (
    "exact-constant", "fit-constant", "tail", "tail-fit", "report", "equality")
MODES = (EXACT, FIT, TAIL_EXACT, TAIL_FIT, REPORT, EQUALITY)

PZ_LAMBDAS = (0.25, 0.5, 0.75)
ALPHAS = (0.0, 0.5, 1.0, 2.0, 3.0, 4.0)
TALAGRAND_X = (0.1, 0.2, 0.5, 1.0, 2.0, 5.0)


class ApplicabilityError(ValueError):
    pass


@dataclass
class Evaluation:
    """``lhs`` is fixed; ``rhs(c)`` gives the right side for constant ``c``.

    ``power`` is set when ``rhs(c) == c**power * rhs(1)``, which allows a closed
    form fit.  Tail cases carry vectors over their threshold points.
    """

    lhs: object
    rhs: Callable[[float], object]
    power: float | None = None
    details: dict = field(default_factory=dict)
    absolute_slack: float = 0.0


@dataclass(frozen=True)
class InequalityCase:
    id: str
    label: str
    mode: str
    side: str
    requires: tuple
    p_rule: tuple  # (predicate, message)
    needs_r: bool
    evaluate: Callable
    default_constant: float | None = None

    def check_applicable(self, subject, p: float, r: float | None):
        for req in self.requires:
            msg = _REQUIREMENTS[req](subject)
            if msg:
                raise ApplicabilityError(f"{self.id} is not applicable: needs {msg}")
        ok, text = self.p_rule
        if not ok(p, r):
            raise ApplicabilityError(f"{self.id} is not applicable: needs {text} (got p={p}, r={r})")
        if self.needs_r and r is None:
            raise ApplicabilityError(f"{self.id} is not applicable: needs an r value")

    def is_applicable(self, subject, p: float, r: float | None) -> bool:
        try:
            self.check_applicable(subject, p, r)
        except ApplicabilityError:
            return False
        return True


CASES: dict[str, InequalityCase] = {}


# applicability --------------------------------------------------------------------------


def _is_nonneg(inst: UStatInstance) -> bool:
    key = "nonneg"
    if key not in inst._cache:
        inst._cache[key] = all(np.all(t >= 0) for t in inst.kernel.tables.values())
    return inst._cache[key]


def _canonical(inst: UStatInstance) -> bool:
    key = "canonical"
    if key not in inst._cache:
        inst._cache[key] = is_canonical(inst)
    return inst._cache[key]


def _is_iid(inst: UStatInstance) -> bool:
    first = inst.table((0,) * inst.m)
    if any(not np.array_equal(inst.table(i), first) for i in inst.indices()):
        return False
    return all(inst.law(j, i) == inst.law(j, 0) for j in range(inst.m) for i in range(inst.n))


def _need(pred, msg):
    return lambda s: None if pred(s) else msg


def _inst(s):
    return isinstance(s, UStatInstance)


_REQUIREMENTS = {
    "instance": _need(_inst, "a U-statistic instance"),
    "class": _need(lambda s: isinstance(s, EmpiricalClass), "a finite empirical class"),
    "m1": _need(lambda s: _inst(s) and s.m == 1, "order m = 1"),
    "m2": _need(lambda s: _inst(s) and s.m == 2, "order m = 2"),
    "decoupled": _need(lambda s: _inst(s) and s.decoupled, "a decoupled instance"),
    "undecoupled": _need(lambda s: _inst(s) and not s.decoupled, "an undecoupled instance"),
    "nonneg": _need(lambda s: _inst(s) and _is_nonneg(s), "nonnegative kernels"),
    "canonical": _need(lambda s: _inst(s) and _canonical(s), "canonical kernels"),
    "symmetric": _need(lambda s: _inst(s) and is_separately_symmetric(s),
                       "kernels separately symmetric in each coordinate"),
    "iid": _need(lambda s: _inst(s) and _is_iid(s), "one kernel and one law per slot"),
}

P_ANY = (lambda p, r: p > 0, "p > 0")
P_GE1 = (lambda p, r: p >= 1, "p >= 1")
P_GT1 = (lambda p, r: p > 1, "p > 1")
P_GE2 = (lambda p, r: p >= 2, "p >= 2")
P_GT2 = (lambda p, r: p > 2, "p > 2")
P_R_LT_P = (lambda p, r: r is not None and 0 < r < p, "0 < r < p")
P_R_LT_P_LE1 = (lambda p, r: r is not None and 0 < r < p <= 1, "0 < r < p <= 1")
P_LE1 = (lambda p, r: 0 < p <= 1, "0 < p <= 1")


def register(id, label, mode, side, requires=(), p_rule=P_ANY, needs_r=False,
             default_constant=None):
    def deco(fn):
        CASES[id] = InequalityCase(id, label, mode, side, tuple(requires), p_rule, needs_r, fn,
                                   default_constant)
        return fn
    return deco


# shared quantities --------------------------------------------------------------------------


def _Epow(inst, p):
    return moment(exact_distribution(inst), p)


def _fixed(value):
    return lambda c: value


def _jlabel(J):
    return "{" + ",".join(str(j + 1) for j in J) + "}"


def _sum_terms(inst):
    """Moments of the order-1 summands xi_i = h_i(X_i)."""
    return dict(
        sum_p=lambda p: mixed_moment(inst, (0,), p, absolute=True),
        sum_mean=lambda: mixed_moment(inst, (0,), 1, absolute=True),
        max_p=lambda p: max_mixed_moment(inst, (0,), p, absolute=True),
    )


def _strict_tail_sum(laws, t):
    return math.fsum(float(np.sum(d.probs[d.values > t])) for d in laws)


def _tail_points(dist_abs):
    """Positive support points v of |U| and P(|U| >= v)."""
    v, pr = dist_abs.values, dist_abs.probs
    ge = np.cumsum(pr[::-1])[::-1]
    keep = v > 0
    return v[keep], ge[keep]


# order-1 classical inequalities --------------------------------------------------------------


@register("R1", "Rosenthal-type bound with explicit constants, nonnegative summands", EXACT,
          "upper", ("m1", "decoupled", "nonneg"), P_GT1)
def _r1(inst, p, r, c):
    s = _sum_terms(inst)
    a, b = s["sum_p"](p), s["sum_mean"]() ** p
    rhs = (2 * math.e) ** p * max(math.e / p * p ** p * a, math.e ** p * b)
    return Evaluation(_Epow(inst, p), _fixed(rhs), details={"sum_E_xi_p": a, "sum_E_xi_pow_p": b})


@register("R2", "Rosenthal-type bound with (p/log p)^p growth, nonnegative summands", FIT, "upper",
          ("m1", "decoupled", "nonneg"), P_GT1)
def _r2(inst, p, r, c):
    s = _sum_terms(inst)
    base = (p / math.log(p)) ** p * max(s["sum_p"](p), s["sum_mean"]() ** p)
    return Evaluation(_Epow(inst, p), lambda k: k ** p * base, power=p)


def _hj_constant(p):
    return 2 ** (p - 2) * 2 ** max(p - 1, 0.0) * (p + 1) ** (p + 1)


@register("HJ", "Hoffmann-Jorgensen bound with the median-type quantile", EXACT, "upper",
          ("m1", "decoupled", "nonneg"), P_ANY)
def _hj(inst, p, r, c):
    t0 = B.quantile_t0(exact_distribution(inst), 0.5)
    emax = _sum_terms(inst)["max_p"](p)
    rhs = _hj_constant(p) * (t0 ** p + emax)
    return Evaluation(_Epow(inst, p), _fixed(rhs), details={"t0": t0, "q": 0.5, "E_max_p": emax})


@register("HJ_R", "Hoffmann-Jorgensen bound with an r-th moment in place of the quantile", EXACT,
          "upper", ("m1", "decoupled", "nonneg"), P_R_LT_P, needs_r=True)
def _hj_r(inst, p, r, c):
    emax = _sum_terms(inst)["max_p"](p)
    low = _Epow(inst, r) ** (p / r)
    rhs = _hj_constant(p) * (2 ** (p / r) * low + emax)
    return Evaluation(_Epow(inst, p), _fixed(rhs), details={"E_max_p": emax})


def _delta_terms(inst, p):
    laws = coordinate_laws(inst)
    d0 = B.delta0(laws)
    above = math.fsum(math.fsum(d.probs[d.values > d0] * np.abs(d.values[d.values > d0]) ** p)
                      for d in laws)
    return d0, above


@register("MAXSUM_LOWER", "max-moment lower bound through delta0", EXACT, "lower",
          ("m1", "decoupled", "nonneg"), P_ANY)
def _maxsum_lower(inst, p, r, c):
    d0, above = _delta_terms(inst, p)
    lhs = 0.5 * max(d0 ** p, above)
    return Evaluation(lhs, _fixed(_sum_terms(inst)["max_p"](p)), details={"delta0": d0})


@register("MAXSUM_UPPER", "max-moment upper bound through delta0", EXACT, "upper",
          ("m1", "decoupled", "nonneg"), P_ANY)
def _maxsum_upper(inst, p, r, c):
    d0, above = _delta_terms(inst, p)
    return Evaluation(_sum_terms(inst)["max_p"](p), _fixed(d0 ** p + above),
                      details={"delta0": d0})


@register("SUM_BY_MAX", "sum of p-th moments versus the max and r-th moments", EXACT, "upper",
          ("m1", "decoupled"), P_R_LT_P, needs_r=True)
def _sum_by_max(inst, p, r, c):
    s = _sum_terms(inst)
    emax = s["max_p"](p)
    rhs = 2 * emax + 2 * s["sum_p"](r) * emax ** ((p - r) / p)
    return Evaluation(s["sum_p"](p), _fixed(rhs))


@register("SUM_BY_MAX_ALPHA", "weighted sum of p-th moments versus the max, all alpha", EXACT,
          "upper", ("m1", "decoupled"), P_GT1)
def _sum_by_max_alpha(inst, p, r, c):
    s = _sum_terms(inst)
    sp, emax, mean = s["sum_p"](p), s["max_p"](p), s["sum_mean"]()
    lhs = np.array([p ** (a * p) * sp for a in ALPHAS])
    rhs = np.array([2 * (1 + p ** a) * max(p ** (a * p) * emax, mean ** p) for a in ALPHAS])
    return Evaluation(lhs, _fixed(rhs), details={"alpha": list(ALPHAS)})


@register("PZ", "Paley-Zygmund lower bound for P(|U| > lambda ||U||_r)", EXACT, "lower",
          ("instance",), P_R_LT_P, needs_r=True)
def _pz(inst, p, r, c):
    dist = exact_distribution(inst).abs()
    nr, np_ = moment(dist, r) ** (1 / r), moment(dist, p) ** (1 / p)
    if nr == 0:
        return Evaluation(np.zeros(len(PZ_LAMBDAS)), _fixed(np.zeros(len(PZ_LAMBDAS))))
    bound = np.array([B.paley_zygmund_bound(l, r, p, nr, max(np_, nr)) for l in PZ_LAMBDAS])
    prob = np.array([dist.tail(l * nr, strict=True) for l in PZ_LAMBDAS])
    return Evaluation(bound, _fixed(prob), details={"lambda": list(PZ_LAMBDAS)})


# order-m nonnegative kernels ------------------------------------------------------------------


def _sum_mixed(inst, p):
    return {J: mixed_moment(inst, J, p) for J in subsets(inst.m)}


def _max_mixed(inst, p, absolute=False, base=None):
    base = inst if base is None else base
    return {J: max_mixed_moment(base, J, p, absolute=absolute) for J in subsets(inst.m)}


def _terms_detail(terms):
    return {_jlabel(J): v for J, v in terms.items()}


@register("PROP21_LOWER", "mixed-moment lower bound (max over J), nonnegative kernels", EXACT,
          "lower", ("decoupled", "nonneg"), P_GE1)
def _prop21_lower(inst, p, r, c):
    t = _sum_mixed(inst, p)
    return Evaluation(max(t.values()), _fixed(_Epow(inst, p)), details={"terms": _terms_detail(t)})


@register("PROP21_UPPER", "mixed-moment upper bound with constant (2e^2)^{mp}", EXACT, "upper",
          ("decoupled", "nonneg"), P_GT1)
def _prop21_upper(inst, p, r, c):
    t = _sum_mixed(inst, p)
    rhs = (2 * math.e ** 2) ** (inst.m * p) * math.fsum(p ** (len(J) * p) * v for J, v in t.items())
    return Evaluation(_Epow(inst, p), _fixed(rhs), details={"terms": _terms_detail(t)})


@register("PROP21_LOGP", "mixed-moment upper bound with (Kp/log p)^{mp}", FIT, "upper",
          ("decoupled", "nonneg"), P_GT1)
def _prop21_logp(inst, p, r, c):
    base = (p / math.log(p)) ** (inst.m * p) * max(_sum_mixed(inst, p).values())
    return Evaluation(_Epow(inst, p), lambda k: k ** (inst.m * p) * base, power=inst.m * p)


def explicit_m2_terms(inst: UStatInstance, p: float) -> list:
    """The four order-2 mixed moments computed straight from the tables."""
    n = inst.n
    P1 = [inst.law(0, i).probs for i in range(n)]
    P2 = [inst.law(1, j).probs for j in range(n)]
    h = inst.table
    mean = math.fsum(P1[i] @ h((i, j)) @ P2[j] for i in range(n) for j in range(n))
    row = math.fsum(P1[i] @ sum(h((i, j)) @ P2[j] for j in range(n)) ** p for i in range(n))
    col = math.fsum(sum(P1[i] @ h((i, j)) for i in range(n)) ** p @ P2[j] for j in range(n))
    full = math.fsum(P1[i] @ h((i, j)) ** p @ P2[j] for i in range(n) for j in range(n))
    return [mean ** p, row, col, full]


@register("PROP21_M2", "order-2 mixed-moment upper bound written term by term", EXACT, "upper",
          ("m2", "decoupled", "nonneg"), P_GT1)
def _prop21_m2(inst, p, r, c):
    t = explicit_m2_terms(inst, p)
    rhs = (2 * math.e ** 2) ** (2 * p) * (t[0] + p ** p * t[1] + p ** p * t[2] + p ** (2 * p) * t[3])
    return Evaluation(_Epow(inst, p), _fixed(rhs), details={"terms": t})


@register("KN_M2", "order-2 bound with partial maxima and p^4 growth", FIT, "upper",
          ("m2", "decoupled", "nonneg"), P_GT1)
def _kn_m2(inst, p, r, c):
    t = _max_mixed(inst, p)
    base = (2 * math.e ** 2) ** p * p ** 4 * (
        t[()] + p ** p * t[(0,)] + p ** p * t[(1,)] + p ** (2 * p) * t[(0, 1)])
    return Evaluation(_Epow(inst, p), lambda k: k ** p * base, power=p)


@register("COR22_LOWER", "partial-maxima lower bound (max over J), nonnegative kernels", EXACT,
          "lower", ("decoupled", "nonneg"), P_GE1)
def _cor22_lower(inst, p, r, c):
    t = _max_mixed(inst, p)
    return Evaluation(max(t.values()), _fixed(_Epow(inst, p)), details={"terms": _terms_detail(t)})


@register("COR22_UPPER", "partial-maxima upper bound, constant K_m^p", FIT, "upper",
          ("decoupled", "nonneg"), P_GT1)
def _cor22_upper(inst, p, r, c):
    t = _max_mixed(inst, p)
    base = math.fsum(p ** (len(J) * p) * v for J, v in t.items())
    return Evaluation(_Epow(inst, p), lambda k: k ** p * base, power=p,
                      details={"terms": _terms_detail(t)})


@register("COR22_LOGP", "partial-maxima upper bound with (p/log p)^{mp}", FIT, "upper",
          ("decoupled", "nonneg"), P_GT1)
def _cor22_logp(inst, p, r, c):
    base = (p / math.log(p)) ** (inst.m * p) * max(_max_mixed(inst, p).values())
    return Evaluation(_Epow(inst, p), lambda k: k ** p * base, power=p)


@register("COR22_LR", "partial-maxima bound for L_r-valued sums (scalar case)", FIT, "upper",
          ("decoupled", "nonneg"), (lambda p, r: p > 1 and r is not None and r > 0, "p > 1, r > 0"),
          needs_r=True)
def _cor22_lr(inst, p, r, c):
    e = r / max(r, 1.0)  # ||x|| = |x|^{r/(r v 1)} for a one-point measure
    base = max(lr_mixed_moment(inst, J, p * e, e) for J in subsets(inst.m))
    return Evaluation(_Epow(inst, p * e), lambda k: k * base, power=1.0, details={"norm_power": e})


def _level_thm23(p, K):
    return 1.0 / (2 ** ((p + 1) / (p - 1)) * K ** (p / (p - 1)))


@register("THM23_LOWER", "quantile and partial-maxima lower bound, nonnegative kernels, p > 1",
          EXACT, "lower", ("decoupled", "nonneg"), P_GT1, default_constant=1.0)
def _thm23_lower(inst, p, r, c):
    K = 1.0 if c is None else c
    q = _level_thm23(p, K)
    t0 = B.quantile_t0(exact_distribution(inst), q)
    quant = t0 ** p / (4 * K) ** (p / (p - 1))
    t = {J: v for J, v in _max_mixed(inst, p).items() if J}
    lhs = max(quant, max(t.values()))
    return Evaluation(lhs, _fixed(_Epow(inst, p)),
                      details={"q": q, "t0": t0, "K": K, "quantile_term": quant,
                               "terms": _terms_detail(t)})


@register("THM23_UPPER", "quantile and partial-maxima upper bound, nonnegative kernels, p > 1",
          FIT, "upper", ("decoupled", "nonneg"), P_GT1)
def _thm23_upper(inst, p, r, c):
    dist = exact_distribution(inst)
    S = math.fsum(p ** (len(J) * p) * v for J, v in _max_mixed(inst, p).items() if J)

    def rhs(K):
        t0 = B.quantile_t0(dist, _level_thm23(p, K))
        return (4 * K) ** p * (2 ** (1 + p) * t0 ** p + S)
    return Evaluation(_Epow(inst, p), rhs, details={"partial_sum": S})


# canonical kernels ------------------------------------------------------------------------------


def _khinchin_chain(inst, p, m):
    lo_sq = moment(exact_distribution(inst.squared()), p / 2)
    chaos = chaos_moment(inst, p)
    full = _Epow(inst, p)
    lhs = np.array([2 ** (-m * p) * lo_sq, 2 ** (-m * p) * chaos, full,
                    2 ** (m * p) * chaos])
    rhs = np.array([2 ** (-m * p) * chaos, full, 2 ** (m * p) * chaos,
                    2 ** (m * p) * (p - 1) ** (m * p / 2) * lo_sq])
    return Evaluation(lhs, _fixed(rhs), details={
        "E_sq_pow": lo_sq, "E_chaos_p": chaos, "E_abs_p": full,
        "links": ["sq<=chaos", "chaos<=U", "U<=chaos", "chaos<=sq"]})


@register("KHINCHIN_1", "Khinchin sandwich for centered summands", EXACT, "two-sided",
          ("m1", "decoupled", "canonical"), P_GE2)
def _khinchin1(inst, p, r, c):
    return _khinchin_chain(inst, p, 1)


@register("KHINCHIN_M", "iterated Khinchin sandwich for canonical kernels", EXACT, "two-sided",
          ("decoupled", "canonical"), P_GE2)
def _khinchin_m(inst, p, r, c):
    return _khinchin_chain(inst, p, inst.m)


def _sq_terms(inst, p):
    sq = inst.squared()
    return {J: max_mixed_moment(sq, J, p / 2) for J in subsets(inst.m)}


@register("PROP24_LOWER", "canonical lower bound through squared kernels, constant 2^{-mp}",
          EXACT, "lower", ("decoupled", "canonical"), P_GT2)
def _prop24_lower(inst, p, r, c):
    t = _sq_terms(inst, p)
    lhs = 2 ** (-inst.m * p) * max(t.values())
    return Evaluation(lhs, _fixed(_Epow(inst, p)), details={"terms": _terms_detail(t)})


@register("PROP24_UPPER", "canonical upper bound through squared kernels", FIT, "upper",
          ("decoupled", "canonical"), P_GT2)
def _prop24_upper(inst, p, r, c):
    m = inst.m
    base = math.fsum(p ** ((m + len(J)) * p / 2) * v for J, v in _sq_terms(inst, p).items())
    return Evaluation(_Epow(inst, p), lambda k: k ** p * base, power=p)


def _level_thm25(p, m, K):
    return (0.75) ** (p / (p - 2)) / (2 * K ** p * p ** (m * p / 2)) ** (1 / (p - 2))


@register("THM25_LOWER", "canonical quantile lower bound, p > 2", EXACT, "lower",
          ("decoupled", "canonical"), P_GT2, default_constant=1.0)
def _thm25_lower(inst, p, r, c):
    K, m = (1.0 if c is None else c), inst.m
    q = _level_thm25(p, m, K)
    t0 = B.quantile_t0(exact_distribution(inst).abs(), q)
    quant = t0 ** p / (4 * K * p ** (m / 2)) ** (p / (p - 2))
    t = {J: v for J, v in _sq_terms(inst, p).items() if J}
    lhs = max(quant, 2 ** (-m * p) * max(t.values()))
    return Evaluation(lhs, _fixed(_Epow(inst, p)),
                      details={"q": q, "t0": t0, "K": K, "quantile_term": quant})


@register("THM25_UPPER", "canonical quantile upper bound, p > 2", FIT, "upper",
          ("decoupled", "canonical"), P_GT2)
def _thm25_upper(inst, p, r, c):
    m = inst.m
    dist = exact_distribution(inst).abs()
    S = math.fsum(p ** ((m + len(J)) * p / 2) * v for J, v in _sq_terms(inst, p).items() if J)

    def rhs(K):
        t0 = B.quantile_t0(dist, _level_thm25(p, m, K))
        return 2 * K ** p * ((2 * p ** (m / 2)) ** p * t0 ** p + S)
    return Evaluation(_Epow(inst, p), rhs)


# nonnegative kernels, p <= 1 --------------------------------------------------------------------


def _lr_terms(inst, p, r):
    return {J: lr_mixed_moment(inst, J, p, r) for J in subsets(inst.m)}


@register("PROP26_LOWER", "L_r partial-maxima lower bound, p <= 1", EXACT, "lower",
          ("decoupled", "nonneg"), P_R_LT_P_LE1, needs_r=True)
def _prop26_lower(inst, p, r, c):
    t = _lr_terms(inst, p, r)
    return Evaluation(max(t.values()), _fixed(_Epow(inst, p)), details={"terms": _terms_detail(t)})


@register("PROP26_UPPER", "L_r partial-maxima upper bound, p <= 1", FIT, "upper",
          ("decoupled", "nonneg"), P_R_LT_P_LE1, needs_r=True)
def _prop26_upper(inst, p, r, c):
    base = max(_lr_terms(inst, p, r).values())
    return Evaluation(_Epow(inst, p), lambda k: k * base, power=1.0)


def _level_thm27(p, r, K):
    return 0.5 * (2 ** (p + 1) * K) ** (-1 / (p - r))


@register("THM27_LOWER", "L_r partial-maxima lower bound over nonempty J, p <= 1", EXACT, "lower",
          ("decoupled", "nonneg"), P_R_LT_P_LE1, needs_r=True)
def _thm27_lower(inst, p, r, c):
    t = {J: v for J, v in _lr_terms(inst, p, r).items() if J}
    return Evaluation(max(t.values()), _fixed(_Epow(inst, p)),
                      details={"terms": _terms_detail(t), "reading": "max over nonempty J"})


@register("THM27_QUANTILE_LOWER", "quantile lower term for p <= 1 at the displayed level", REPORT,
          "lower", ("decoupled", "nonneg"), P_R_LT_P_LE1, needs_r=True, default_constant=1.0)
def _thm27_quantile(inst, p, r, c):
    K = 1.0 if c is None else c
    q = _level_thm27(p, r, K)
    t0 = B.quantile_t0(exact_distribution(inst), q)
    coef = (2 ** (p + 1) * K) ** (-1 / (p - r))
    return Evaluation(coef * t0 ** p, _fixed(_Epow(inst, p)), details={"q": q, "t0": t0, "K": K})


@register("THM27_UPPER", "quantile and L_r partial-maxima upper bound, p <= 1", FIT, "upper",
          ("decoupled", "nonneg"), P_R_LT_P_LE1, needs_r=True)
def _thm27_upper(inst, p, r, c):
    dist = exact_distribution(inst)
    S = math.fsum(v for J, v in _lr_terms(inst, p, r).items() if J)

    def rhs(K):
        t0 = B.quantile_t0(dist, _level_thm27(p, r, K))
        return 2 * K * (2 ** (p / r) * t0 ** p + S)
    return Evaluation(_Epow(inst, p), rhs)


# Klass-Nowicki -----------------------------------------------------------------------------------


def _kn_parts(inst, p):
    laws = coordinate_laws(inst)
    return laws, B.v0(laws), _sum_terms(inst)["max_p"](p)


@register("KN_ENVELOPE", "moment of a sum versus E max + v0^p (ratio report)", REPORT, "two-sided",
          ("m1", "decoupled", "nonneg"), P_ANY)
def _kn_envelope(inst, p, r, c):
    laws, v, emax = _kn_parts(inst, p)
    t0 = B.quantile_t0(exact_distribution(inst), 0.5)
    vt = B.v0(laws, truncation=t0)
    full = _Epow(inst, p)
    denom = emax + v ** p
    return Evaluation(full, _fixed(denom), details={
        "v0": v, "v0_truncated": vt, "E_max_p": emax,
        "ratio_truncated": full / (emax + vt ** p) if emax + vt ** p > 0 else float("nan")})


@register("KN_DELTA_V", "delta0 <= v0", EXACT, "upper", ("m1", "decoupled", "nonneg"), P_ANY)
def _kn_delta_v(inst, p, r, c):
    laws = coordinate_laws(inst)
    return Evaluation(B.delta0(laws), _fixed(B.v0(laws)))


@register("KN_UPPER_SMALL_P", "E(sum)^p <= v0^p + 2 E max^p for p <= 1", EXACT, "upper",
          ("m1", "decoupled", "nonneg"), P_LE1)
def _kn_upper_small(inst, p, r, c):
    laws, v, emax = _kn_parts(inst, p)
    return Evaluation(_Epow(inst, p), _fixed(v ** p + 2 * emax), details={"v0": v})


@register("KN_LOWER_LARGE_P", "v0^p <= E(sum)^p for p >= 1", EXACT, "lower",
          ("m1", "decoupled", "nonneg"), P_GE1)
def _kn_lower_large(inst, p, r, c):
    laws, v, emax = _kn_parts(inst, p)
    return Evaluation(v ** p, _fixed(_Epow(inst, p)), details={"v0": v})


# randomization and decoupling -------------------------------------------------------------------


@register("SYMM_RANDOMIZATION", "sign randomization leaves the law unchanged", EQUALITY,
          "two-sided", ("decoupled", "symmetric"), P_ANY)
def _symm_randomization(inst, p, r, c):
    a, b = _Epow(inst, p), chaos_moment(inst, p)
    return Evaluation(np.array([a, b]), _fixed(np.array([b, a])),
                      details={"E_abs_p": a, "E_chaos_p": b})


@register("SYMM_KHINCHIN_UPPER", "E|U|^p <= K^p E(sum h^2)^{p/2}, separately symmetric kernels",
          FIT, "upper", ("decoupled", "symmetric"), P_ANY)
def _symm_upper(inst, p, r, c):
    sq = moment(exact_distribution(inst.squared()), p / 2)
    return Evaluation(_Epow(inst, p), lambda k: k ** p * sq, power=p)


@register("SYMM_KHINCHIN_LOWER", "E(sum h^2)^{p/2} <= K^p E|U|^p, separately symmetric kernels",
          FIT, "lower", ("decoupled", "symmetric"), P_ANY)
def _symm_lower(inst, p, r, c):
    sq = moment(exact_distribution(inst.squared()), p / 2)
    full = _Epow(inst, p)
    return Evaluation(sq, lambda k: k ** p * full, power=p)


@register("DECOUPLING", "undecoupled versus decoupled p-th moment (ratio report)", REPORT,
          "two-sided", ("undecoupled",), P_ANY)
def _decoupling(inst, p, r, c):
    und = _Epow(inst, p)
    dec = _Epow(inst.decoupled_twin(), p)
    return Evaluation(und, _fixed(dec), details={"undecoupled": und, "decoupled": dec})


# exponential-type bounds, order 1 ---------------------------------------------------------------


@register("PINELIS", "Rosenthal bound for centered summands, p >= 2", FIT, "upper",
          ("m1", "decoupled", "canonical"), P_GE2)
def _pinelis(inst, p, r, c):
    s = _sum_terms(inst)
    base = max(p ** p * s["max_p"](p), p ** (p / 2) * s["sum_p"](2) ** (p / 2))
    return Evaluation(_Epow(inst, p), lambda k: k ** p * base, power=p)


def _order1_AC(inst):
    A = max(float(np.max(np.abs(inst.table((i,))))) for i in range(inst.n))
    C = math.sqrt(mixed_moment(inst, (0,), 2, absolute=True))
    return A, C


def _tail_eval(inst, bound_fn, details=None):
    v, ge = _tail_points(exact_distribution(inst).abs())
    return Evaluation(ge, lambda k: np.array([bound_fn(k, x) for x in v]),
                      details=dict(details or {}, x=v.tolist()), absolute_slack=1e-12)


@register("BERNSTEIN", "Bernstein tail for bounded centered summands", TAIL_FIT, "upper",
          ("m1", "decoupled", "canonical"), P_ANY)
def _bernstein(inst, p, r, c):
    A, C = _order1_AC(inst)
    params = B.BoundParams(A=A, B=0.0, C=C, D=0.0)
    return _tail_eval(inst, lambda k, x: B.exp_bound_eval("bernstein", params, x, k),
                      {"A": A, "C": C})


# order-2 canonical --------------------------------------------------------------------------------


def _rosenthal_m2_terms(inst, p):
    t = _sq_terms(inst, p)
    return [p ** p * t[()], p ** (1.5 * p) * t[(0,)], p ** (1.5 * p) * t[(1,)],
            p ** (2 * p) * max_mixed_moment(inst, (0, 1), p, absolute=True)]


@register("ROSENTHAL_M2", "order-2 canonical moment bound (four maxima)", FIT, "upper",
          ("m2", "decoupled", "canonical"), P_GE2)
def _rosenthal_m2(inst, p, r, c):
    base = max(_rosenthal_m2_terms(inst, p))
    return Evaluation(_Epow(inst, p), lambda k: k ** p * base, power=p)


@register("EXP_THREE_REGIME", "three-regime exponential tail, order-2 canonical", TAIL_FIT, "upper",
          ("m2", "decoupled", "canonical"), P_ANY)
def _exp_three(inst, p, r, c):
    params = B.abcd_params(inst)
    return _tail_eval(inst, lambda k, x: B.exp_bound_eval("three-regime", params, x, k),
                      params.as_dict())


@register("THM32", "order-2 canonical moment bound with the operator norm", FIT, "upper",
          ("m2", "decoupled", "canonical"), P_GE2)
def _thm32(inst, p, r, c):
    params = B.abcd_params(inst)
    t = _sq_terms(inst, p)
    emax = max_mixed_moment(inst, (0, 1), p, absolute=True)
    base = (p ** (p / 2) * params.C ** p + p ** p * params.D ** p
            + p ** (1.5 * p) * (t[(0,)] + t[(1,)]) + p ** (2 * p) * emax)
    return Evaluation(_Epow(inst, p), lambda k: k ** p * base, power=p, details=params.as_dict())


def _abcd_moment(params, p):
    return (p ** (p / 2) * params.C ** p + p ** p * params.D ** p
            + p ** (1.5 * p) * params.B ** p + p ** (2 * p) * params.A ** p)


@register("THM33_MOMENT", "order-2 canonical moment bound in A, B, C, D", FIT, "upper",
          ("m2", "decoupled", "canonical"), P_GE2)
def _thm33_moment(inst, p, r, c):
    params = B.abcd_params(inst)
    base = _abcd_moment(params, p)
    return Evaluation(_Epow(inst, p), lambda k: k ** p * base, power=p, details=params.as_dict())


@register("THM33_TAIL", "four-regime exponential tail, order-2 canonical", TAIL_FIT, "upper",
          ("m2", "decoupled", "canonical"), P_ANY)
def _thm33_tail(inst, p, r, c):
    params = B.abcd_params(inst)
    return _tail_eval(inst, lambda k, x: B.exp_bound_eval("four-regime", params, x, k),
                      params.as_dict())


def _iid(inst):
    return B.iid_params(inst.table((0, 0)), inst.law(0, 0), inst.n, inst.law(1, 0))


@register("COR34_MOMENT", "iid order-2 moment bound", FIT, "upper",
          ("m2", "decoupled", "canonical", "iid"), P_GE2)
def _cor34_moment(inst, p, r, c):
    params = _iid(inst)
    base = _abcd_moment(params, p)
    return Evaluation(_Epow(inst, p), lambda k: k ** p * base, power=p, details=params.as_dict())


@register("COR34_TAIL", "iid order-2 exponential tail", TAIL_FIT, "upper",
          ("m2", "decoupled", "canonical", "iid"), P_ANY)
def _cor34_tail(inst, p, r, c):
    params = _iid(inst)
    return _tail_eval(inst, lambda k, x: B.exp_bound_eval("iid-four-regime", params, x, k),
                      params.as_dict())


# empirical processes ------------------------------------------------------------------------------


def _sup(cls: EmpiricalClass, p: float) -> EmpiricalSup:
    return empirical_sup_moment(cls, max(p, 1.0))


@register("TALAGRAND", "Talagrand-Massart deviation bound for a finite class", TAIL_EXACT, "upper",
          ("class",), P_ANY)
def _talagrand(cls, p, r, c):
    s = _sup(cls, 1.0)
    dist_abs = s.distribution.abs()
    sigma = math.sqrt(s.sigma2)
    thr = [B.talagrand_threshold(s.mean_abs, sigma, s.a, x) for x in TALAGRAND_X]
    lhs = np.array([dist_abs.tail(t) for t in thr])
    rhs = np.exp(-np.array(TALAGRAND_X))
    return Evaluation(lhs, _fixed(rhs), absolute_slack=1e-12,
                      details={"x": list(TALAGRAND_X), "threshold": thr,
                               "E_abs_S": s.mean_abs, "sigma": sigma, "a": s.a})


@register("TALAGRAND_MOMENT", "moment form of the Talagrand-Massart bound", FIT, "upper",
          ("class",), P_GE1)
def _talagrand_moment(cls, p, r, c):
    s = _sup(cls, p)
    base = s.mean_abs ** p + p ** (p / 2) * s.sigma2 ** (p / 2) + p ** p * s.a ** p
    return Evaluation(s.moment_p, lambda k: k ** p * base, power=p)


@register("PROP31", "moment bound with the envelope maximum for a finite class", FIT, "upper",
          ("class",), P_GE1)
def _prop31(cls, p, r, c):
    s = _sup(cls, p)
    base = s.mean_abs ** p + p ** (p / 2) * s.sigma2 ** (p / 2) + p ** p * s.envelope_moment
    return Evaluation(s.moment_p, lambda k: k ** p * base, power=p)


def get_case(case_id: str) -> InequalityCase:
    try:
        return CASES[case_id]
    except KeyError:
        raise KeyError(f"unknown inequality {case_id!r}") from None
