"""Bound parameters (A, B, C, D, t0, delta0, v0) and closed-form tail formulas."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .exact import FiniteDistribution
from .model import (CANONICAL_TOL, DiscreteDistribution, UStatInstance, is_canonical,
                    make_instance)

DENSE_SVD_MAX_DIM = 2000
POWER_TOL = 1e-10
POWER_MAX_ITER = 10_000
SUPPORT_TOL = 1e-12

EXP_FORMS = ("bernstein", "three-regime", "four-regime", "iid-four-regime")
REGIMES = ("x^2", "x", "x^2/3", "x^1/2")


@dataclass(frozen=True)
class BoundParams:
    """Order-2 parameters: sup norm A, conditional variance B, Hilbert-Schmidt C,
    operator norm D, plus optional quantile data."""

    A: float
    B: float
    C: float
    D: float
    t0: float | None = None
    q: float | None = None
    delta0: float | None = None
    v0: float | None = None

    def as_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}

    def scaled(self, c: float) -> "BoundParams":
        return BoundParams(c * self.A, c * self.B, c * self.C, c * self.D)


# order-2 parameters -----------------------------------------------------------------


def _require_order2_canonical(inst: UStatInstance, tol: float):
    if inst.m != 2:
        raise ValueError(f"parameters A, B, C, D need an order-2 instance, got m={inst.m}")
    if not is_canonical(inst, tol):
        raise ValueError("parameters A, B, C, D need a canonical kernel")


def kernel_matrix(inst: UStatInstance) -> np.ndarray:
    """Block matrix M[(i,a),(j,b)] = sqrt(P1_i(a) P2_j(b)) h_ij(a, b)."""
    n = inst.n
    rows = []
    for i in range(n):
        sp = np.sqrt(inst.law(0, i).probs)
        rows.append(np.hstack([sp[:, None] * inst.table((i, j)) * np.sqrt(inst.law(1, j).probs)[None, :]
                               for j in range(n)]))
    return np.vstack(rows)


def _centering_projector(laws: Sequence[DiscreteDistribution]) -> np.ndarray:
    blocks = [np.sqrt(l.probs) for l in laws]
    size = sum(b.size for b in blocks)
    P = np.eye(size)
    off = 0
    for b in blocks:
        P[off:off + b.size, off:off + b.size] -= np.outer(b, b)
        off += b.size
    return P


def power_norm(M: np.ndarray, tol: float = POWER_TOL, max_iter: int = POWER_MAX_ITER) -> float:
    """Largest singular value by power iteration on M^T M.

    The start vector is a fixed pseudo-random draw: the all-ones vector is
    orthogonal to the top singular space for common canonical kernels.
    """
    if M.size == 0 or not np.any(M):
        return 0.0
    v = np.random.default_rng(0).standard_normal(M.shape[1])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = M.T @ (M @ v)
        lam = float(v @ w)
        if lam <= 0:
            break
        if np.linalg.norm(w - lam * v) <= tol * lam:
            break
        v = w / np.linalg.norm(w)
    return math.sqrt(max(lam, 0.0))


def operator_norm(M: np.ndarray, method: str = "auto") -> float:
    if method == "auto":
        method = "svd" if max(M.shape) <= DENSE_SVD_MAX_DIM else "power"
    if method == "svd":
        return float(np.linalg.norm(M, 2)) if M.size else 0.0
    if method == "power":
        return power_norm(M)
    raise ValueError(f"unknown operator-norm method {method!r}")


def abcd_params(inst: UStatInstance, method: str = "auto", centered: bool = False,
                tol: float = CANONICAL_TOL) -> BoundParams:
    """A, B, C, D of a canonical order-2 instance (undecoupled input uses its decoupled twin)."""
    inst = inst.decoupled_twin()
    _require_order2_canonical(inst, tol)
    n = inst.n
    A = max(float(np.max(np.abs(inst.table(ij)), initial=0.0)) for ij in inst.indices())
    C2 = math.fsum(math.fsum(np.ravel(np.multiply.outer(inst.law(0, i).probs, inst.law(1, j).probs)
                                      * inst.table((i, j)) ** 2))
                   for i, j in inst.indices())
    # sum_i E_1 h_ij(X_i, y)^2 for each j and atom y, and the mirror
    by_col = max(float(np.max(sum(inst.law(0, i).probs @ inst.table((i, j)) ** 2 for i in range(n))))
                 for j in range(n))
    by_row = max(float(np.max(sum(inst.table((i, j)) ** 2 @ inst.law(1, j).probs for j in range(n))))
                 for i in range(n))
    M = kernel_matrix(inst)
    if centered:
        M = (_centering_projector([inst.law(0, i) for i in range(n)]) @ M
             @ _centering_projector([inst.law(1, j) for j in range(n)]))
    D = operator_norm(M, method)
    return BoundParams(A=A, B=math.sqrt(max(by_col, by_row)), C=math.sqrt(C2), D=D)


def iid_params(h, law: DiscreteDistribution, n: int, law_y: DiscreteDistribution | None = None,
               method: str = "auto", tol: float = CANONICAL_TOL) -> BoundParams:
    """Parameters for n x n copies of one degenerate kernel h over iid coordinates.

    B uses the sum of the two conditional sup norms, as in the iid statement.
    """
    law_y = law if law_y is None else law_y
    h = np.asarray(h, dtype=float)
    if h.shape != (len(law), len(law_y)):
        raise ValueError(f"kernel shape {h.shape} does not match laws ({len(law)}, {len(law_y)})")
    if np.max(np.abs(law.probs @ h), initial=0.0) > tol or np.max(np.abs(h @ law_y.probs), initial=0.0) > tol:
        raise ValueError("kernel is not degenerate for the given law")
    h2 = h * h
    ey = float(np.max(h2 @ law_y.probs))
    ex = float(np.max(law.probs @ h2))
    eh2 = math.fsum(np.ravel(np.multiply.outer(law.probs, law_y.probs) * h2))
    M = np.sqrt(law.probs)[:, None] * h * np.sqrt(law_y.probs)[None, :]
    return BoundParams(A=float(np.max(np.abs(h))), B=math.sqrt(n * (ey + ex)),
                       C=n * math.sqrt(eh2), D=n * operator_norm(M, method))


def expand_iid(h, law: DiscreteDistribution, n: int,
               law_y: DiscreteDistribution | None = None) -> UStatInstance:
    """The n x n decoupled instance with h_ij = h for all i, j."""
    law_y = law if law_y is None else law_y
    tables = {(i, j): np.asarray(h, dtype=float) for i in range(n) for j in range(n)}
    return make_instance([[law] * n, [law_y] * n], tables, name=f"iid-n{n}")


# quantiles and fixed points ----------------------------------------------------------


def _pairs(d) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(d, FiniteDistribution):
        return d.values, d.probs
    if isinstance(d, DiscreteDistribution):
        f = FiniteDistribution.from_law(d)
        return f.values, f.probs
    if isinstance(d, tuple) and len(d) == 2:
        return np.asarray(d[0], dtype=float), np.asarray(d[1], dtype=float)
    raise TypeError(f"expected a distribution, got {type(d).__name__}")


def _strict_tails(values: np.ndarray, probs: np.ndarray) -> np.ndarray:
    """P(X > values[k]) for sorted distinct values."""
    suffix = np.cumsum(probs[::-1])[::-1]
    return np.append(suffix[1:], 0.0)


def quantile_t0(dist, q: float) -> float:
    """inf{t >= 0 : P(A > t) <= q} for the strict upper tail."""
    if q <= 0:
        raise ValueError("quantile level must be positive")
    values, probs = _pairs(dist)
    if q >= 1 or values.size == 0:
        return 0.0
    tails = _strict_tails(values, probs)
    if float(np.sum(probs[values > 0])) <= q:
        return 0.0
    ok = np.nonzero((values > 0) & (tails <= q))[0]
    return float(values[ok[0]])


def _tail_sum(laws, t: float) -> float:
    total = 0.0
    for values, probs in laws:
        total += float(np.sum(probs[values > t]))
    return total


def delta0(laws: Sequence) -> float:
    """inf{t > 0 : sum_i P(xi_i > t) <= 1}."""
    if not laws:
        raise ValueError("delta0 needs at least one law")
    pairs = [_pairs(d) for d in laws]
    if _tail_sum(pairs, 0.0) <= 1 + SUPPORT_TOL:
        return 0.0
    support = np.unique(np.concatenate([v[v > 0] for v, _ in pairs]))
    for t in support:
        if _tail_sum(pairs, float(t)) <= 1 + SUPPORT_TOL:
            return float(t)
    return float(support[-1])


def phi(laws: Sequence, v: float) -> float:
    """sum_i E(xi_i ^ v)."""
    return math.fsum(math.fsum(p * np.minimum(x, v)) for x, p in map(_pairs, laws))


def v0(laws: Sequence, truncation: float | None = None) -> float:
    """Largest v with v = sum_i E(xi_i ^ v), by an exact scan of the linear pieces."""
    pairs = []
    for d in laws:
        x, p = _pairs(d)
        if np.any(x < 0):
            raise ValueError("v0 needs nonnegative laws")
        if truncation is not None:
            x = np.minimum(x, truncation)
        pairs.append((x, p))
    if not pairs:
        return 0.0
    breaks = np.unique(np.concatenate([x[x > 0] for x, _ in pairs]))
    # psi(v) = phi(v) - v is concave with psi(0) = 0; {psi >= 0} = [0, v0]
    lo, psi_lo = 0.0, 0.0
    for b in breaks:
        psi_b = phi(pairs, float(b)) - float(b)
        if psi_b < -SUPPORT_TOL * max(1.0, float(b)):
            break
        lo, psi_lo = float(b), psi_b
    slope = _tail_sum(pairs, lo)
    if slope >= 1:
        above = breaks[breaks > lo]
        return float(above[0]) if above.size else lo
    return lo + max(psi_lo, 0.0) / (1.0 - slope)


def paley_zygmund_bound(lam: float, r: float, p: float, norm_r: float, norm_p: float) -> float:
    """[(1 - lam^r) ||A||_r / ||A||_p]^{p/(p-r)}, a lower bound for P(A > lam ||A||_r)."""
    if not 0 < lam < 1:
        raise ValueError("lambda must lie in (0, 1)")
    if not 0 < r < p:
        raise ValueError("need 0 < r < p")
    if norm_r <= 0 or norm_p <= 0:
        raise ValueError("norms must be positive")
    if norm_r > norm_p * (1 + 1e-12):
        raise ValueError("need ||A||_r <= ||A||_p")
    return ((1.0 - lam ** r) * norm_r / norm_p) ** (p / (p - r))


def talagrand_threshold(mean_abs_S: float, sigma: float, a: float, x: float) -> float:
    if min(mean_abs_S, sigma, a, x) < 0:
        raise ValueError("inputs must be nonnegative")
    return 2.0 * mean_abs_S + sigma * math.sqrt(8.0 * x) + 34.5 * a * x


# exponential bounds ---------------------------------------------------------------------


def exponent_terms(params: BoundParams, x: float, form: str = "four-regime") -> dict:
    """The competing terms in the exponent (before the 1/constant factor).

    A term whose parameter vanishes is omitted.
    """
    if form in ("four-regime", "iid-four-regime"):
        terms = {"x^2": (x * x, params.C ** 2), "x": (x, params.D),
                 "x^2/3": (x ** (2 / 3), params.B ** (2 / 3)), "x^1/2": (math.sqrt(x), math.sqrt(params.A))}
    elif form == "three-regime":
        terms = {"x": (x, params.C), "x^2/3": (x ** (2 / 3), params.B ** (2 / 3)),
                 "x^1/2": (math.sqrt(x), math.sqrt(params.A))}
    else:
        raise ValueError(f"no regime terms for form {form!r}")
    return {k: num / den for k, (num, den) in terms.items() if den > 0}


def active_regime(params: BoundParams, x: float, form: str = "four-regime") -> str | None:
    terms = exponent_terms(params, x, form)
    return min(terms, key=terms.get) if terms else None


def exp_bound_eval(form: str, params: BoundParams, x: float, constant: float = 1.0) -> float:
    """Right side of one of the exponential tail bounds at threshold x.

    bernstein:        e^2 exp(-min(x/(K e A), (x/(K e C))^2))
    three-regime:     K exp(-(1/K) min(x/C, (x/B)^{2/3}, (x/A)^{1/2}))
    four-regime:      L exp(-(1/L) min(x^2/C^2, x/D, x^{2/3}/B^{2/3}, x^{1/2}/A^{1/2}))
    iid-four-regime:  four-regime evaluated at iid parameters
    """
    if x <= 0:
        raise ValueError("x must be positive")
    if constant <= 0:
        raise ValueError("constant must be positive")
    if form == "bernstein":
        K = constant
        parts = []
        if params.A > 0:
            parts.append(x / (K * math.e * params.A))
        if params.C > 0:
            parts.append((x / (K * math.e * params.C)) ** 2)
        return math.e ** 2 * math.exp(-min(parts)) if parts else 0.0
    if form not in EXP_FORMS:
        raise ValueError(f"unknown form {form!r}; expected one of {EXP_FORMS}")
    terms = exponent_terms(params, x, form)
    if not terms:
        return 0.0
    return constant * math.exp(-min(terms.values()) / constant)
