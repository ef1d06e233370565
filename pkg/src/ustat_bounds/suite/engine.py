"""Checking, constant fitting and batch runs over the inequality registry."""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ..exact import EnumerationInfeasible
from ..model import EmpiricalClass
from .cases import (CASES, EQUALITY, EXACT, FIT, REPORT, TAIL_EXACT, TAIL_FIT, ApplicabilityError,
                    Evaluation, InequalityCase, get_case)

REL_TOL = 1e-9
FIT_MODES = (FIT, TAIL_FIT)
CSV_COLUMNS = ("case", "instance", "m", "n", "p", "r", "lhs", "rhs", "constant", "ratio", "pass",
               "vacuous")


@dataclass
class VerificationReport:
    case: str
    instance: str
    m: int | None
    n: int | None
    p: float
    r: float | None
    lhs: float
    rhs: float
    constant: float | None
    ratio: float
    passed: bool
    vacuous: bool
    mode: str = ""
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        d["details"] = _jsonable(d["details"])
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    return x


def subject_name(subject, k: int | None = None) -> str:
    name = getattr(subject, "name", "")
    if name:
        return name
    return f"subject-{k}" if k is not None else "subject"


def _shape(subject):
    if isinstance(subject, EmpiricalClass):
        return None, len(subject.variables)
    return subject.m, subject.n


# comparison -------------------------------------------------------------------------------------


def _arrays(ev: Evaluation, c: float):
    lhs = np.atleast_1d(np.asarray(ev.lhs, dtype=float))
    rhs = np.atleast_1d(np.asarray(ev.rhs(c), dtype=float))
    return lhs, rhs


def _holds(lhs, rhs, slack: float, rel: float = REL_TOL) -> bool:
    return bool(np.all(lhs <= rhs * (1 + rel) + slack))


def _ratios(lhs, rhs) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(rhs > 0, lhs / np.where(rhs > 0, rhs, 1.0), np.where(lhs > 0, np.inf, 0.0))


def minimal_constant(ev: Evaluation) -> float:
    """Smallest c >= 0 with lhs <= rhs(c) (plus the case's absolute slack)."""
    lhs = np.atleast_1d(np.asarray(ev.lhs, dtype=float))
    if np.all(lhs <= ev.absolute_slack):
        return 0.0
    if ev.power:
        base = np.atleast_1d(np.asarray(ev.rhs(1.0), dtype=float))
        need = lhs > ev.absolute_slack
        if np.any(base[need] <= 0):
            return math.inf
        c = float(np.max((lhs[need] / base[need]) ** (1.0 / ev.power)))
        for _ in range(64):
            if _holds(*_arrays(ev, c), ev.absolute_slack, rel=0.0):
                return c
            c = math.nextafter(c, math.inf) * (1 + 1e-15)
        return c
    pred = lambda c: _holds(*_arrays(ev, c), ev.absolute_slack, rel=0.0)
    hi = 1.0
    while not pred(hi):
        hi *= 2.0
        if hi > 1e200:
            return math.inf
    lo = hi / 2.0
    while pred(lo):
        hi, lo = lo, lo / 2.0
        if lo < 1e-300:
            return 0.0
    for _ in range(200):
        if hi - lo <= 1e-13 * hi:
            break
        mid = 0.5 * (lo + hi)
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return hi


def _as_fit(case: InequalityCase, ev: Evaluation) -> Evaluation:
    """Fit mode for an explicit-constant case: a multiplier on the explicit right side."""
    if case.mode in FIT_MODES:
        return ev
    base = ev.rhs
    return Evaluation(ev.lhs, lambda c: c * np.asarray(base(None), dtype=float), power=1.0,
                      details=ev.details, absolute_slack=ev.absolute_slack)


def _report(case: InequalityCase, subject, name: str, p, r, ev: Evaluation, c) -> VerificationReport:
    lhs, rhs = _arrays(ev, c)
    ratios = _ratios(lhs, rhs)
    k = int(np.argmax(ratios)) if ratios.size else 0
    vacuous = bool(np.all(lhs == 0) and np.all(rhs == 0))
    m, n = _shape(subject)
    details = dict(ev.details)
    if lhs.size > 1:
        details["lhs_all"] = lhs.tolist()
        details["rhs_all"] = rhs.tolist()
    return VerificationReport(
        case=case.id, instance=name, m=m, n=n, p=float(p), r=None if r is None else float(r),
        lhs=float(lhs[k]), rhs=float(rhs[k]), constant=None if c is None else float(c),
        ratio=float(ratios[k]), passed=_holds(lhs, rhs, ev.absolute_slack), vacuous=vacuous,
        mode=case.mode, details=details)


def check_inequality(case_id: str, subject, p: float, r: float | None = None,
                     constant: float | None = None, name: str | None = None) -> VerificationReport:
    """Evaluate one inequality on one subject.

    Fit-mode cases use ``constant`` when given; otherwise the minimal constant
    for this subject is fitted and recorded (``details['fitted']``).
    """
    case = get_case(case_id)
    case.check_applicable(subject, p, r)
    ev = case.evaluate(subject, p, r, constant)
    name = subject_name(subject) if name is None else name
    if case.mode in FIT_MODES:
        if constant is None:
            constant = minimal_constant(ev)
            ev.details["fitted"] = True
        return _report(case, subject, name, p, r, ev, constant)
    c = constant if constant is not None else case.default_constant
    return _report(case, subject, name, p, r, ev, c)


@dataclass
class FitResult:
    case: str
    p: float
    r: float | None
    constant: float
    per_instance: list
    binding: str
    vacuous: int


def fit_constant(case_id: str, corpus: Sequence, p: float, r: float | None = None,
                 threads: int = 1) -> FitResult:
    """Smallest constant making the case hold on every non-vacuous corpus member.

    For explicit-constant cases the fitted value multiplies the explicit right
    side, so a value <= 1 confirms the explicit constant on the corpus.
    """
    if not corpus:
        raise ValueError("empty corpus")
    case = get_case(case_id)
    for s in corpus:
        case.check_applicable(s, p, r)

    def one(s):
        ev = _as_fit(case, case.evaluate(s, p, r, None))
        lhs, rhs = _arrays(ev, 1.0)
        if np.all(lhs == 0) and np.all(rhs == 0):
            return None
        return minimal_constant(ev)

    values = _map(one, corpus, threads)
    live = [(v, subject_name(s, k)) for k, (s, v) in enumerate(zip(corpus, values)) if v is not None]
    if not live:
        raise ValueError("no binding instance: every corpus member is vacuous")
    best, who = max(live, key=lambda t: t[0])
    return FitResult(case.id, float(p), r, best, [v for v, _ in live], who,
                     sum(v is None for v in values))


def _map(fn, items, threads):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


# batch runs --------------------------------------------------------------------------------------


@dataclass
class CaseSummary:
    case: str
    mode: str
    reports: int
    vacuous: int
    passed: int
    pass_rate: float
    max_ratio: float
    fitted: dict

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


@dataclass
class SuiteResult:
    reports: list
    summary: dict
    skipped: list

    @property
    def all_passed(self) -> bool:
        return all(r.passed or r.vacuous for r in self.reports if r.mode != REPORT)


def _grid(case: InequalityCase, p_grid, r_grid):
    for p in p_grid:
        if case.needs_r:
            for r in r_grid:
                yield p, r
        else:
            yield p, None


def run_suite(corpus: Sequence, cases: Iterable[str] | None = None,
              p_grid: Sequence[float] = (2.0,), r_grid: Sequence[float] = (0.5,),
              constants: dict | None = None, threads: int = 1,
              include_reports: bool = True) -> SuiteResult:
    """Run every applicable (case, subject, p, r) combination.

    Fit-mode cases are first fitted on the applicable part of the corpus
    (unless ``constants`` supplies a value) and then reported at that constant.
    Report-mode cases are included but never count as failures.
    """
    constants = dict(constants or {})
    ids = list(CASES) if not cases else [get_case(c).id for c in cases]
    names = [subject_name(s, k) for k, s in enumerate(corpus)]
    reports, skipped = [], []
    fitted: dict = {}
    for cid in ids:
        case = CASES[cid]
        for p, r in _grid(case, p_grid, r_grid):
            members = [k for k, s in enumerate(corpus) if case.is_applicable(s, p, r)]
            if not members:
                continue

            def evaluate(k, case=case, p=p, r=r):
                try:
                    return case.evaluate(corpus[k], p, r, constants.get(case.id))
                except EnumerationInfeasible as exc:
                    return exc

            evs = _map(evaluate, members, threads)
            ok = [(k, ev) for k, ev in zip(members, evs) if isinstance(ev, Evaluation)]
            skipped.extend((cid, names[k], p, r, str(ev)) for k, ev in zip(members, evs)
                           if not isinstance(ev, Evaluation))
            if case.mode in FIT_MODES:
                if cid in constants:
                    c = constants[cid]
                else:
                    live = [minimal_constant(ev) for _, ev in ok
                            if not (np.all(np.asarray(ev.lhs) == 0)
                                    and np.all(np.asarray(ev.rhs(1.0)) == 0))]
                    c = max(live) if live else None
                    fitted[(cid, p, r)] = c
                if c is None:
                    continue
            else:
                c = constants.get(cid, case.default_constant)
            for k, ev in ok:
                reports.append(_report(case, corpus[k], names[k], p, r, ev, c))
    summary = summarize(reports, fitted)
    return SuiteResult(reports if include_reports else [], summary, skipped)


def summarize(reports: Sequence[VerificationReport], fitted: dict | None = None) -> dict:
    fitted = fitted or {}
    out = {}
    by_case: dict = {}
    for rep in reports:
        by_case.setdefault(rep.case, []).append(rep)
    for cid, reps in by_case.items():
        live = [r for r in reps if not r.vacuous]
        passed = sum(r.passed for r in live)
        fits = {f"p={p:g}" + ("" if r is None else f",r={r:g}"): c
                for (fc, p, r), c in fitted.items() if fc == cid}
        out[cid] = CaseSummary(
            case=cid, mode=reps[0].mode, reports=len(reps), vacuous=len(reps) - len(live),
            passed=passed, pass_rate=passed / len(live) if live else 1.0,
            max_ratio=max((r.ratio for r in live), default=0.0), fitted=fits)
    return out


def write_reports(reports: Sequence[VerificationReport], jsonl_path=None, csv_path=None):
    if jsonl_path is not None:
        with open(jsonl_path, "w") as fh:
            for rep in reports:
                fh.write(rep.to_json() + "\n")
    if csv_path is not None:
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for rep in reports:
                d = rep.to_dict()
                w.writerow(["" if d[k] is None else d[k] for k in CSV_COLUMNS])
