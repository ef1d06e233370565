"""Command-line interface: gen, bounds, verify, fit, simulate.

Exit codes: 0 success (all checks pass), 1 some check failed, 2 usage,
input or applicability error, 3 enumeration over the configuration cap.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import io, mc
from .bounds import EXP_FORMS, abcd_params, delta0, quantile_t0, v0
from .exact import (EnumerationInfeasible, coordinate_laws, exact_distribution, moment,
                    set_enumeration_cap)
from .model import (FAMILIES, NONNEGATIVE, InvalidInstance, generate_empirical_class,
                    generate_instance, is_canonical)
from .suite import (CASES, ApplicabilityError, build_class_corpus, build_corpus, check_inequality,
                    fit_constant, run_suite, write_reports)

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_INFEASIBLE = 0, 1, 2, 3
CLASS_FAMILY = "empirical-class"
SIM_FAMILIES = ("gaussian-chaos", "bernoulli-product")


class UsageError(Exception):
    pass


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ids(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="ustat-bounds", allow_abbrev=False,
                                  description="Exact and Monte-Carlo checks of U-statistic moment "
                                              "and tail inequalities.")
    sub = top.add_subparsers(dest="command", required=True)

    def command(name, help):
        p = sub.add_parser(name, help=help, allow_abbrev=False)
        p.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
        p.add_argument("--cap", type=int, default=None, help="maximum number of enumerated configurations")
        p.add_argument("-o", "--output", default=None, help="output file (default: stdout)")
        return p

    g = command("gen", "generate a seeded instance or empirical class")
    g.add_argument("--family", required=True, choices=FAMILIES + (CLASS_FAMILY,))
    g.add_argument("--m", type=int, default=2)
    g.add_argument("--n", type=int, default=2, help="index range (variables for a class)")
    g.add_argument("--atoms", type=int, default=2)
    g.add_argument("--functions", type=int, default=4, help="class size for empirical-class")
    g.add_argument("--kernel", choices=("canonical", "nonneg", "raw"), default=None,
                   help="kernel kind for symmetric-undecoupled")
    g.add_argument("--seed", type=int, required=True)

    b = command("bounds", "print A, B, C, D, t0, delta0, v0 for an instance")
    b.add_argument("file")
    b.add_argument("--p", type=float, default=None, help="also report E|U|^p")
    b.add_argument("--q", type=float, default=0.5, help="level of the t0 quantile")
    b.add_argument("--method", choices=("auto", "svd", "power"), default="auto")

    v = command("verify", "check inequalities on instance or class files")
    v.add_argument("files", nargs="+")
    v.add_argument("--ineq", type=_ids, action="extend", default=None,
                   help="case ids (comma-separated or repeated); default: every applicable case")
    v.add_argument("--p", type=_floats, default=[2.0])
    v.add_argument("--r", type=_floats, default=[0.5])
    v.add_argument("--constant", type=float, default=None)
    v.add_argument("--csv", default=None, help="also write the aggregate CSV here")

    f = command("fit", "fit the minimal constant of one inequality over files or a generated corpus")
    f.add_argument("files", nargs="*")
    f.add_argument("--ineq", required=True)
    f.add_argument("--p", type=float, required=True)
    f.add_argument("--r", type=float, default=None)
    f.add_argument("--family", choices=FAMILIES + (CLASS_FAMILY,), default=None)
    f.add_argument("--size", type=int, default=50)
    f.add_argument("--m", type=_floats, default=[1, 2])
    f.add_argument("--n", type=_floats, default=[2, 3])
    f.add_argument("--atoms", type=_floats, default=[2, 3])
    f.add_argument("--seed", type=int, default=None)

    s = command("simulate", "Monte-Carlo tail curve, optionally against an exponential bound")
    s.add_argument("file", nargs="?")
    s.add_argument("--family", choices=SIM_FAMILIES, default=None)
    s.add_argument("--n", type=int, default=None)
    s.add_argument("--reps", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--confidence", type=float, default=0.95)
    s.add_argument("--form", choices=EXP_FORMS, default="four-regime")
    s.add_argument("--constant", type=float, default=None)
    return top


def _emit(text: str, path):
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True, allow_nan=True) + "\n"


# commands -------------------------------------------------------------------------------------


def cmd_gen(a) -> int:
    if a.family == CLASS_FAMILY:
        subject = generate_empirical_class(a.n, a.functions, a.seed, a.atoms)
    else:
        opts = {} if a.kernel is None else {"kernel": a.kernel}
        subject = generate_instance(a.family, a.m, a.n, a.atoms, a.seed, **opts)
    _emit(io.dumps(subject) + "\n", a.output)
    return EXIT_OK


def cmd_bounds(a) -> int:
    inst = io.parse_instance_file(a.file)
    out: dict = {"instance": inst.name, "m": inst.m, "n": inst.n}
    if inst.m == 2 and is_canonical(inst):
        out.update(abcd_params(inst, a.method).as_dict())
    dist = exact_distribution(inst, threads=a.threads)
    nonneg = NONNEGATIVE in inst.flags or bool(np.all(dist.values >= 0))
    target = dist if nonneg else dist.abs()
    out["t0"] = quantile_t0(target, a.q)
    out["q"] = a.q
    out["t0_of"] = "U" if nonneg else "|U|"
    if a.p is not None:
        out["p"] = a.p
        out["moment"] = moment(dist, a.p)
    if inst.m == 1 and inst.decoupled and nonneg:
        laws = coordinate_laws(inst)
        if all(np.all(d.values >= 0) for d in laws):
            out["delta0"] = delta0(laws)
            out["v0"] = v0(laws)
    _emit(_dump(out), a.output)
    return EXIT_OK


def _load_all(files):
    return [io.read(path) for path in files]


def cmd_verify(a) -> int:
    subjects = _load_all(a.files)
    for k, s in enumerate(subjects):
        if not getattr(s, "name", ""):
            object.__setattr__(s, "name", a.files[k])
    skipped = []
    if a.ineq:
        reports = []
        for cid in a.ineq:
            case = CASES.get(cid)
            if case is None:
                raise UsageError(f"unknown inequality {cid!r}")
            for s in subjects:
                for p in a.p:
                    for r in (a.r if case.needs_r else [None]):
                        reports.append(check_inequality(cid, s, p, r, a.constant))
    else:
        consts = {} if a.constant is None else {c: a.constant for c in CASES}
        result = run_suite(subjects, p_grid=a.p, r_grid=a.r, constants=consts, threads=a.threads)
        reports, skipped = result.reports, result.skipped
        for cid, name, p, r, msg in result.skipped:
            print(f"skipped {cid} on {name} (p={p}, r={r}): {msg}", file=sys.stderr)
    reports.sort(key=lambda rep: (rep.case, rep.instance))
    _emit("".join(rep.to_json() + "\n" for rep in reports), a.output)
    if a.csv:
        write_reports(reports, csv_path=a.csv)
    failed = [rep for rep in reports if rep.mode != "report" and not (rep.passed or rep.vacuous)]
    for rep in failed:
        print(f"FAIL {rep.case} {rep.instance} p={rep.p:g} ratio={rep.ratio:.6g}", file=sys.stderr)
    if failed:
        return EXIT_FAIL
    return EXIT_INFEASIBLE if skipped else EXIT_OK


def cmd_fit(a) -> int:
    if a.files:
        corpus = _load_all(a.files)
    elif a.family is not None:
        if a.seed is None:
            raise UsageError("fit over a generated corpus needs --seed")
        if a.family == CLASS_FAMILY:
            corpus = build_class_corpus(a.size, seed=a.seed)
        else:
            corpus = build_corpus(a.family, a.size, [int(x) for x in a.m], [int(x) for x in a.n],
                                  [int(x) for x in a.atoms], a.seed)
    else:
        raise UsageError("fit needs instance files or --family")
    if a.ineq not in CASES:
        raise UsageError(f"unknown inequality {a.ineq!r}")
    res = fit_constant(a.ineq, corpus, a.p, a.r, a.threads)
    _emit(_dump({"case": res.case, "p": res.p, "r": res.r, "constant": res.constant,
                 "binding": res.binding, "instances": len(res.per_instance),
                 "vacuous": res.vacuous}), a.output)
    return EXIT_OK


def cmd_simulate(a) -> int:
    params, source, extra = None, None, {}
    if a.file is not None:
        if a.family is not None:
            raise UsageError("give either an instance file or --family, not both")
        source = io.parse_instance_file(a.file)
        if source.m == 2 and is_canonical(source):
            params = abcd_params(source)
    elif a.family == "gaussian-chaos":
        if a.n is None:
            raise UsageError("gaussian-chaos needs --n")
        coef = np.random.default_rng(a.seed).normal(size=(a.n, a.n))
        source = mc.GaussianChaos(coef)
        extra["coefficients_seed"] = a.seed
    elif a.family == "bernoulli-product":
        if a.n is None:
            raise UsageError("bernoulli-product needs --n")
        source = mc.BernoulliProduct(a.n)
        params = abcd_params(generate_instance("bernoulli-product", 2, a.n, 2, a.seed))
    else:
        raise UsageError("simulate needs an instance file or --family")
    summary = mc.sample_ustat(source, a.reps, a.seed, threads=a.threads)
    curve = mc.empirical_tail(summary, confidence=a.confidence)
    if params is not None:
        curve, _ = mc.tail_vs_bound(curve, params, a.form, a.constant)
        extra["params"] = params.as_dict()
    if a.family == "bernoulli-product":
        extra["log_tail_fit"] = mc.log_tail_slope(curve)
    _emit(_dump({"summary": summary.to_dict(), "curve": curve.to_dict(), **extra}), a.output)
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "bounds": cmd_bounds, "verify": cmd_verify, "fit": cmd_fit,
            "simulate": cmd_simulate}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be positive", file=sys.stderr)
        return EXIT_USAGE
    old_cap = None
    try:
        if args.cap is not None:
            old_cap = set_enumeration_cap(args.cap)
        return COMMANDS[args.command](args)
    except EnumerationInfeasible as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except InvalidInstance as exc:
        print("error: invalid input:\n  " + "\n  ".join(exc.violations), file=sys.stderr)
        return EXIT_USAGE
    except (ApplicabilityError, UsageError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    finally:
        if old_cap is not None:
            set_enumeration_cap(old_cap)


if __name__ == "__main__":
    sys.exit(main())
