"""Compare the compiled and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat 3]

Times full enumeration of one instance and Monte-Carlo evaluation of one
Rademacher chaos, then checks that both backends agree bit for bit.
"""
import argparse
import time

import numpy as np

from ustat_bounds import _kernels, generate_instance
from ustat_bounds.exact import enumerate_problem, instance_problem
from ustat_bounds.mc import draw


def best_of(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def main():
    ap = argparse.ArgumentParser(allow_abbrev=False)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    backends = ["python"] + (["cython"] if _kernels.HAVE_EXTENSION else [])

    enum_inst = generate_instance("nonneg", 2, 5, 2, seed=11)  # 2^10 configurations, 25 terms
    big = generate_instance("nonneg", 3, 3, 3, seed=12)         # 3^9 configurations, 27 terms
    wide = generate_instance("nonneg", 2, 10, 2, seed=14)        # 2^20 configurations, 100 terms
    chaos = generate_instance("gaussian-chaos-analog", 2, 20, 2, seed=13)

    rows = []
    for label, inst in (("enumerate m=2 n=5", enum_inst), ("enumerate m=3 n=3 a=3", big),
                       ("enumerate m=2 n=10", wide)):
        problem = instance_problem(inst)
        results = {}
        for b in backends:
            sec, dist = best_of(lambda: enumerate_problem(problem, backend=b), args.repeat)
            results[b] = (sec, dist)
        same = all(np.array_equal(results[b][1].values, results["python"][1].values)
                   and np.array_equal(results[b][1].probs, results["python"][1].probs)
                   for b in backends)
        rows.append((label, problem.count(), results, same))

    reps = 200_000
    results = {}
    for b in backends:
        sec, vals = best_of(lambda: draw(chaos, reps, seed=5, backend=b), args.repeat)
        results[b] = (sec, vals)
    same = all(np.array_equal(results[b][1], results["python"][1]) for b in backends)
    rows.append(("sample chaos n=20", reps, results, same))

    print(f"{'kernel':28s} {'size':>10s} " + " ".join(f"{b:>10s}" for b in backends)
          + ("   speedup" if len(backends) > 1 else "") + "  identical")
    for label, size, results, same in rows:
        line = f"{label:28s} {size:10d} " + " ".join(f"{results[b][0]:9.4f}s" for b in backends)
        if len(backends) > 1:
            line += f" {results['python'][0] / results['cython'][0]:8.1f}x"
        print(line + f"  {same}")


if __name__ == "__main__":
    main()
