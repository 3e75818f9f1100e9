"""Time the landscape flow kernels with numba against the numpy fallback.

    python benchmarks/bench_kernels.py [--res 301 601] [--repeat 3]

The numba timings exclude JIT compilation (one warm-up call per resolution).
Outputs of both backends are checked for equality before timing is reported.
"""

import argparse
import time

import numpy as np

from somogsa import _kernels, landscape, problems
from somogsa.biobj import BiObjectiveProblem


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def flow_only(kern, field):
    """The kernel stages of the flow on a precomputed field, without its evaluation."""
    nx, ny = field.shape
    dx, dy = field.xs[1] - field.xs[0], field.ys[1] - field.ys[0]
    forced = field.mo_norm < 1e-4
    succ = kern.resolve_cycles(kern.reversals(field.mo, kern.successors(field.mo, forced, dx, dy)))
    height, root = kern.accumulate(succ, field.mo_norm.reshape(-1))
    labels, _ = kern.label_sinks((succ == np.arange(nx * ny)).reshape(nx, ny))
    return height, labels


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--res", type=int, nargs="+", default=[301, 601])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--problem", default="gallagher")
    args = ap.parse_args(argv)

    backends = ["numpy"] + (["numba"] if _kernels.numba_available() else [])
    p = BiObjectiveProblem(problems.get_problem(args.problem))
    print(f"{'res':>5} {'stage':>6} {'backend':>8} {'seconds':>9} {'speedup':>8}")
    for res in args.res:
        spec = landscape.GridSpec(p.bounds, res)
        full, flow = {}, {}
        for name in backends:
            kern = _kernels.get_backend(name)
            run = lambda: landscape.compute_field(p, spec, backend=name)
            field = run()  # warm-up; compiles the numba kernels
            flow_only(kern, field)
            full[name] = best_of(run, args.repeat)
            flow[name] = best_of(lambda: flow_only(kern, field), args.repeat)
        if len(full) == 2:
            a, b = full["numpy"][1], full["numba"][1]
            assert np.array_equal(a.basin_id, b.basin_id) and np.allclose(a.height, b.height)
        for stage, results in (("full", full), ("flow", flow)):
            base = results["numpy"][0]
            for name, (t, _) in results.items():
                print(f"{res:>5} {stage:>6} {name:>8} {t:>9.4f} {base / t:>7.2f}x")


if __name__ == "__main__":
    main()
