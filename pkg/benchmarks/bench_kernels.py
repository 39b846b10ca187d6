"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--pixels 10000] [--bands 200] [--p 3] [--repeat 5]

Each kernel is run once per backend to warm up (numba compiles or loads its
cache), then timed as the best of ``--repeat`` runs. The last column is the
largest absolute difference between the two backends' outputs.
"""

import argparse
import time

import numpy as np

from elmmkit import kernels
from elmmkit._accel import HAVE_NUMBA, backend


def _cases(n, L, p, rng):
    S0 = np.abs(rng.standard_normal((L, p))) + 0.1
    S0 /= np.linalg.norm(S0, axis=0)
    A = rng.dirichlet(np.full(p, 0.5), size=n)
    Psi = rng.uniform(0.5, 1.5, size=(n, p))
    Xt = (A * Psi) @ S0.T + 0.01 * rng.standard_normal((n, L))
    stack = kernels.update_locals(Xt, A, Psi, S0, 0.1)
    G, b = kernels.stack_gram(stack, Xt)
    a0 = np.full((n, p), 1.0 / p)
    return {
        "project_simplex_rows": lambda: kernels.project_simplex_rows(b),
        "simplex_qp": lambda: kernels.simplex_qp(G, b, a0)[0],
        "nnls_columns": lambda: kernels.nnls_columns(S0, Xt.T)[0],
        "update_locals": lambda: kernels.update_locals(Xt, A, Psi, S0, 0.1),
        "stack_gram": lambda: kernels.stack_gram(stack, Xt)[0],
        "pixel_terms": lambda: kernels.pixel_terms(Xt, stack, A, Psi, S0)[0],
        "update_scalings": lambda: kernels.update_scalings(stack, S0, 1e-8),
    }


def _best(fn, repeat):
    out = fn()
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pixels", type=int, default=10000)
    ap.add_argument("--bands", type=int, default=200)
    ap.add_argument("--p", type=int, default=3)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if not HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    rng = np.random.default_rng(args.seed)
    with backend("numpy"):
        cases = _cases(args.pixels, args.bands, args.p, rng)
    print(f"N={args.pixels} L={args.bands} P={args.p}, best of {args.repeat}")
    print(f"{'kernel':<22}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>9}{'max |diff|':>12}")
    rows = []
    for name, fn in cases.items():
        with backend("numpy"):
            t_np, out_np = _best(fn, args.repeat)
        with backend("numba"):
            t_nb, out_nb = _best(fn, args.repeat)
        diff = float(np.max(np.abs(np.asarray(out_np) - np.asarray(out_nb))))
        rows.append((name, t_np, t_nb))
        print(f"{name:<22}{1e3 * t_np:>12.2f}{1e3 * t_nb:>12.2f}{t_np / t_nb:>9.1f}{diff:>12.2e}")
    return rows


if __name__ == "__main__":
    main()
