"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--cells 2000] [--repeat 5]

Both backends receive identical inputs; the script also reports the largest
relative difference between their outputs.
"""

import argparse
import timeit

import numpy as np

from gbmo import _kernels_py as fallback
from gbmo.functionals import _design, full_basis

try:
    from gbmo import _kernels as compiled
except ImportError:
    compiled = None


def cases(cells: int, seed: int):
    rng = np.random.default_rng(seed)
    q = 64
    U = rng.normal(size=(cells, q, 2))
    W = np.full((cells, q), 1 / q)
    S = rng.normal(size=(6, 2))
    X = rng.uniform(-0.5, 0.5, size=(cells, q, 2))
    V = U + X @ rng.normal(size=(2, 2)).T
    V -= np.einsum("cq,cqm->cm", W, V)[:, None, :]
    M = _design(X, full_basis(2, 2), 2, False)
    small = max(1, cells // 10)
    out = {}
    for p in (1.0, 2.0, 3.0):
        out[f"mean_oscillation p={p:g}"] = ("mean_oscillation", (U, W, p))
        out[f"directional p={p:g}"] = ("directional_oscillation", (U, W, S, p))
        out[f"pair p={p:g}"] = ("pair_oscillation", (U[:small], W[:small], p))
    for p in (1.5, 3.0):
        out[f"linear_inf p={p:g}"] = ("linear_inf", (V[:small], M[:small], W[:small], p, 1e-6,
                                                     1e-10, 200))
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cells", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if compiled is None:
        print("compiled extension not available; only the fallback is timed")
    print(f"{'kernel':<26}{'fallback ms':>13}{'compiled ms':>13}{'speedup':>10}{'max rel diff':>14}")
    for label, (name, call_args) in cases(args.cells, args.seed).items():
        f = getattr(fallback, name)
        t_py = min(timeit.repeat(lambda: f(*call_args), number=1, repeat=args.repeat))
        if compiled is None:
            print(f"{label:<26}{1e3 * t_py:>13.2f}")
            continue
        g = getattr(compiled, name)
        t_c = min(timeit.repeat(lambda: g(*call_args), number=1, repeat=args.repeat))
        a, b = f(*call_args), g(*call_args)
        a, b = (a[0], b[0]) if isinstance(a, tuple) else (a, b)
        diff = np.max(np.abs(a - b) / np.maximum(np.abs(a), 1e-300))
        print(f"{label:<26}{1e3 * t_py:>13.2f}{1e3 * t_c:>13.2f}{t_py / t_c:>10.1f}{diff:>14.1e}")


if __name__ == "__main__":
    main()
