"""Time each hot kernel with the numba and the numpy implementation.

    python benchmarks/bench_kernels.py [--rows 20000] [--repeat 3]

Both implementations are imported directly, so the env flag is not needed.
Results are checked for equality before timing.
"""

import argparse
import time

import numpy as np

from idsfusion import kernels
from idsfusion._accel import HAVE_NUMBA


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def as_tuple(result):
    return result if isinstance(result, tuple) else (result,)


def cases(rows, features, seed):
    rng = np.random.default_rng(seed)
    X = np.ascontiguousarray(rng.normal(size=(rows, features)).round(2))
    y = (X[:, 0] + 0.5 * rng.normal(size=rows) > 0).astype(np.int64)
    idx = np.arange(rows, dtype=np.int64)
    feats = np.arange(features, dtype=np.int64)
    p = 1.0 / (1.0 + np.exp(-X[:, 1]))
    g, h = p - y, p * (1 - p)
    G, H = np.cumsum(g)[-1], np.cumsum(h)[-1]

    # a fitted tree to traverse
    from idsfusion.models import fit_tree
    tree = fit_tree(X, y=y).trees[0]
    arrays = (tree.feature, tree.threshold, tree.left, tree.right)

    knn_rows = min(rows, 4000)
    Xk = np.ascontiguousarray(X[:knn_rows, :8])
    return {
        "gini_split": (
            lambda: kernels._gini_split_np(X, y, idx, feats, 1),
            lambda: kernels._gini_split_nb(X, y, idx, feats, 1),
        ),
        "newton_split": (
            lambda: kernels._newton_split_np(X, g, h, idx, feats, 1.0, 1, G, H),
            lambda: kernels._newton_split_nb(X, g, h, idx, feats, 1.0, 1, G, H),
        ),
        "tree_apply": (
            lambda: kernels._tree_apply_np(X, *arrays),
            lambda: kernels._tree_apply_nb(X, *arrays),
        ),
        f"knn (k=5, {knn_rows} rows)": (
            lambda: kernels._knn_np(Xk, 5),
            lambda: kernels._knn_nb(Xk, 5),
        ),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=20_000)
    ap.add_argument("--features", type=int, default=48)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if not HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    print(f"{'kernel':<26} {'numpy s':>10} {'numba s':>10} {'speedup':>8}")
    for name, (np_fn, nb_fn) in cases(args.rows, args.features, args.seed).items():
        a, b = np_fn(), nb_fn()  # also warms up the jit
        same = all(np.array_equal(u, v) for u, v in zip(as_tuple(a), as_tuple(b)))
        t_np = best_of(np_fn, args.repeat)
        t_nb = best_of(nb_fn, args.repeat)
        flag = "" if same else "  MISMATCH"
        print(f"{name:<26} {t_np:>10.4f} {t_nb:>10.4f} {t_np / t_nb:>7.1f}x{flag}")


if __name__ == "__main__":
    main()
