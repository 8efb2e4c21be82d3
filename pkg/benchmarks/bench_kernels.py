"""Time the compiled kernels against the numpy fallback on identical inputs.

    python benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from subsidylab import _fallback

try:
    from subsidylab import _kernels
except ImportError:
    _kernels = None


def cases(rng):
    for n in (8, 12, 16):
        table = rng.integers(0, 2, 1 << n).astype(np.float64)
        p = rng.uniform(0.05, 0.95, n)
        yield f"forcing transform n={n}", "forcing_transform", (table, p, 0)
    for n in (8, 12, 16):
        phi = rng.uniform(0, 1, 1 << n)
        c = rng.uniform(0, 1, n)
        yield f"nash mask n={n}", "nash_mask", (phi, c, 1e-9)
    for n, rows in ((6, 2000), (8, 2000)):
        phi = rng.uniform(0, 1, 1 << n)
        cmat = rng.uniform(-0.5, 1, (rows, n))
        yield f"nash mask batch n={n} rows={rows}", "nash_mask_batch", (phi, cmat, 1e-9)
    for agents, actions in ((4, 5), (6, 4)):
        options = (rng.random((agents, actions)) < 0.7).astype(np.int64)
        options[:, 0] = 1
        choices = [np.flatnonzero(row) for row in options]
        grids = np.meshgrid(*choices, indexing="ij")
        profiles = np.stack([g.ravel() for g in grids], axis=1).astype(np.int64)
        net = rng.uniform(0.5, 5, actions)
        yield f"csg mask N={agents} A={actions}", "csg_nash_mask", (profiles, net, options.astype(np.uint8), 1e-9)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'case':38s} {'python ms':>10s} {'cython ms':>10s} {'speedup':>8s}")
    for label, name, inputs in cases(rng):
        py = getattr(_fallback, name)
        t_py = min(timeit.repeat(lambda: py(*inputs), number=1, repeat=args.repeat)) * 1e3
        if _kernels is None:
            print(f"{label:38s} {t_py:10.3f} {'n/a':>10s}")
            continue
        cy = getattr(_kernels, name)
        a, b = np.asarray(py(*inputs)), np.asarray(cy(*inputs))
        if a.dtype == bool or b.dtype == bool:
            assert np.array_equal(a.astype(bool), b.astype(bool)), label
        else:
            assert np.allclose(a, b, atol=1e-12), label
        t_cy = min(timeit.repeat(lambda: cy(*inputs), number=1, repeat=args.repeat)) * 1e3
        print(f"{label:38s} {t_py:10.3f} {t_cy:10.3f} {t_py / t_cy:7.1f}x")


if __name__ == "__main__":
    main()
