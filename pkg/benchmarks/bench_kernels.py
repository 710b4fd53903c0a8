"""Time the numba and numpy builds of the two hot kernels.

Run as ``python benchmarks/bench_kernels.py``. Each kernel is timed per call
over --repeats calls after a warmup that also pays numba's compile cost.
"""

import argparse
import time

import numpy as np

from spellcap import kernels


def _time(fn, args, repeats):
    fn(*args)  # warmup / jit compile
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - t0) / repeats


def _row(label, py_fn, nb_fn, args, repeats):
    t_py = _time(py_fn, args, repeats)
    if nb_fn is None:
        print(f"{label:<28} numpy {t_py * 1e6:>10.1f} us   numba (unavailable)")
        return
    t_nb = _time(nb_fn, args, repeats)
    print(f"{label:<28} numpy {t_py * 1e6:>10.1f} us   "
          f"numba {t_nb * 1e6:>10.1f} us   x{t_py / t_nb:.1f}")


def bench_levenshtein(repeats):
    rng = np.random.default_rng(0)
    for n in (16, 128, 1024):
        a = rng.integers(0, 26, n).astype(np.int32)
        b = rng.integers(0, 26, n).astype(np.int32)
        _row(f"levenshtein n={n}", kernels.levenshtein_ids_py,
             kernels.levenshtein_ids_nb, (a, b), repeats)


def bench_adam(repeats):
    rng = np.random.default_rng(0)
    for n in (4_096, 262_144, 1_048_576):
        args_for = {}
        for tag in ("py", "nb"):
            p = rng.standard_normal(n)
            args_for[tag] = (p, rng.standard_normal(n), np.zeros(n), np.zeros(n),
                            1e-3, 0.9, 0.999, 1e-8, 0.1, 0.001)
        label = f"adam n={n}"
        t_py = _time(kernels.adam_update_py, args_for["py"], repeats)
        if kernels.adam_update_nb is None:
            print(f"{label:<28} numpy {t_py * 1e6:>10.1f} us   numba (unavailable)")
            continue
        t_nb = _time(kernels.adam_update_nb, args_for["nb"], repeats)
        print(f"{label:<28} numpy {t_py * 1e6:>10.1f} us   "
              f"numba {t_nb * 1e6:>10.1f} us   x{t_py / t_nb:.1f}")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=50)
    args = parser.parse_args()
    print(f"numba available: {kernels.HAS_NUMBA}, active: {kernels.NUMBA_ACTIVE}")
    bench_levenshtein(args.repeats)
    bench_adam(args.repeats)


if __name__ == "__main__":
    main()
