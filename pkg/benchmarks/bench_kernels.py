"""Time the compiled coupling kernel against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--batch 4] [--gate 10] [--spectator 1] [--repeat 200]
"""

import argparse
import timeit

import numpy as np

from lsgate import _kernels_py, config, kernels
from lsgate.hamiltonian import UP


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--batch", type=int, default=4)
    ap.add_argument("--gate", type=int, default=10)
    ap.add_argument("--spectator", type=int, default=1)
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args()

    doc = config.load_config(overrides=[f"truncations.gate={args.gate}", f"truncations.spectator={args.spectator}"])
    model = config.model_for(config.build(doc), "full")
    rng = np.random.default_rng(1)
    psi = rng.normal(size=(args.batch, *model.shape)) + 1j * rng.normal(size=(args.batch, *model.shape))
    t = 1.234e-5
    rot = np.exp(1j * model._energies * t)
    coef = np.ascontiguousarray(model.coefficients(t, 1.0))
    call = (psi, rot, model._mats, coef, UP, model.level_shifts)

    ref = _kernels_py.apply_couplings(*call)
    print(f"state shape {psi.shape}, dimension {model.dimension}")
    timings = {"python": _kernels_py.apply_couplings}
    if kernels.BACKEND == "cython":
        from lsgate import _ckernels

        timings["cython"] = _ckernels.apply_couplings
        err = np.max(np.abs(_ckernels.apply_couplings(*call) - ref)) / np.max(np.abs(ref))
        print(f"max relative difference: {err:.2e}")
    else:
        print("compiled kernel unavailable; timing the fallback only")
    results = {}
    for name, fn in timings.items():
        best = min(timeit.repeat(lambda: fn(*call), number=args.repeat, repeat=3)) / args.repeat
        results[name] = best
        print(f"{name:>7s}: {best * 1e6:9.1f} us/call")
    if len(results) == 2:
        print(f"speed-up: {results['python'] / results['cython']:.2f}x")


if __name__ == "__main__":
    main()
