"""Regenerate the precompiled qutrit-Clifford catalog shipped with the package."""

import argparse
import time

from lsgate import srb


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="src/lsgate/data/clifford_catalog.json")
    ap.add_argument("--max-ls", type=int, default=3)
    ap.add_argument("--restarts", type=int, default=12)
    args = ap.parse_args()
    t0 = time.time()

    def progress(i, seq):
        print(f"{i:3d}  n_ls={seq.n_ls}  n_1q={seq.n_1q}  {time.time() - t0:7.1f} s", flush=True)

    cat = srb.build_catalog(args.max_ls, args.restarts, progress=progress)
    srb.save_catalog(cat, args.out)
    print(srb.catalog_stats(cat))


if __name__ == "__main__":
    main()
