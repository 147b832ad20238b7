"""Mean L1 distance between coupled copies started from independent stationary states."""
import argparse
import csv
import sys

import numpy as np

from fluctua import reflected, zrp
from fluctua.lattice import OccupationVector, PathPair
from fluctua.rng import run_replicas


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--model", choices=["zrp", "reflected"], default="reflected")
    ap.add_argument("--size", type=int, default=32, help="sites (zrp) or half-length (reflected)")
    ap.add_argument("--pairs", type=int, default=200)
    ap.add_argument("--times", type=float, nargs="+", default=[0.0, 0.05, 0.1, 0.2, 0.5, 1.0])
    ap.add_argument("--seed", type=int, default=3)
    ap.add_argument("--out", default="contraction.csv")
    args = ap.parse_args(argv)
    cps = sorted(args.times)
    tau = zrp.RateFunction.linear()

    def one(r, g):
        if args.model == "zrp":
            a, b = zrp.sample_invariant_many(args.size, 1.0, tau, g, 2)
            trs = zrp.coupled_evolve([OccupationVector(a), OccupationVector(b)], cps[-1], tau, g, cps)
            return [float(zrp.l1_heights(trs[0].configs[c], trs[1].configs[c])[0]) for c in range(len(cps))]
        X = reflected.sample_uniform_many(args.size, 2, g)
        _, V, W, _ = reflected.coupled_evolve([PathPair(*X[0]), PathPair(*X[1])], cps[-1], g, cps)
        return reflected.pair_distance(V[:, 0], W[:, 0], V[:, 1], W[:, 1]).tolist()

    d = np.array(run_replicas(one, args.pairs, args.seed, f"contract-{args.model}"))
    with open(args.out, "w", newline="\n") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "mean", "se"])
        for c, t in enumerate(cps):
            w.writerow([t, d[:, c].mean(), d[:, c].std(ddof=1) / np.sqrt(len(d))])
            print(f"t={t:g} mean={d[:, c].mean():.4f}", flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
