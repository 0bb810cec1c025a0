"""Twin-run continuous-dependence study: Y(t)/Y(0) and Z(t)/Z(0) for several perturbation sizes.

    python3 scripts/perturb.py [--delta 1e-4 1e-6] [--csv FILE]
"""
import argparse
import csv

from _common import shipped
from nschs.experiments import perturb


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--delta", type=float, nargs="+", default=[1e-4, 1e-6])
    ap.add_argument("--csv", default=None, help="write t, delta, Y/Y0, Z/Z0 rows here")
    args = ap.parse_args()
    reports = [perturb(shipped("perturb"), d) for d in args.delta]
    for r in reports:
        print(f"delta {r.delta:g}: max Y/Y0 {r.Y_max_ratio:.5g}, Y amplification {r.Y_amplification:.5g}, "
              f"Z amplification {r.Z_amplification:.5g}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "delta", "Y_ratio", "Z_ratio"])
            for r in reports:
                for t, y, z in zip(r.t, r.Y, r.Z):
                    w.writerow([repr(t), repr(r.delta), repr(y / r.Y[0]), repr(z / r.Z[0])])


if __name__ == "__main__":
    main()
