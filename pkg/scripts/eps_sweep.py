"""Regularization sweep eps -> 0 on the stripe benchmark; prints excursions and successive distances.

    python3 scripts/eps_sweep.py [--eps 0.1 0.05 0.025]
"""
import argparse

from _common import shipped
from nschs.experiments import sweep_eps


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--eps", type=float, nargs="+", default=[0.1, 0.05, 0.025])
    args = ap.parse_args()
    print(sweep_eps(shipped("eps_sweep"), args.eps))


if __name__ == "__main__":
    main()
