"""Run every shipped benchmark and print one summary line each.

    python3 scripts/run_benchmarks.py [--out DIR] [--only NAME ...]
"""
import argparse
import os
import time

import numpy as np

from _common import shipped
from nschs.diagnostics import adsorption_statistic
from nschs.runner import run_simulation

BENCHMARKS = ["spinodal", "spinodal_still", "flow_smooth", "adsorption", "singular", "perturb"]


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default="out")
    ap.add_argument("--only", nargs="+", choices=BENCHMARKS)
    args = ap.parse_args()
    for name in args.only or BENCHMARKS:
        cfg = shipped(name)
        t0 = time.perf_counter()
        res = run_simulation(cfg, os.path.join(args.out, name))
        secs = time.perf_counter() - t0
        tr = res.trace
        e = tr.column("E_total")
        print(
            f"{name:15s} exit {res.exit_code}  steps {res.steps:5d}  {secs:6.1f} s  "
            f"E {e[0]:.6g} -> {e[-1]:.6g}  monotone {bool(np.all(np.diff(e) <= 1e-10 * np.abs(e[1:])))}  "
            f"mass drift {abs(tr[-1].mass_phi - tr[0].mass_phi):.1e}/{abs(tr[-1].mass_rho - tr[0].mass_rho):.1e}  "
            f"eta {tr.column('eta').min():.4f}  adsorption {adsorption_statistic(res.state):+.3f}"
        )
        if not res.ok:
            print(f"{'':15s} {res.message}")


if __name__ == "__main__":
    main()
