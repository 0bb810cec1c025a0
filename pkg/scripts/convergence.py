"""Self-convergence study on the smooth benchmark, plus a diffusion-dominated variant.

    python3 scripts/convergence.py
"""
from _common import shipped
from nschs.experiments import converge


def main():
    cfg = shipped("converge")
    print("coupled flow:")
    print(converge(cfg))
    print("\ndiffusion dominated (u = 0, theta -> 0):")
    print(converge(cfg.with_changes(**{"params.theta": 1e-8, "stepper.ns_enabled": False})))


if __name__ == "__main__":
    main()
