#!/usr/bin/env python3
"""Locate the critical coefficient ratio of a sign-changing datum.

Sweeps the classifier over a theta grid, then bisection-refines the A/B
crossover.  For the two-lobe datum with interface a the crossover sits at
(1-a)^2/a^2, which the experiment recovers numerically.
"""

import argparse

import numpy as np

import plastiflow as pf
from plastiflow.asymptotics import sweep_theta


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--interface", type=float, default=1 / 3,
                    help="interface location a of the datum (0 < a < 1/2)")
    ap.add_argument("--nodes", type=int, default=128)
    ap.add_argument("--budget", type=float, default=2.5)
    ap.add_argument("--tol", type=float, default=0.05)
    args = ap.parse_args()

    a = args.interface
    theta_star = (1 - a) ** 2 / a ** 2
    prof = pf.separable_profile(theta_star)
    dom = pf.build_interval(1.0, 1.0 / args.nodes)
    u0 = prof.on_grid(dom)

    lo0, hi0 = max(1.2, 0.5 * theta_star), 2.0 * theta_star
    thetas = np.round(np.linspace(lo0, hi0, 9), 3)
    print(f"datum interface a={a:.4f}, expected crossover {theta_star:.4f}")
    print("theta  verdict  decision_time")
    for theta, verdict, t in sweep_theta(u0, 1.0, thetas, args.budget):
        stamp = f"{t:.3f}" if t is not None else "-"
        print(f"{theta:6.3f}  {verdict:10s} {stamp}")

    (lo, hi), trace = pf.bisect_theta_star(u0, 1.0, (lo0, hi0), args.tol, args.budget)
    print(f"\nbisection ({len(trace)} runs): [{lo:.4f}, {hi:.4f}]"
          f"  width {hi - lo:.4f}  contains {theta_star:.4f}: {lo <= theta_star <= hi}")


if __name__ == "__main__":
    main()
