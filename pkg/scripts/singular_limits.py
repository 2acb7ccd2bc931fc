#!/usr/bin/env python3
"""Gap tables for the degenerate-coefficient limits.

As the slow coefficient vanishes the evolution snaps to the heat flow
started from the obstacle projection of the datum; as the fast coefficient
blows up it approaches the clamped-diffusion layer flow, whose long-time
state is the projection itself.
"""

import argparse

import plastiflow as pf
from plastiflow.evolve import (
    limit_large_b_plus,
    limit_layer_projection,
    limit_small_b_minus,
)


def show(report):
    print(f"\n[{report.mode}] target: {report.target_label}")
    header = "param".ljust(10) + "".join(f"t={t:<10g}" for t in report.times)
    print(header)
    for i, p in enumerate(report.parameter_values):
        row = f"{p:<10g}" + "".join(f"{g:<12.5f}" for g in report.gaps[i])
        print(row)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--nodes", type=int, default=100)
    args = ap.parse_args()

    dom = pf.build_interval(1.0, 1.0 / args.nodes)
    u0 = pf.separable_profile(4.0).on_grid(dom)

    show(limit_small_b_minus(u0, b_plus=1.0,
                             b_minus_list=[0.1, 0.03, 0.01], times=[0.1, 0.2]))
    show(limit_large_b_plus(u0, b_minus=1.0,
                            b_plus_list=[4.0, 12.0, 36.0], times=[0.02, 0.05]))
    rep = limit_layer_projection(u0)
    print(f"\n[layer] long-time gap to obstacle projection: {rep.gaps[0, 0]:.2e}"
          f" (stopped at t={rep.notes['t_stop']:.2f})")


if __name__ == "__main__":
    main()
