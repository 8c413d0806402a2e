#!/usr/bin/env python3
"""Run one benchmark example end to end and print the error table.

Desk scale (the default) trims epochs and restarts so any example finishes
in minutes on a laptop; --paper-scale runs the full budgets instead.
"""

import argparse
import sys
import time
from dataclasses import replace

from gsn import bench

DESK = {
    # epochs, restarts, and for the high-dimensional targets smaller
    # training sets and dictionaries
    "ex1": dict(epochs=2000, n_restarts=3),
    "ex2": dict(epochs=2000, n_restarts=3),
    "ex3": dict(epochs=2000, n_restarts=3),
    "ex4": dict(epochs=1000, n_restarts=3),
    "ex5": dict(epochs=1000, n_restarts=3, n_train=2000, n_val=200, dict_size=10_000),
    "ex6": dict(epochs=1000, n_restarts=3, n_train=2000, n_val=500,
                n_test=4000, dict_size=10_000),
}


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("example", choices=bench.EXAMPLE_IDS)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--paper-scale", action="store_true",
                        help="full epochs/restarts instead of desk scale")
    parser.add_argument("--out", default=None, help="also write run artifacts here")
    args = parser.parse_args()

    cfg = bench.default_config(args.example, seed=args.seed)
    if not args.paper_scale:
        desk = dict(DESK[args.example])
        epochs = desk.pop("epochs")
        cfg = replace(cfg,
                      gsn_train=replace(cfg.gsn_train, epochs=epochs),
                      random_train=replace(cfg.random_train, epochs=epochs),
                      **desk)

    t0 = time.perf_counter()
    if args.example == "ex6":
        report = bench.node_sweep(cfg, bench.EX6_SWEEP_DEFAULT)
        print(f"{'N':>6} {'gsn-init':>12} {'gsn-trained':>12} {'random':>12}")
        for p in report.points:
            if p.available:
                print(f"{p.n_nodes:6d} {p.gsn_init.rel_l2:12.4e} "
                      f"{p.gsn_trained.rel_l2:12.4e} {p.random_trained.rel_l2:12.4e}")
        if args.out:
            print("wrote", bench.write_sweep_artifacts(report, args.out))
    else:
        report = bench.run_experiment(cfg)
        g, r = report.gsn, report.random
        print(f"dictionary: {g.dictionary_size_before} -> {g.dictionary_size_after} atoms")
        print(f"selected nodes: {g.selected_nodes} ({g.path.termination})")
        print(f"{'gsn-init':>14} rel_l2 = {g.init_errors.rel_l2:.4e}")
        print(f"{'gsn-trained':>14} rel_l2 = {g.trained_errors.rel_l2:.4e}")
        print(f"{'random-trained':>14} rel_l2 = {r.best_errors.rel_l2:.4e}")
        if args.out:
            print("wrote", bench.write_run_artifacts(report, args.out))
    print(f"elapsed: {time.perf_counter() - t0:.1f}s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
