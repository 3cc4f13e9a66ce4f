"""Advice volume of LeCTR-VEG on Hallway as the per-advice cost grows."""

import os

from lectr import harness

from _common import base, parser, setup, show


def main():
    p = parser(__doc__)
    p.add_argument("--costs", default="0,0.25,0.5")
    args = p.parse_args()
    setup(args)
    grid = {"reward.cost": [float(c) for c in args.costs.split(",")]}
    report = harness.sweep(base("hallway"), grid, seeds=range(args.seeds),
                           out=os.path.join(args.out, "cost"), workers=args.workers)
    show(report)
    for label, runs in report.results.items():
        i = sum(sum(c[0] for c in r.advice_counts) for r in runs)
        j = sum(sum(c[1] for c in r.advice_counts) for r in runs)
        print(f"{label}: advice into agent i {i}, into agent j {j}")


if __name__ == "__main__":
    main()
