"""LeCTR-VEG against no teaching and the heuristic baselines, per domain."""

import os

from lectr import harness

from _common import base, parser, setup, show

HEURISTICS = ["ask_important", "ask_uncertain", "early_advising", "importance_advising",
              "early_correcting", "correct_important", "adhoc_visit", "adhoc_td"]


def main():
    p = parser(__doc__)
    p.add_argument("--domains", default="repeated,hallway,room")
    p.add_argument("--heuristics", default=",".join(HEURISTICS))
    args = p.parse_args()
    setup(args)
    for domain in args.domains.split(","):
        cfg = base(domain)
        configs = [cfg, cfg.replace(**{"run.algorithm": "none"})]
        configs += [cfg.replace(**{"run.algorithm": h}) for h in args.heuristics.split(",") if h]
        out = os.path.join(args.out, "table", domain)
        report = harness.compare(configs, seeds=range(args.seeds), out=out, workers=args.workers)
        print(f"\n{domain}")
        show(report)


if __name__ == "__main__":
    main()
