"""Teach fresh learners in a flipped Hallway or Room from policies trained on
the original layout."""

import os

from lectr import harness

from _common import base, parser, setup, show


def main():
    p = parser(__doc__)
    p.add_argument("--domain", default="hallway")
    p.add_argument("--axis", default="horizontal")
    p.add_argument("--source-seed", type=int, default=0)
    args = p.parse_args()
    setup(args)
    cfg = base(args.domain)
    out = os.path.join(args.out, "transfer", args.domain)
    # expert no-teaching policies on the source task serve as knowledge
    _, source = harness.pretrain_experts(cfg, out)
    configs = [cfg, cfg.replace(**{"run.algorithm": "none"})]
    report = harness.compare(configs, seeds=range(args.seeds), out=out, workers=args.workers,
                             source=source, flip_axis=args.axis)
    show(report)


if __name__ == "__main__":
    main()
