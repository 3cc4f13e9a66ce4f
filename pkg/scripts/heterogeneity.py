"""Action rotation of the second agent in Room: LeCTR versus importance-based
experts, whose advice indices turn into the wrong moves."""

import os

from lectr import harness

from _common import base, parser, setup, show


def main():
    p = parser(__doc__)
    p.add_argument("--rotations", default="0,90,180")
    args = p.parse_args()
    setup(args)
    for deg in (int(d) for d in args.rotations.split(",")):
        cfg = base("room", **{"env.rotation": deg})
        configs = [cfg] + [cfg.replace(**{"run.algorithm": a})
                           for a in ("none", "importance_advising", "correct_important")]
        report = harness.compare(configs, seeds=range(args.seeds),
                                 out=os.path.join(args.out, "heterogeneity", f"rot{deg}"),
                                 workers=args.workers)
        print(f"\nrotation {deg}")
        show(report)


if __name__ == "__main__":
    main()
