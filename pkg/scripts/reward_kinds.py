"""LeCTR on one domain under every advising reward."""

import os

from lectr import harness
from lectr.rewards import RewardKind

from _common import base, parser, setup, show


def main():
    p = parser(__doc__)
    p.add_argument("--domain", default="repeated")
    args = p.parse_args()
    setup(args)
    kinds = [k.value for k in RewardKind]
    report = harness.sweep(base(args.domain), {"reward.kind": kinds}, seeds=range(args.seeds),
                           out=os.path.join(args.out, "rewards", args.domain),
                           workers=args.workers)
    show(report)


if __name__ == "__main__":
    main()
