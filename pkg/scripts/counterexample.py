"""Task reward as the advising reward versus VEG on the repeated game.

Advice rewarded by the task reward helps the team while advice is flowing
but leaves poor advice-free policies, so the training return (with advice)
should exceed the advice-free value.
"""

import os

import numpy as np

from lectr import harness

from _common import base, parser, setup, show


def main():
    args = parser(__doc__).parse_args()
    setup(args)
    veg = base("repeated")
    task = veg.replace(**{"reward.kind": "TASK_REWARD"})
    report = harness.compare([veg, task], seeds=range(args.seeds),
                             out=os.path.join(args.out, "counterexample"), workers=args.workers)
    show(report)
    runs = report.results[task.label]
    print(f"task-reward training return {np.mean([r.train_return for r in runs]):.3f}, "
          f"advice-free value {np.mean([r.v_bar for r in runs]):.3f}")
    print(f"p(V) = {report.p(veg.label, task.label):.4g}")


if __name__ == "__main__":
    main()
