"""Shared argument handling for the experiment scripts."""

import argparse
import logging

from lectr.config import ExperimentConfig


def parser(description: str, seeds: int = 10) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--seeds", type=int, default=seeds)
    p.add_argument("--out", default="results")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def setup(args) -> None:
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(message)s")


def base(domain: str, **overrides) -> ExperimentConfig:
    return ExperimentConfig().replace(**{"env.domain": domain, **overrides})


def show(report) -> None:
    for label, s in report.summary.items():
        star = "*" if label in report.winners.get("v_bar", []) else " "
        print(f"{star} {label:<40} V {s.v_bar_mean:.3f} +/- {s.v_bar_std:.3f}  "
              f"nAUC {s.norm_auc_mean:.3f} +/- {s.norm_auc_std:.3f}  "
              f"advice/ep {s.advice_per_episode_mean:.2f}")
