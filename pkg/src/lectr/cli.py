"""Command-line entry point.

Every config key is a flag of the form ``--section.key VALUE``; a config file
given with ``--config`` is applied first.  Exit codes: 0 success, 1 config
error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys

from . import harness
from .config import SECTIONS, ConfigError, ExperimentConfig, from_dict, load
from .rewards import RewardKind

log = logging.getLogger("lectr")


class _ArgumentError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _ArgumentError(message)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI config file")
    p.add_argument("--seed", type=int, help="first seed (run.seed)")
    p.add_argument("--seeds", type=int, help="number of seeds (run.seeds)")
    p.add_argument("--out", help="output directory (run.out)")
    p.add_argument("--workers", type=int, help="parallel worker processes (run.workers)")
    for section, cls in SECTIONS.items():
        g = p.add_argument_group(f"[{section}]")
        for f in dataclasses.fields(cls):
            g.add_argument(f"--{section}.{f.name}", dest=f"cfg__{section}__{f.name}",
                           metavar="V", default=None)


def _config(args) -> ExperimentConfig:
    base = load(args.config).to_dict() if args.config else ExperimentConfig().to_dict()
    for key, value in vars(args).items():
        if key.startswith("cfg__") and value is not None:
            _, section, name = key.split("__")
            base[section][name] = value
    for flag, name in (("seed", "seed"), ("seeds", "seeds"), ("out", "out"),
                       ("workers", "workers")):
        if getattr(args, flag, None) is not None:
            base["run"][name] = getattr(args, flag)
    return from_dict(base)


def _print_report(report: harness.ComparisonReport) -> None:
    for label, s in report.summary.items():
        flag = "*" if label in report.winners.get("v_bar", []) else " "
        print(f"{flag} {label:<32} V {s.v_bar_mean:.3f} +/- {s.v_bar_std:.3f}   "
              f"AUC {s.auc_mean:.1f} +/- {s.auc_std:.1f}   nAUC {s.norm_auc_mean:.3f}   "
              f"advice/ep {s.advice_per_episode_mean:.2f}   failed {s.failures}")
    for pair, p in report.p_values["v_bar"].items():
        print(f"  p(V) {pair}: {p:.4g}")


def cmd_train(args) -> int:
    cfg = _config(args)
    for seed in cfg.seed_list:
        r = harness.train(cfg, seed, cfg.run.out)
        print(f"{cfg.label} seed {seed}: V {r.v_bar:.4f} AUC {r.auc:.2f} "
              f"nAUC {r.norm_auc:.4f} -> {r.policy_path}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    for path in args.policies:
        print(f"{path}: {harness.evaluate(path, cfg, args.rollouts):.6f}")
    return 0


def _algorithm_configs(cfg: ExperimentConfig, algorithms: list[str]):
    out = []
    for name in algorithms:
        name = name.strip().lower()
        if name.startswith("lectr"):
            kind = name.partition("-")[2] or cfg.reward.kind
            out.append(cfg.replace(**{"run.algorithm": "lectr", "reward.kind": kind.upper(),
                                      "run.label": None}))
        else:
            out.append(cfg.replace(**{"run.algorithm": name, "run.label": None}))
    return out


def cmd_compare(args) -> int:
    cfg = _config(args)
    configs = _algorithm_configs(cfg, args.algorithms.split(","))
    report = harness.compare(configs, out=cfg.run.out)
    _print_report(report)
    return 0


def cmd_transfer(args) -> int:
    cfg = _config(args)
    if args.algorithms:
        configs = _algorithm_configs(cfg, args.algorithms.split(","))
        report = harness.compare(configs, out=cfg.run.out, source=args.source,
                                 flip_axis=args.axis)
        _print_report(report)
        return 0
    for seed in cfg.seed_list:
        r = harness.transfer(cfg, args.source, args.axis, seed, cfg.run.out)
        print(f"{cfg.label} seed {seed}: V {r.v_bar:.4f} nAUC {r.norm_auc:.4f}")
    return 0


def _grid_values(text: str):
    out = []
    for v in text.split(","):
        v = v.strip()
        try:
            out.append(json.loads(v))
        except json.JSONDecodeError:
            out.append(v)
    return out


def cmd_sweep(args) -> int:
    cfg = _config(args)
    grid = {}
    for item in args.grid:
        key, _, values = item.partition("=")
        if not values:
            raise ConfigError(f"grid entries look like section.key=v1,v2 (got {item!r})")
        grid[key] = _grid_values(values)
    if args.reward_kinds:
        grid["reward.kind"] = [k.upper() for k in args.reward_kinds.split(",")]
        for k in grid["reward.kind"]:
            RewardKind(k)
    report = harness.sweep(cfg, grid, out=cfg.run.out)
    _print_report(report)
    return 0


def cmd_export(args) -> int:
    text = harness.export(args.path, args.dest)
    if args.dest is None:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lectr", description="Learning-to-teach experiments.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="train one algorithm for each seed")
    _add_config_flags(t)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="greedy advice-free return of saved policies")
    e.add_argument("policies", nargs="+")
    e.add_argument("--rollouts", type=int, default=None)
    _add_config_flags(e)
    e.set_defaults(func=cmd_evaluate)

    c = sub.add_parser("compare", help="run algorithms over seeds and test differences")
    c.add_argument("--algorithms", required=True,
                   help="comma list, e.g. lectr-veg,none,importance_advising")
    _add_config_flags(c)
    c.set_defaults(func=cmd_compare)

    tr = sub.add_parser("transfer", help="teach fresh learners in a flipped task")
    tr.add_argument("--source", required=True, help="policy file trained on the source task")
    tr.add_argument("--axis", default="horizontal", choices=["none", "horizontal", "vertical"])
    tr.add_argument("--algorithms", default=None, help="compare several algorithms instead")
    _add_config_flags(tr)
    tr.set_defaults(func=cmd_transfer)

    s = sub.add_parser("sweep", help="compare a grid of config overrides")
    s.add_argument("--grid", action="append", default=[],
                   help="section.key=v1,v2 (repeatable)")
    s.add_argument("--reward-kinds", default=None, help="shorthand for reward.kind=...")
    _add_config_flags(s)
    s.set_defaults(func=cmd_sweep)

    x = sub.add_parser("export", help="dump a policy file as JSON or merge result curves")
    x.add_argument("path")
    x.add_argument("--dest", default=None)
    x.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _ArgumentError as exc:
        print(f"lectr: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        if isinstance(exc, ConfigError) or _is_config_value_error(exc):
            print(f"lectr: config error: {exc}", file=sys.stderr)
            return 1
        print(f"lectr: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"lectr: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def _is_config_value_error(exc: ValueError) -> bool:
    # enum lookups on bad reward/heuristic names surface as plain ValueError
    return "is not a valid" in str(exc)


if __name__ == "__main__":
    sys.exit(main())
