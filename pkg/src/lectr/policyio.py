"""Policy files: an ``.npz`` container with a versioned JSON header.

The header records the container version, the environment signature, and
per-entry metadata (learner type tag, hyperparameters, shapes).  Arrays are
stored under ``<entry>/<name>`` keys.  Optimizer state and replay contents
are not persisted.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .advising import AdvisingPolicySet
from .qlearn import TabularQ, TileCodedQ

FORMAT = "lectr-policy"
VERSION = 1


class PolicyFormatError(ValueError):
    pass


def save_policies(path, learners, policy_set: AdvisingPolicySet | None = None,
                  env=None, extra: dict | None = None) -> None:
    header = {"format": FORMAT, "version": VERSION,
              "env": env.signature() if env is not None else None,
              "entries": {}, "extra": extra or {}}
    arrays = {}
    for k, learner in enumerate(learners):
        name = f"learner_{k}"
        header["entries"][name] = learner.meta()
        for key, arr in learner.arrays().items():
            arrays[f"{name}/{key}"] = arr
    if policy_set is not None:
        ps = policy_set
        header["entries"]["advising"] = {
            "kind": "advising", "obs_dims": list(ps.obs_dims), "n_actions": list(ps.n_actions),
            "actor_sizes": [list(a.sizes) for a in ps.actors],
            "critic_sizes": list(ps.critic.sizes), "gamma": ps.gamma, "polyak": ps.polyak,
            "temperature": ps.temperature, "batch_size": ps.batch_size, "lr": ps.lr,
            "entropy": ps.entropy,
        }
        nets = {f"actor_{k}": a for k, a in enumerate(ps.actors)}
        nets.update(critic=ps.critic, critic_target=ps.critic_target)
        for net_name, net in nets.items():
            for i, p in enumerate(net.params):
                arrays[f"advising/{net_name}/{i}"] = p
    arrays["__header__"] = np.array(json.dumps(header, sort_keys=True))
    tmp = f"{path}.tmp.npz"
    with open(tmp, "wb") as fh:
        np.savez(fh, **arrays)
    os.replace(tmp, path)


def read_header(path) -> tuple[dict, dict]:
    if not os.path.exists(path):
        raise FileNotFoundError(f"policy file not found: {path}")
    try:
        with np.load(path, allow_pickle=False) as data:
            arrays = {k: data[k] for k in data.files}
    except (OSError, ValueError) as exc:
        raise PolicyFormatError(f"{path} is not a policy file: {exc}") from None
    if "__header__" not in arrays:
        raise PolicyFormatError(f"{path} has no policy header")
    header = json.loads(str(arrays.pop("__header__")))
    if header.get("format") != FORMAT:
        raise PolicyFormatError(f"{path}: unknown container format {header.get('format')!r}")
    if header.get("version") != VERSION:
        raise PolicyFormatError(
            f"{path}: policy file version {header.get('version')} != supported {VERSION}")
    return header, arrays


def _check_env(header, env, path) -> None:
    saved = header.get("env")
    if env is None or saved is None:
        return
    now = env.signature()
    for key in ("n_obs", "n_actions"):
        if saved.get(key) != now.get(key):
            raise PolicyFormatError(
                f"{path}: saved {key}={saved.get(key)} does not match environment {now.get(key)}")


def load_learners(path, env=None):
    """Rebuild the task learners; tile-coded learners need ``env`` for the
    observation-to-coordinate map."""
    header, arrays = read_header(path)
    _check_env(header, env, path)
    out = []
    for k in range(2):
        meta = header["entries"].get(f"learner_{k}")
        if meta is None:
            raise PolicyFormatError(f"{path}: missing learner_{k}")
        weights = arrays[f"learner_{k}/weights"]
        common = dict(gamma=meta["gamma"], epsilon=meta["epsilon"], tie_break=meta["tie_break"])
        if meta["kind"] == "tabular":
            learner = TabularQ(meta["n_obs"], meta["n_actions"], meta["alpha"], **common)
        elif meta["kind"] == "tilecoded":
            if env is None:
                raise PolicyFormatError("tile-coded policies need an environment to load into")
            if list(env.obs_dims) != meta["dims"]:
                raise PolicyFormatError(
                    f"{path}: tile coding dims {meta['dims']} != environment {list(env.obs_dims)}")
            learner = TileCodedQ(env.obs_dims, env.obs_coords, meta["n_actions"],
                                 meta["n_tilings"], meta["tile_width"], meta["alpha"], **common)
        else:
            raise PolicyFormatError(f"{path}: unknown learner kind {meta['kind']!r}")
        if learner.weights.shape != weights.shape:
            raise PolicyFormatError(
                f"{path}: weight shape {weights.shape} != expected {learner.weights.shape}")
        learner.weights = weights.astype(float).copy()
        out.append(learner)
    return out


def load_policy_set(path) -> AdvisingPolicySet | None:
    header, arrays = read_header(path)
    meta = header["entries"].get("advising")
    if meta is None:
        return None
    hidden = meta["critic_sizes"][1:-1]
    ps = AdvisingPolicySet(meta["obs_dims"], meta["n_actions"], rng=np.random.default_rng(0),
                           hidden=hidden[0] if hidden else 32, n_hidden=len(hidden),
                           lr=meta["lr"], gamma=meta["gamma"], polyak=meta["polyak"],
                           temperature=meta["temperature"], batch_size=meta["batch_size"],
                           entropy=meta["entropy"])
    nets = {f"actor_{k}": a for k, a in enumerate(ps.actors)}
    nets.update(critic=ps.critic, critic_target=ps.critic_target)
    for net_name, net in nets.items():
        for i, p in enumerate(net.params):
            saved = arrays[f"advising/{net_name}/{i}"]
            if saved.shape != p.shape:
                raise PolicyFormatError(f"{path}: {net_name} parameter {i} has shape {saved.shape}")
            p[...] = saved
    return ps


def describe(path) -> dict:
    """Header plus array shapes, for ``export``."""
    header, arrays = read_header(path)
    header["arrays"] = {k: list(v.shape) for k, v in sorted(arrays.items())}
    return header
