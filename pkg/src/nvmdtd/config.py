"""Run configuration: one JSON document, strict keys, full defaulting.

Unknown keys are rejected with their JSON path so typos fail fast, and the
fully resolved document (defaults applied, CLI overrides folded in) is
echoed next to every command's outputs; rerunning from that echo alone
reproduces the run.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path

from .channel import ChannelParams, NoiseModel, QuantizerSpec
from .errors import ConfigError
from .nn.training import DESK_TRAIN_BLOCKS, MINIBATCH_BLOCKS, PAPER_TRAIN_BLOCKS, TrainConfig

_CHANNEL_DEFAULTS = {
    "mu0": 1.0,
    "mu1": 2.0,
    "ratio": 0.05,
    "mu_b": 0.0,
    "sigma_b_over_mu1": 0.0,
    "noise_model": "gaussian",
}

DEFAULT_CONFIG = {
    "seed": 12345,
    "threads": 1,
    "channel": dict(_CHANNEL_DEFAULTS),
    "gen": {"blocks": 100, "n": 71},
    "train": {
        "kind": "rnn",
        "epochs": 15,
        "minibatch_blocks": None,
        "learning_rate": 1e-3,
        "adam_beta1": 0.9,
        "adam_beta2": 0.999,
        "adam_epsilon": 1e-8,
        "train_blocks": None,
        "validation_blocks": 400,
        "n": 71,
        "hidden": 71,
    },
    "eval": {
        "blocks": None,
        "detectors": ["midpoint", "opt-no-offset", "opt-mean-offset", "opt-full"],
        "n": 71,
        "calib_blocks": 100,
        "quantizer": None,
        "weights": {"mlp": None, "rnn": None},
    },
    "dtd": {"blocks": 100, "n": 71, "genie": False, "weights": None},
    "sweep": {
        "ratios": [0.05, 0.08, 0.10, 0.12],
        "mu_b_values": [0.0],
        "sigma_b_over_mu1": 0.0,
        "noise_model": "gaussian",
        "detectors": ["midpoint", "opt-no-offset", "opt-mean-offset", "opt-full", "optimum-bound"],
        "blocks": None,
        "calib_blocks": 100,
        "n": 71,
        "quantizer": None,
        "weights": {"mlp": None, "rnn": None},
    },
    "session": {
        "segments": [{"start_block": 0, "channel": dict(_CHANNEL_DEFAULTS)}],
        "total_blocks": 2000,
        "trigger": {"kind": "periodic", "period": 500, "threshold": 2.0 / 71.0},
        "m_blocks": 100,
        "initial_threshold": None,
        "genie": False,
        "weights": None,
        "n": 71,
    },
}

# Desk-scale evaluation uses 1e5 blocks; full scale the published 1e6 N bits.
DESK_EVAL_BLOCKS = 100_000
PAPER_EVAL_BLOCKS = 1_000_000


def load_config(path) -> dict:
    """Read a JSON config; parse errors keep their line and column."""
    try:
        text = Path(path).read_text()
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}")
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return doc


def _merge(defaults, user, path: str):
    """Overlay user values on defaults, rejecting unknown keys."""
    if not isinstance(user, dict):
        raise ConfigError(f"{path or '<root>'}: expected an object, got {type(user).__name__}")
    out = copy.deepcopy(defaults)
    for key, value in user.items():
        here = f"{path}.{key}" if path else key
        if key not in defaults:
            raise ConfigError(f"unknown config key: {here}")
        base = defaults[key]
        if isinstance(base, dict) and not _is_open_dict(path, key):
            out[key] = _merge(base, value, here)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _is_open_dict(path: str, key: str) -> bool:
    """Sections whose values replace wholesale rather than merge per key."""
    return key in ("segments",)


def resolve_config(user: dict | None, seed: int | None = None, threads: int | None = None,
                   paper_scale: bool = False) -> dict:
    """Apply defaults, CLI overrides, and scale-dependent budgets."""
    cfg = _merge(DEFAULT_CONFIG, user or {}, "")
    if seed is not None:
        cfg["seed"] = seed
    if threads is not None:
        cfg["threads"] = threads
    cfg["paper_scale"] = bool(paper_scale)

    kind = cfg["train"]["kind"]
    if kind not in MINIBATCH_BLOCKS:
        raise ConfigError(f"train.kind must be one of {sorted(MINIBATCH_BLOCKS)}, got {kind!r}")
    budgets = PAPER_TRAIN_BLOCKS if paper_scale else DESK_TRAIN_BLOCKS
    if cfg["train"]["minibatch_blocks"] is None:
        cfg["train"]["minibatch_blocks"] = MINIBATCH_BLOCKS[kind]
    if cfg["train"]["train_blocks"] is None:
        cfg["train"]["train_blocks"] = budgets[kind]
    eval_blocks = PAPER_EVAL_BLOCKS if paper_scale else DESK_EVAL_BLOCKS
    if cfg["eval"]["blocks"] is None:
        cfg["eval"]["blocks"] = eval_blocks
    if cfg["sweep"]["blocks"] is None:
        cfg["sweep"]["blocks"] = eval_blocks

    # Segment channel sections also get defaults and strict keys.
    resolved_segments = []
    for i, seg in enumerate(cfg["session"]["segments"]):
        if not isinstance(seg, dict):
            raise ConfigError(f"session.segments[{i}]: expected an object")
        seg_merged = _merge(
            {"start_block": 0, "channel": dict(_CHANNEL_DEFAULTS)}, seg, f"session.segments[{i}]"
        )
        resolved_segments.append(seg_merged)
    cfg["session"]["segments"] = resolved_segments
    return cfg


def channel_params(section: dict) -> ChannelParams:
    """Build ChannelParams from a resolved channel section."""
    try:
        noise = NoiseModel(section["noise_model"])
    except ValueError:
        raise ConfigError(
            f"channel.noise_model must be one of "
            f"{[m.value for m in NoiseModel]}, got {section['noise_model']!r}"
        )
    return ChannelParams.from_ratio(
        ratio=section["ratio"],
        mu_b=section["mu_b"],
        sigma_b_over_mu1=section["sigma_b_over_mu1"],
        noise_model=noise,
        mu0=section["mu0"],
        mu1=section["mu1"],
    )


def quantizer_spec(section) -> QuantizerSpec | None:
    if section is None:
        return None
    merged = _merge({"bits": 3, "lo": 0.5, "hi": 2.5}, section, "quantizer")
    return QuantizerSpec(bits=merged["bits"], lo=merged["lo"], hi=merged["hi"])


def train_config(cfg: dict) -> TrainConfig:
    t = cfg["train"]
    return TrainConfig(
        epochs=t["epochs"],
        minibatch_blocks=t["minibatch_blocks"],
        train_blocks=t["train_blocks"],
        validation_blocks=t["validation_blocks"],
        seed=cfg["seed"],
        learning_rate=t["learning_rate"],
        adam_beta1=t["adam_beta1"],
        adam_beta2=t["adam_beta2"],
        adam_epsilon=t["adam_epsilon"],
    )


def echo_config(cfg: dict, out_dir, command: str) -> Path:
    """Write the fully resolved config next to the command outputs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc = {"command": command} | cfg
    path = out / "config-resolved.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n")
    return path
