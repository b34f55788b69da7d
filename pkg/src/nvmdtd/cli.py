"""Command-line surface: data generation, training, analytic queries, evaluation,
dynamic-threshold runs, sweeps, and recalibration sessions.

Exit codes: 0 success, 2 configuration or parameter problem, 3 numeric
failure (training divergence, root bracketing), 4 missing or unreadable
asset.  All file outputs land under ``--out``, together with an echo of
the fully resolved configuration.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import analytic, harness
from .channel import ChannelParams, NoiseModel, block_stream, derive_seed, sample_block, save_dataset
from .config import (
    channel_params,
    echo_config,
    load_config,
    quantizer_spec,
    resolve_config,
    train_config,
)
from .detectors import GenieDetector, NnDetector
from .errors import (
    ConfigError,
    DivergenceError,
    FormatError,
    MissingAssetError,
    NoRootError,
    NvmdtdError,
    ParameterError,
    UnsupportedModelError,
)
from .nn.weights_io import load_weights, save_weights

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_ASSET = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nvmdtd",
        description="Read-channel detection laboratory: simulate, train, calibrate, evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_text: str, out_required: bool = True):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--out", required=out_required, help="output directory")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--threads", type=int, help="worker threads for Monte-Carlo chunks")
        p.add_argument("--paper-scale", action="store_true",
                       help="use full published data budgets instead of desk scale")
        return p

    add("gen", "generate a dataset file from the configured channel")
    add("train", "train a detector network and write weights plus the validation curve")
    a = add("analytic", "print reference thresholds and their BERs", out_required=False)
    a.add_argument("--ratio", type=float, help="sigma0/mu0 variation level")
    a.add_argument("--mu-b", type=float, help="offset mean in kOhm")
    a.add_argument("--sigma-b-over-mu1", type=float, help="offset std relative to mu1")
    a.add_argument("--mu0", type=float)
    a.add_argument("--mu1", type=float)
    a.add_argument("--sigma0", type=float, help="override the ratio-derived sigma0")
    a.add_argument("--sigma1", type=float, help="override the ratio-derived sigma1")
    add("eval", "Monte-Carlo evaluate detectors at one operating point")
    d = add("dtd", "derive an adjusted threshold from detector outputs")
    d.add_argument("--weights", help="weight file for the labeling network")
    d.add_argument("--genie", action="store_true", help="use the true bits as labels")
    s = add("sweep", "run a detector-by-operating-point BER sweep")
    s.add_argument("--weights-mlp", help="weight file for the mlp rows")
    s.add_argument("--weights-rnn", help="weight file for the rnn rows")
    se = add("session", "simulate the threshold-with-recalibration deployment loop")
    se.add_argument("--weights", help="weight file for the recalibration network")
    se.add_argument("--genie", action="store_true", help="use the true bits as labels")
    return parser


def _resolved(args) -> dict:
    user = load_config(args.config) if args.config else {}
    return resolve_config(
        user, seed=args.seed, threads=args.threads, paper_scale=args.paper_scale
    )


def _load_asset(path_str: str | None):
    if path_str is None:
        return None
    path = Path(path_str)
    if not path.is_file():
        raise MissingAssetError(f"weight file not found: {path}")
    return load_weights(path)


def cmd_gen(args) -> int:
    cfg = _resolved(args)
    params = channel_params(cfg["channel"])
    n = cfg["gen"]["n"]
    blocks = [
        sample_block(params, n, block_stream(cfg["seed"], i))
        for i in range(cfg["gen"]["blocks"])
    ]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_dataset(out / "dataset.txt", blocks, params)
    echo_config(cfg, out, "gen")
    print(f"wrote {len(blocks)} blocks of {n} bits to {out / 'dataset.txt'}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _resolved(args)
    params = channel_params(cfg["channel"])
    kind = cfg["train"]["kind"]
    tc = train_config(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = harness.training_curve(
        kind, params, tc, csv_path=out / "curve.csv",
        n=cfg["train"]["n"], hidden=cfg["train"]["hidden"],
    )
    weight_path = out / f"weights-{kind}.nvmw"
    save_weights(result.model, weight_path, seed=cfg["seed"], n=cfg["train"]["n"])
    echo_config(cfg, out, "train")
    final = result.history[-1]
    print(f"trained {kind}: {tc.epochs} epochs, final validation BER {final.val_ber:.3e}")
    print(f"weights: {weight_path}")
    return EXIT_OK


def cmd_analytic(args) -> int:
    cfg = _resolved(args)
    ch = dict(cfg["channel"])
    for key in ("ratio", "mu_b", "sigma_b_over_mu1", "mu0", "mu1"):
        value = getattr(args, key)
        if value is not None:
            ch[key] = value
    cfg["channel"] = ch
    params = channel_params(ch)
    if args.sigma0 is not None or args.sigma1 is not None:
        params = ChannelParams(
            mu0=params.mu0,
            mu1=params.mu1,
            sigma0=args.sigma0 if args.sigma0 is not None else params.sigma0,
            sigma1=args.sigma1 if args.sigma1 is not None else params.sigma1,
            offset_mu_b=params.offset_mu_b,
            offset_sigma_b=params.offset_sigma_b,
        )
    no_offset = analytic.optimal_threshold_closed_form(params, b=0.0)
    mean_offset = analytic.optimal_threshold_closed_form(params, b=params.offset_mu_b)
    full = analytic.optimal_threshold_bisection(params)
    print(
        "channel: "
        + json.dumps({k: ch[k] for k in ("mu0", "mu1", "ratio", "mu_b", "sigma_b_over_mu1")})
    )
    print(f"{'detector':<16} {'method':<17} {'r_th (kOhm)':>12} {'ber':>13}")
    for name, res in (
        ("opt-no-offset", no_offset),
        ("opt-mean-offset", mean_offset),
        ("opt-full", full),
    ):
        ber_true = analytic.ber_variable_offset(res.r_th, params)
        print(f"{name:<16} {res.method.value:<17} {res.r_th:>12.6f} {ber_true:>13.6e}")
    if args.out:
        echo_config(cfg, Path(args.out), "analytic")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _resolved(args)
    ev = cfg["eval"]
    ch = cfg["channel"]
    spec = harness.SweepSpec(
        ratios=(ch["ratio"],),
        mu_b_values=(ch["mu_b"],),
        sigma_b_over_mu1=ch["sigma_b_over_mu1"],
        noise_model=NoiseModel(ch["noise_model"]),
        detectors=tuple(ev["detectors"]),
        blocks_per_point=ev["blocks"],
        seed=cfg["seed"],
        n=ev["n"],
        calib_blocks=ev["calib_blocks"],
        quantizer=quantizer_spec(ev["quantizer"]),
    )
    assets = {k: _load_asset(v) for k, v in ev["weights"].items() if v is not None}
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = harness.run_sweep(spec, assets=assets, csv_path=out / "eval.csv",
                             threads=cfg["threads"])
    echo_config(cfg, out, "eval")
    for row in rows:
        print(f"{row['detector']:<16} ber={row['ber']:.6e} ci={row['ci']:.2e}")
    return EXIT_OK


def cmd_dtd(args) -> int:
    cfg = _resolved(args)
    dt = dict(cfg["dtd"])
    if args.genie:
        dt["genie"] = True
    if args.weights:
        dt["weights"] = args.weights
    cfg["dtd"] = dt
    params = channel_params(cfg["channel"])
    if dt["genie"]:
        detector = GenieDetector()
    else:
        model = _load_asset(dt["weights"])
        if model is None:
            raise MissingAssetError("dtd needs --genie or a --weights file")
        detector = NnDetector(model)
    result = harness.dtd_calibrate(
        detector, params, dt["blocks"], derive_seed(cfg["seed"], 0), n=dt["n"]
    )
    doc = {
        "r_adj": result.r_adj,
        "objective": result.objective,
        "interval": list(result.interval),
    }
    if params.noise_model is NoiseModel.GAUSSIAN:
        doc["reference_optimum"] = analytic.optimal_threshold_bisection(params).r_th
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "dtd.json").write_text(json.dumps(doc, indent=2) + "\n")
    echo_config(cfg, out, "dtd")
    print(f"adjusted threshold {result.r_adj:.6f} kOhm "
          f"(objective {result.objective}, interval {result.interval})")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _resolved(args)
    sw = cfg["sweep"]
    weights = dict(sw["weights"])
    if args.weights_mlp:
        weights["mlp"] = args.weights_mlp
    if args.weights_rnn:
        weights["rnn"] = args.weights_rnn
    spec = harness.SweepSpec(
        ratios=tuple(sw["ratios"]),
        mu_b_values=tuple(sw["mu_b_values"]),
        sigma_b_over_mu1=sw["sigma_b_over_mu1"],
        noise_model=NoiseModel(sw["noise_model"]),
        detectors=tuple(sw["detectors"]),
        blocks_per_point=sw["blocks"],
        seed=cfg["seed"],
        n=sw["n"],
        calib_blocks=sw["calib_blocks"],
        quantizer=quantizer_spec(sw["quantizer"]),
    )
    assets = {k: _load_asset(v) for k, v in weights.items() if v is not None}
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = harness.run_sweep(spec, assets=assets, csv_path=out / "sweep.csv",
                             threads=cfg["threads"])
    echo_config(cfg, out, "sweep")
    print(f"wrote {len(rows)} rows to {out / 'sweep.csv'}")
    return EXIT_OK


def cmd_session(args) -> int:
    cfg = _resolved(args)
    se = dict(cfg["session"])
    if args.genie:
        se["genie"] = True
    if args.weights:
        se["weights"] = args.weights
    cfg["session"] = se
    segments = tuple(
        (seg["start_block"], channel_params(seg["channel"])) for seg in se["segments"]
    )
    trig = se["trigger"]
    policy = harness.TriggerPolicy(
        kind=trig["kind"], period=trig.get("period", 0), threshold=trig["threshold"]
    )
    schedule = harness.DriftSchedule(
        segments=segments, total_blocks=se["total_blocks"], trigger=policy
    )
    if se["genie"]:
        detector = GenieDetector()
    else:
        model = _load_asset(se["weights"])
        if model is None:
            raise MissingAssetError("session needs --genie or a --weights file")
        detector = NnDetector(model)
    log = harness.simulate_recalibration_session(
        schedule, detector, seed=derive_seed(cfg["seed"], 0), m_blocks=se["m_blocks"],
        initial_threshold=se["initial_threshold"], n=se["n"],
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "session.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["segment", "start_block", "bits_pre", "errors_pre", "ber_pre",
                         "bits_post", "errors_post", "ber_post", "triggers", "nn_blocks"])
        for seg in log.segments:
            writer.writerow([seg.index, seg.start_block, seg.bits_pre, seg.errors_pre,
                             seg.ber_pre, seg.bits_post, seg.errors_post, seg.ber_post,
                             seg.triggers, seg.nn_blocks])
    (out / "session.json").write_text(json.dumps({
        "final_threshold": log.final_threshold,
        "nn_blocks_total": log.nn_blocks_total,
        "triggers_total": log.triggers_total,
        "thresholds": log.thresholds,
    }, indent=2) + "\n")
    echo_config(cfg, out, "session")
    print(f"session done: {log.triggers_total} recalibrations, "
          f"{log.nn_blocks_total} network blocks, final threshold {log.final_threshold:.6f}")
    return EXIT_OK


_COMMANDS = {
    "gen": cmd_gen,
    "train": cmd_train,
    "analytic": cmd_analytic,
    "eval": cmd_eval,
    "dtd": cmd_dtd,
    "sweep": cmd_sweep,
    "session": cmd_session,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, ParameterError, UnsupportedModelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DivergenceError, NoRootError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (MissingAssetError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ASSET
    except NvmdtdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
