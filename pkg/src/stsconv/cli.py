"""Command-line entry point.

Subcommands: gradcheck, rf, budget, probe, convert, train, demo. Global
flags: --seed (default 0), --dtype {f32,f64}, --threads, --json. Exit
codes: 0 success, 1 validation/check failure, 2 usage error (argparse).
All randomness is seeded; output is deterministic for a fixed seed.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import budget as budget_mod
from . import harness, rf as rf_mod
from .backend import set_num_threads
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .convops import ConvSpec
from .gradcheck import run_gradcheck
from .inflate import InflationRates, inflate_2d_to_3d, init_sts_from_2d, zero_init_3d
from .network import NetworkSpec, init_params
from .probe import probe_network
from .sts import STSConfig, STSParams
from .tensors import ShapeError

GRADCHECK_TOL = 1e-6


def _emit(args, payload: dict, human: str) -> None:
    if args.json:
        print(json.dumps(payload))
    else:
        print(human)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_gradcheck(args) -> int:
    err = run_gradcheck(args.op, seed=args.seed, trials=args.trials, h=args.h)
    ok = err < GRADCHECK_TOL
    verdict = "<" if ok else ">="
    _emit(
        args,
        {"op": args.op, "max_rel_err": err, "tolerance": GRADCHECK_TOL, "pass": ok},
        f"max_rel_err {verdict} {GRADCHECK_TOL:g} ({err:.3e})",
    )
    return 0 if ok else 1


def _parse_rf_layer(text: str):
    kind, _, rest = text.partition(":")
    try:
        if kind == "conv":
            kh, kw = (int(v) for v in rest.split(","))
            return ConvSpec(kernel=(kh, kw))
        if kind == "dilated":
            k, rate = (int(v) for v in rest.split(","))
            return rf_mod.DilatedSplit(kernel=k, rate=rate)
        if kind == "sts":
            kt, kh, kw = (int(v) for v in rest.split(","))
            return STSConfig(c_in=2, c_out=2, kernel=(kt, kh, kw))
    except (ValueError, ShapeError) as exc:
        raise ValueError(f"invalid --layer {text!r}: {exc}") from exc
    raise ValueError(f"invalid --layer {text!r}: kind must be conv, dilated or sts")


def cmd_rf(args) -> int:
    if args.table:
        rows = rf_mod.comparison_table()
        _emit(
            args,
            {"rows": [{"label": lbl, "rf": text} for lbl, text in rows]},
            "\n".join(f"{lbl}: {text}" for lbl, text in rows),
        )
        return 0
    if not args.layer:
        print("rf: one of --layer or --table is required", file=sys.stderr)
        return 2
    text = rf_mod.render_terms(rf_mod.rf_of_layer(_parse_rf_layer(args.layer)))
    _emit(args, {"layer": args.layer, "rf": text}, text)
    return 0


def _load_dataset(args) -> budget_mod.DatasetSpec:
    if args.dataset == "custom":
        if not args.dataset_spec:
            raise ValueError("budget: --dataset custom requires --dataset-spec FILE")
        d = json.loads(Path(args.dataset_spec).read_text())
        return budget_mod.DatasetSpec(
            d["name"], d["instances"], d.get("frames_per_instance", 1)
        )
    return budget_mod.BUILTIN_DATASETS[args.dataset]


def cmd_budget(args) -> int:
    dataset = _load_dataset(args)
    if args.mode == "fixed":
        if args.baseline_epochs is None:
            print("budget: --mode fixed requires --baseline-epochs", file=sys.stderr)
            return 2
        plan = budget_mod.plan_fixed_budget(
            args.frames,
            args.baseline_epochs,
            finetune_epochs=args.finetune_epochs,
            finetune_dataset=dataset,
        )
        baseline = budget_mod.from_scratch(args.baseline_epochs, args.frames, dataset)
    else:
        plan = budget_mod.plan_sota(
            args.frames, finetune_epochs=args.finetune_epochs, finetune_dataset=dataset
        )
        baseline = budget_mod.from_scratch(
            args.baseline_epochs if args.baseline_epochs is not None else 256,
            args.frames,
            dataset,
        )
    mult = budget_mod.budget_multiplier(plan, baseline)
    text = budget_mod.format_multiplier(mult)
    _emit(
        args,
        {
            "pretrain_epochs": plan.pretrain_epochs,
            "finetune_epochs": plan.finetune_epochs,
            "frames": plan.frames,
            "total_images": budget_mod.total_budget(plan),
            "baseline_images": budget_mod.total_budget(baseline),
            "multiplier": [mult.numerator, mult.denominator],
            "multiplier_display": text,
        },
        text,
    )
    return 0


def _ckpt_params(ckpt: Checkpoint) -> dict[str, np.ndarray]:
    return dict(ckpt.entries)


def cmd_probe(args) -> int:
    spec = NetworkSpec.load(args.network)
    params = _ckpt_params(load_checkpoint(args.input))
    spec2d, params2d = probe_network(spec, params, args.t)
    save_checkpoint(Checkpoint(params2d), args.output)
    if args.network_out:
        spec2d.save(args.network_out)
    _emit(
        args,
        {"t": args.t, "output": args.output, "tensors": len(params2d)},
        f"wrote 2D probe at t={args.t} to {args.output} ({len(params2d)} tensors)",
    )
    return 0


def _parse_init_mode(mode: str):
    if mode.startswith("inflate:"):
        try:
            rates = tuple(Fraction(r) for r in mode.split(":", 1)[1].split(","))
            return "inflate", InflationRates(rates)
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"invalid inflation rates in {mode!r}: {exc}") from exc
    if mode in ("zero-init", "sts", "scratch", "sts-2d"):
        return mode, None
    raise ValueError(f"unknown init mode {mode!r}")


def cmd_convert(args) -> int:
    mode, rates = _parse_init_mode(args.mode)
    src = load_checkpoint(args.input)
    out = Checkpoint()
    converted = 0
    for name, arr in src.entries.items():
        if arr.ndim != 4:
            out[name] = arr
            continue
        converted += 1
        if mode == "zero-init":
            out[name] = zero_init_3d(arr)
        elif mode == "inflate":
            out[name] = inflate_2d_to_3d(arr, rates)
        elif mode in ("sts", "sts-2d"):
            cfg = STSConfig(
                c_in=arr.shape[1], c_out=arr.shape[0], kernel=(3,) + arr.shape[2:]
            )
            p = init_sts_from_2d(arr, cfg)
            for pname, parr in zip(STSParams.names(), p.arrays()):
                out[f"{name}.{pname}"] = parr
        else:
            raise ValueError(f"convert does not support mode {mode!r}")
    save_checkpoint(out, args.output)
    _emit(
        args,
        {"mode": args.mode, "converted": converted, "output": args.output},
        f"converted {converted} conv tensors -> {args.output}",
    )
    return 0


def cmd_train(args) -> int:
    dtype = np.float32 if args.dtype == "f32" else np.float64
    data = harness.gen_moving_shapes(
        args.seed, args.clips, args.t_frames, 16, 16,
        args.num_shapes, args.num_motions, noise=args.noise,
    )
    labels = {
        "shape": data.shape_labels,
        "motion": data.motion_labels,
        "joint": data.joint_labels,
    }[args.task]
    num_classes = int(labels.max()) + 1
    spec = harness.build_tiny_net(args.variant, num_classes, channels=args.channels)
    params = init_params(spec, np.random.default_rng(args.seed), dtype)

    mode, rates = _parse_init_mode(args.init)
    if mode != "scratch":
        if not args.load:
            print("train: non-scratch --init requires --load CHECKPOINT", file=sys.stderr)
            return 2
        params2d = _ckpt_params(load_checkpoint(args.load))
        params2d = {k: v.astype(dtype) for k, v in params2d.items()}
        params = harness.transfer_2d_weights(spec, params, params2d, rates=rates)
    elif args.load:
        loaded = _ckpt_params(load_checkpoint(args.load))
        params.update({k: v.astype(dtype) for k, v in loaded.items()})

    tr, va = harness.split(data, val_fraction=0.25, seed=args.seed)
    x = data.clips.astype(dtype)
    if args.variant == "2d":
        x = x[:, :, :1]
    cfg = harness.TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.lr,
        seed=args.seed,
        lr_schedule=args.lr_schedule,
    )
    result = harness.train(
        spec, params, x[tr], labels[tr], x[va], labels[va], cfg,
        log=lambda rec: print(json.dumps(rec)),
    )
    if args.save:
        save_checkpoint(Checkpoint(result["params"]), args.save)
    return 0


def cmd_demo(args) -> int:
    cfg = harness.PipelineConfig(seed=args.seed, dtype=args.dtype)
    log = (lambda rec: print(json.dumps(rec))) if args.verbose else None
    res = harness.pipeline_pretrain_finetune(cfg, log=log)
    summary = {
        k: res[k]
        for k in (
            "seed",
            "variant",
            "threshold",
            "pretrain_val_accuracy",
            "finetune_epochs_to_threshold",
            "scratch_epochs_to_threshold",
            "scratch_budget_epochs",
            "finetune_val_accuracy",
            "scratch_val_accuracy",
        )
    }
    _emit(
        args,
        summary,
        "\n".join(f"{k}: {v}" for k, v in summary.items()),
    )
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stsconv", description="Spatiotemporal-convolution laboratory."
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--dtype", choices=("f32", "f64"), default="f64")
    common.add_argument("--threads", type=int, default=None)
    common.add_argument("--json", action="store_true")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gradcheck", parents=[common], help="finite-difference gradient check")
    p.add_argument("--op", choices=("conv1d", "conv2d", "conv3d", "sts"), required=True)
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--h", type=float, default=1e-5)
    p.set_defaults(fn=cmd_gradcheck)

    p = sub.add_parser("rf", parents=[common], help="receptive-field accounting")
    p.add_argument("--layer", help="conv:KH,KW | dilated:K,RATE | sts:KT,KH,KW")
    p.add_argument("--table", action="store_true", help="print the comparison table")
    p.set_defaults(fn=cmd_rf)

    p = sub.add_parser("budget", parents=[common], help="training-budget planning")
    p.add_argument("--dataset", choices=("imagenet", "k400", "ssv2", "custom"), default="k400")
    p.add_argument("--dataset-spec", help="JSON file for --dataset custom")
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--mode", choices=("fixed", "sota"), required=True)
    p.add_argument("--baseline-epochs", type=int)
    p.add_argument("--finetune-epochs", type=int, default=50)
    p.set_defaults(fn=cmd_budget)

    p = sub.add_parser("probe", parents=[common], help="temporal-slice 2D probe")
    p.add_argument("--network", required=True, help="network spec JSON")
    p.add_argument("--input", required=True, help="3D checkpoint")
    p.add_argument("--t", type=int, choices=(0, 1, 2), required=True)
    p.add_argument("--output", required=True, help="2D checkpoint to write")
    p.add_argument("--network-out", help="optional 2D network spec JSON to write")
    p.set_defaults(fn=cmd_probe)

    p = sub.add_parser("convert", parents=[common], help="2D->3D checkpoint conversion")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--mode", required=True, help="zero-init | inflate:r0,r1,r2 | sts")
    p.set_defaults(fn=cmd_convert)

    p = sub.add_parser("train", parents=[common], help="train a tiny network")
    p.add_argument("--variant", choices=harness.VARIANTS, default="sts-3x3x3")
    p.add_argument("--task", choices=("shape", "motion", "joint"), default="joint")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--init", default="scratch",
                   help="scratch | zero-init | inflate:r0,r1,r2 | sts-2d")
    p.add_argument("--load", help="checkpoint to load")
    p.add_argument("--save", help="checkpoint to write after training")
    p.add_argument("--clips", type=int, default=160)
    p.add_argument("--t-frames", type=int, default=4)
    p.add_argument("--num-shapes", type=int, default=4)
    p.add_argument("--num-motions", type=int, default=4)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--channels", type=int, default=8)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--lr-schedule", choices=("constant", "cosine-warmup"), default="constant")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("demo", parents=[common], help="full pre-train/fine-tune pipeline demo")
    p.add_argument("--verbose", action="store_true", help="stream per-epoch metrics")
    p.set_defaults(fn=cmd_demo)

    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        set_num_threads(args.threads)
    try:
        return args.fn(args)
    except (ShapeError, ValueError, OSError, KeyError) as exc:
        print(f"stsconv: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
