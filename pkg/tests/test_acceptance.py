"""Acceptance gate: one printed pass/fail line per criterion.

Run with `pytest tests/test_acceptance.py -v -s` to see the verdict lines
as they are produced (pytest hides captured stdout of passing tests
otherwise). Every check here is deterministic.
"""

import time
from fractions import Fraction

import numpy as np

from stsconv.budget import (
    BUILTIN_DATASETS,
    SchedulePlan,
    budget_multiplier,
    format_multiplier,
    from_scratch,
    images_per_epoch,
)
from stsconv.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from stsconv.convops import ConvSpec, conv2d, conv3d, conv_forward, naive_conv, same_padding
from stsconv.gradcheck import check_conv_gradients, check_sts_gradients
from stsconv.harness import (
    PipelineConfig,
    build_tiny_net,
    pipeline_pretrain_finetune,
    transfer_2d_weights,
)
from stsconv.inflate import InflationRates, inflate_2d_to_3d, zero_init_3d
from stsconv.network import Net, init_params
from stsconv.probe import probe_network
from stsconv.rf import (
    DilatedSplit,
    RFTerm,
    StackLayer,
    effective_extent,
    render_terms,
    rf_of_layer,
    rf_of_stack,
)
from stsconv.sts import STSConfig, sts_mac_count, sts_param_count
from tests.test_convops import random_instance


def verdict(ok: bool, label: str) -> None:
    print(f"{'PASS' if ok else 'FAIL'}: {label}")
    assert ok, label


def test_conv_oracle_equivalence():
    start = time.monotonic()
    worst = 0.0
    for ndim in (1, 2, 3):
        rng = np.random.default_rng(1000 + ndim)
        for _ in range(100):
            x, w, spec = random_instance(ndim, rng)
            diff = np.max(np.abs(conv_forward(x, w, spec) - naive_conv(x, w, spec)))
            worst = max(worst, float(diff))
    elapsed = time.monotonic() - start
    verdict(
        worst < 1e-12 and elapsed < 120,
        f"conv oracle equivalence: 100 instances per op, max diff {worst:.2e} "
        f"(< 1e-12), {elapsed:.1f}s (< 120s)",
    )


def test_gradient_checks():
    start = time.monotonic()
    worst = 0.0
    count = 0
    for ndim in (1, 2, 3):
        rng = np.random.default_rng(2000 + ndim)
        for _ in range(6):
            worst = max(worst, check_conv_gradients(ndim, rng, h=1e-5))
            count += 1
    rng = np.random.default_rng(2100)
    for _ in range(6):
        worst = max(worst, check_sts_gradients(rng, h=1e-5))
        count += 1
    elapsed = time.monotonic() - start
    verdict(
        worst < 1e-6 and count >= 20 and elapsed < 120,
        f"gradient checks: {count} instances, max rel err {worst:.2e} "
        f"(< 1e-6), {elapsed:.1f}s (< 120s)",
    )


def test_sts_parity():
    checked = 0
    ok = True
    for c in range(2, 17, 2):
        for kh in (1, 3, 5):
            for kw in (1, 3, 5):
                cfg = STSConfig(c_in=c, c_out=c, kernel=(3, kh, kw), static_ratio="1:1")
                base_params = c * c * 3 * kh * kw
                shape = (4, 8, 8)
                base_macs = int(np.prod(shape)) * base_params
                ok &= sts_param_count(cfg) == base_params
                ok &= sts_mac_count(cfg, shape) == base_macs
                checked += 1
    verdict(
        ok,
        f"parameter/compute parity at 1:1 split: {checked} (C, Kh, Kw) combinations, "
        "integer equality with the baseline 3xKhxKw kernel",
    )


def test_zero_init_equivalence():
    rng = np.random.default_rng(3000)
    ok = True
    for _ in range(50):
        c_in, c_out = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        kh, kw = int(rng.choice([1, 3, 5])), int(rng.choice([1, 3, 5]))
        w2d = rng.standard_normal((c_out, c_in, kh, kw))
        t_len = int(rng.integers(2, 6))
        x = rng.standard_normal((2, c_in, t_len, 8, 8))
        y3d = conv3d(
            x, zero_init_3d(w2d), ConvSpec(kernel=(3, kh, kw), padding=same_padding((3, kh, kw)))
        )
        spec2d = ConvSpec(kernel=(kh, kw), padding=same_padding((kh, kw)))
        for t in range(t_len):
            ok &= bool(np.array_equal(y3d[:, :, t], conv2d(x[:, :, t], w2d, spec2d)))
    verdict(ok, "zero-init equivalence: 50 random (video, 2D kernel) pairs, exact f64 equality")


def test_inflation_sum_rule():
    rng = np.random.default_rng(4000)
    frame = rng.standard_normal((1, 2, 10, 10))
    x = np.repeat(frame[:, :, None], 6, axis=2)
    w2d = rng.standard_normal((3, 2, 3, 3))
    y2d = conv2d(frame, w2d, ConvSpec(kernel=(3, 3), padding=1))
    spec3d = ConvSpec(kernel=(3, 3, 3), padding=1)
    # (1/9, 1/3, 1/9) normalized to sum 1 is (1/5, 3/5, 1/5)
    rate_sets = {
        "(1/3, 1/3, 1/3)": (1 / 3, 1 / 3, 1 / 3),
        "(1/9, 1/3, 1/9) normalized": (1 / 5, 3 / 5, 1 / 5),
        "(0, 1, 0)": (0.0, 1.0, 0.0),
    }
    ok = True
    for label, rates in rate_sets.items():
        w3d = inflate_2d_to_3d(w2d, InflationRates(rates))
        y3d = conv3d(x, w3d, spec3d)
        interior = y3d[:, :, 1:-1]
        if rates == (0.0, 1.0, 0.0):
            ok &= bool(np.array_equal(interior, np.broadcast_to(y2d[:, :, None], interior.shape)))
        else:
            # rates like 1/3 are not exactly representable; their sum differs
            # from 1 by one ulp, so agreement is at rounding level, not bitwise
            ok &= float(np.max(np.abs(interior - y2d[:, :, None]))) < 1e-12
    verdict(
        ok,
        "inflation sum rule: unit-sum rates reproduce the 2D response on "
        "temporally constant interiors for all three rate sets",
    )


def test_receptive_field_table():
    rows = {
        "3x3+5x5": render_terms(rf_of_layer(DilatedSplit(kernel=3, rate=2))),
        "3x3+7x7": render_terms(rf_of_layer(DilatedSplit(kernel=3, rate=3))),
        "1x9+3x3+9x1": render_terms(
            rf_of_layer(STSConfig(c_in=2, c_out=2, kernel=(3, 3, 3)))
        ),
    }
    ok = all(expected == got for expected, got in rows.items())

    # impulse-footprint cross-check on 10 random stacks
    from stsconv.convops import conv_backward

    rng = np.random.default_rng(5000)
    for _ in range(10):
        stack = [
            StackLayer(
                kernel=(int(rng.integers(1, 4)), int(rng.integers(1, 4))),
                stride=(int(rng.integers(1, 3)), int(rng.integers(1, 3))),
                dilation=(int(rng.integers(1, 3)), int(rng.integers(1, 3))),
            )
            for _ in range(int(rng.integers(1, 4)))
        ]
        rf = rf_of_stack(stack)
        extents, jump = [1, 1], [1, 1]
        for layer in stack:
            for ax in range(2):
                k_eff = effective_extent(layer.kernel[ax], layer.dilation[ax])
                extents[ax] += (k_eff - 1) * jump[ax]
                jump[ax] *= layer.stride[ax]
        x = rng.standard_normal((1, 1, extents[0] + 2, extents[1] + 2))
        acts, weights, specs = [x], [], []
        for layer in stack:
            spec = ConvSpec(kernel=layer.kernel, stride=layer.stride, dilation=layer.dilation)
            w = np.ones((1, 1) + layer.kernel)
            acts.append(conv_forward(acts[-1], w, spec))
            weights.append(w)
            specs.append(spec)
        g = np.zeros_like(acts[-1])
        g[0, 0, 0, 0] = 1.0
        for a, w, spec in zip(acts[-2::-1], weights[::-1], specs[::-1]):
            g, _ = conv_backward(a, w, spec, np.ascontiguousarray(g))
        nz = np.nonzero(g[0, 0])
        measured = RFTerm(int(nz[0].max() - nz[0].min() + 1), int(nz[1].max() - nz[1].min() + 1))
        ok &= measured == rf
    verdict(
        ok,
        'receptive-field table: rows "3x3+5x5", "3x3+7x7", "1x9+3x3+9x1" verbatim; '
        "symbolic stack RF matches the impulse footprint on 10 random stacks",
    )


def test_budget_golden_table():
    K400 = BUILTIN_DATASETS["k400"]
    ok = True
    ok &= format_multiplier(budget_multiplier(SchedulePlan(100, 50, 8), from_scratch(100, 8))) == "x1.16"
    ok &= format_multiplier(budget_multiplier(SchedulePlan(150, 50, 16), from_scratch(100, 16))) == "x1"
    ok &= format_multiplier(budget_multiplier(SchedulePlan(300, 50, 32), from_scratch(100, 32))) == "x1"
    ok &= images_per_epoch(K400, 32) == 7_680_000
    slowfast = budget_multiplier(SchedulePlan(300, 100, 16), from_scratch(256, 16))
    ok &= slowfast == Fraction(25, 32)
    ok &= format_multiplier(slowfast, decimals=1, rounding="nearest") == "x0.8"
    x3d = budget_multiplier(SchedulePlan(300, 100, 13), from_scratch(256, 13))
    ok &= format_multiplier(x3d) == "x0.87"
    verdict(
        ok,
        "budget golden table: x1.16 / x1 / x1 at 8/16/32 frames, 7.68M images per "
        "32-frame epoch, x0.8 and x0.87 long-schedule multipliers, exact rationals",
    )


def test_checkpoint_roundtrip(tmp_path):
    rng = np.random.default_rng(6000)
    ok = True
    for i in range(50):
        ckpt = Checkpoint()
        for j in range(int(rng.integers(1, 6))):
            shape = tuple(int(rng.integers(1, 5)) for _ in range(int(rng.integers(0, 5))))
            dtype = np.float32 if rng.integers(2) else np.float64
            ckpt[f"t{j}"] = rng.standard_normal(shape).astype(dtype)
        path = tmp_path / f"r{i}.stsc"
        save_checkpoint(ckpt, path)
        loaded = load_checkpoint(path)
        ok &= loaded == ckpt
        ok &= all(loaded[k].tobytes() == ckpt[k].tobytes() for k in ckpt.entries)
    verdict(ok, "checkpoint round trip: 50 random checkpoints bitwise identical after save/load")


def test_probe_structural_check():
    rng = np.random.default_rng(7000)
    spec2d = build_tiny_net("2d", num_classes=4, channels=8)
    params2d = init_params(spec2d, np.random.default_rng(1))
    ok = True
    for variant in ("3x1x1", "3x3x3", "sts-3x3x3"):
        spec3d = build_tiny_net(variant, num_classes=4, channels=8)
        params3d = transfer_2d_weights(
            spec3d, init_params(spec3d, np.random.default_rng(2)), params2d
        )
        pspec, pparams = probe_network(spec3d, params3d, t=1)
        x = rng.standard_normal((50, 1, 16, 16))
        ok &= bool(
            np.array_equal(Net(pspec, pparams).forward(x), Net(spec2d, params2d).forward(x))
        )
    verdict(
        ok,
        "probe structural check: t=1 probe of a zero-init network matches the 2D twin "
        "exactly on 50 random images (all three 3D variants)",
    )


def test_pipeline_demonstration():
    start = time.monotonic()
    passes = 0
    details = []
    for seed in (0, 1, 2):
        res = pipeline_pretrain_finetune(PipelineConfig(seed=seed))
        ft = res["finetune_epochs_to_threshold"]
        sc = res["scratch_epochs_to_threshold"]
        sc_eff = sc if sc is not None else res["scratch_budget_epochs"]
        seed_ok = ft is not None and ft <= 0.5 * sc_eff
        passes += seed_ok
        details.append(f"seed {seed}: fine-tune {ft} vs scratch {sc_eff} ({'ok' if seed_ok else 'miss'})")
    elapsed = time.monotonic() - start
    verdict(
        passes >= 2 and elapsed < 1800,
        "pipeline demonstration: pre-trained fine-tune reaches 90% joint accuracy in "
        f"<= 0.5x the budget-matched scratch epochs for {passes}/3 seeds "
        f"[{'; '.join(details)}], {elapsed:.0f}s (< 1800s)",
    )
