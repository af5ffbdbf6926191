"""Fair-budget accounting: total training images seen across both phases.

The fairness currency is epochs x input frames x dataset instances.
Image pre-training counts one image per instance per epoch; video
fine-tuning counts T frames per clip per epoch. Multipliers are kept as
exact rationals and only rounded for display.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction


@dataclass(frozen=True)
class DatasetSpec:
    name: str
    instances: int
    frames_per_instance: int = 1  # metadata only; budgets use epochs x T x instances

    def __post_init__(self):
        if self.instances < 1 or self.frames_per_instance < 1:
            raise ValueError("dataset counts must be positive")

    @property
    def is_image(self) -> bool:
        return self.frames_per_instance == 1


IMAGENET = DatasetSpec("imagenet", 1_280_000, 1)
K400 = DatasetSpec("k400", 240_000, 287)
SSV2 = DatasetSpec("ssv2", 170_000, 112)

BUILTIN_DATASETS = {d.name: d for d in (IMAGENET, K400, SSV2)}


def images_per_epoch(d: DatasetSpec, frames: int) -> int:
    """Images seen in one epoch: instances x T (T forced to 1 for image datasets)."""
    if frames < 1:
        raise ValueError("frames must be >= 1")
    if d.is_image:
        frames = 1
    return d.instances * frames


@dataclass(frozen=True)
class SchedulePlan:
    pretrain_epochs: int
    finetune_epochs: int
    frames: int
    pretrain_dataset: DatasetSpec = IMAGENET
    finetune_dataset: DatasetSpec = K400

    def __post_init__(self):
        if self.pretrain_epochs < 0 or self.finetune_epochs < 0:
            raise ValueError("epoch counts must be non-negative")
        if self.frames < 1:
            raise ValueError("frames must be >= 1")


def total_budget(plan: SchedulePlan) -> int:
    """Total training images of a two-phase plan."""
    pre = plan.pretrain_epochs * images_per_epoch(plan.pretrain_dataset, 1)
    fine = plan.finetune_epochs * images_per_epoch(plan.finetune_dataset, plan.frames)
    return pre + fine


def from_scratch(epochs: int, frames: int, dataset: DatasetSpec = K400) -> SchedulePlan:
    return SchedulePlan(0, epochs, frames, finetune_dataset=dataset)


def budget_multiplier(plan: SchedulePlan, baseline: SchedulePlan) -> Fraction:
    base = total_budget(baseline)
    if base == 0:
        raise ZeroDivisionError("baseline plan has zero budget")
    return Fraction(total_budget(plan), base)


def format_multiplier(m: Fraction, decimals: int = 2, rounding: str = "truncate") -> str:
    """Render like "x1.16"; trailing zeros stripped ("x1", "x0.5")."""
    scale = 10**decimals
    if rounding == "truncate":
        units = int(m * scale)  # Fraction -> int truncates toward zero
    elif rounding == "nearest":
        units = int((m * scale + Fraction(1, 2)).__floor__())
    else:
        raise ValueError(f"unknown rounding mode {rounding!r}")
    text = f"{units / scale:.{decimals}f}".rstrip("0").rstrip(".")
    return f"x{text}"


def plan_fixed_budget(
    frames: int,
    baseline_epochs: int,
    finetune_epochs: int = 50,
    candidates: tuple[int, ...] = (100, 150, 300),
    pretrain_dataset: DatasetSpec = IMAGENET,
    finetune_dataset: DatasetSpec = K400,
) -> SchedulePlan:
    """Pick the candidate pre-train epoch count whose total budget is closest
    to the from-scratch baseline (pre-training gets roughly half)."""
    if not candidates:
        raise ValueError("candidate set must be non-empty")
    baseline = from_scratch(baseline_epochs, frames, finetune_dataset)
    best = None
    best_gap = None
    for c in sorted(candidates):
        plan = SchedulePlan(c, finetune_epochs, frames, pretrain_dataset, finetune_dataset)
        gap = abs(budget_multiplier(plan, baseline) - 1)
        if best_gap is None or gap < best_gap:
            best, best_gap = plan, gap
    return best


def plan_sota(
    frames: int,
    finetune_epochs: int = 50,
    pretrain_dataset: DatasetSpec = IMAGENET,
    finetune_dataset: DatasetSpec = K400,
) -> SchedulePlan:
    """Long fixed image pre-training (300 epochs) plus a short fine-tune."""
    return SchedulePlan(300, finetune_epochs, frames, pretrain_dataset, finetune_dataset)
