"""Synthetic moving-shapes video dataset.

Each clip contains one binary shape translating at one pixel per frame in
one of four directions, with periodic wraparound. The shape class is
decidable from any single frame; the motion class needs at least two
frames (start positions are random). Joint labels are shape x motion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_SQUARE = np.ones((5, 5))
_PLUS = np.zeros((5, 5))
_PLUS[2, :] = 1
_PLUS[:, 2] = 1
_CROSS = np.eye(5) + np.fliplr(np.eye(5))
_CROSS[_CROSS > 1] = 1
_RING = np.ones((5, 5))
_RING[1:4, 1:4] = 0
_HBAR = np.zeros((5, 5))
_HBAR[:, 0] = _HBAR[:, 4] = _HBAR[2, :] = 1
_TEE = np.zeros((5, 5))
_TEE[0, :] = _TEE[:, 2] = 1
_ELL = np.zeros((5, 5))
_ELL[:, 0] = _ELL[4, :] = 1
_DIAMOND = np.zeros((5, 5))
for _i in range(5):
    _DIAMOND[_i, abs(2 - _i)] = _DIAMOND[_i, 4 - abs(2 - _i)] = 1

SHAPE_STAMPS = (_SQUARE, _PLUS, _CROSS, _RING, _HBAR, _TEE, _ELL, _DIAMOND)
MOTIONS = ((0, 1), (0, -1), (1, 0), (-1, 0))  # (dy, dx) per frame


@dataclass
class MovingShapesDataset:
    clips: np.ndarray  # (n, 1, T, H, W) float32
    shape_labels: np.ndarray
    motion_labels: np.ndarray
    joint_labels: np.ndarray
    seed: int

    def __len__(self) -> int:
        return self.clips.shape[0]

    @property
    def num_shapes(self) -> int:
        return int(self.shape_labels.max()) + 1

    @property
    def num_motions(self) -> int:
        return int(self.motion_labels.max()) + 1


def gen_moving_shapes(
    seed: int,
    n: int,
    t_frames: int,
    height: int,
    width: int,
    num_shapes: int = 4,
    num_motions: int = 4,
    noise: float = 0.0,
    speed: int = 1,
) -> MovingShapesDataset:
    """Deterministic, class-balanced clip generator.

    `noise` adds i.i.d. Gaussian pixel noise per frame; `speed` is the
    displacement in pixels per frame. The clean signal still satisfies
    the label invariants.
    """
    if speed < 1:
        raise ValueError("speed must be >= 1 pixel per frame")
    if t_frames < 2:
        raise ValueError("motion labels need at least 2 frames")
    if height < 16 or width < 16:
        raise ValueError("frames must be at least 16x16 to contain the shapes")
    if not 1 <= num_shapes <= len(SHAPE_STAMPS):
        raise ValueError(f"num_shapes must be in 1..{len(SHAPE_STAMPS)}")
    if not 1 <= num_motions <= len(MOTIONS):
        raise ValueError(f"num_motions must be in 1..{len(MOTIONS)}")
    rng = np.random.default_rng(seed)
    num_joint = num_shapes * num_motions
    # class i receives n//K (+1 for the first n%K classes)
    counts = [n // num_joint + (1 if i < n % num_joint else 0) for i in range(num_joint)]
    joint = np.concatenate([np.full(c, i, dtype=np.int64) for i, c in enumerate(counts)])
    order = rng.permutation(n)
    joint = joint[order]
    shape_labels = joint // num_motions
    motion_labels = joint % num_motions
    clips = np.zeros((n, 1, t_frames, height, width), dtype=np.float32)
    for i in range(n):
        stamp = SHAPE_STAMPS[shape_labels[i]]
        dy, dx = MOTIONS[motion_labels[i]]
        frame = np.zeros((height, width), dtype=np.float32)
        y0 = int(rng.integers(0, height - stamp.shape[0] + 1))
        x0 = int(rng.integers(0, width - stamp.shape[1] + 1))
        frame[y0 : y0 + stamp.shape[0], x0 : x0 + stamp.shape[1]] = stamp
        for t in range(t_frames):
            clips[i, 0, t] = np.roll(frame, (t * dy * speed, t * dx * speed), axis=(0, 1))
    if noise > 0:
        clips += rng.normal(0.0, noise, clips.shape).astype(np.float32)
    return MovingShapesDataset(clips, shape_labels, motion_labels, joint_labels=joint, seed=seed)


def split(
    data: MovingShapesDataset, val_fraction: float = 0.25, seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic (train_indices, val_indices) split."""
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(data))
    n_val = max(1, int(round(len(data) * val_fraction)))
    return order[n_val:], order[:n_val]
