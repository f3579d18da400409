"""Segmentation quality metrics and the distance-landscape experiment."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Partition, SegConfig, as_image, distance

__all__ = [
    "ChainPoint",
    "dsc",
    "landscape_chain",
    "overlay",
    "invert",
]


def _as_bool_flat(mask, size=None):
    if isinstance(mask, Partition):
        return mask.side1_mask()
    if isinstance(mask, (set, frozenset)):
        if size is None:
            raise ValueError("a set needs an explicit universe size")
        out = np.zeros(size, dtype=bool)
        if mask:
            out[np.fromiter(mask, dtype=np.intp)] = True
        return out
    return np.asarray(mask, dtype=bool).ravel()


def dsc(a, b) -> float:
    """Dice similarity 2|A n B| / (|A| + |B|) of two pixel sets.

    Accepts boolean masks, Partitions (side 1 is the set), or plain sets
    of flat indices (both arguments must then be sets).  Undefined when
    both sets are empty.
    """
    if isinstance(a, (set, frozenset)) and isinstance(b, (set, frozenset)):
        inter = len(a & b)
        total = len(a) + len(b)
    else:
        am = _as_bool_flat(a)
        bm = _as_bool_flat(b, size=am.size)
        if am.size != bm.size:
            raise ValueError("masks must cover the same universe")
        inter = int(np.count_nonzero(am & bm))
        total = int(np.count_nonzero(am)) + int(np.count_nonzero(bm))
    if total == 0:
        raise ValueError("DSC undefined when both sets are empty")
    return 2.0 * inter / total


@dataclass(frozen=True)
class ChainPoint:
    """Distance sampled along the nested chain around a partition.

    ``offset`` counts transfers relative to the reference partition:
    negative offsets remove side-1 pixels, positive offsets pull side-2
    pixels in, 0 is the reference itself.
    """

    offset: int
    distance: float


def landscape_chain(img, truth: Partition, order_seed: int, step: int,
                    cfg: SegConfig | None = None) -> list[ChainPoint]:
    """Sample the distance along a nested chain through ``truth``.

    Side-2 pixels are added to side 1 one at a time in a seeded random
    order (positive offsets), and side-1 pixels removed likewise
    (negative offsets), evaluating the distance every ``step`` transfers.
    The walk stops one transfer short of emptying a side.  Points are
    returned sorted by offset; offset 0 is always present and holds the
    distance of ``truth`` exactly.
    """
    if step < 1:
        raise ValueError("step must be positive")
    img = as_image(img)
    cfg = cfg or SegConfig()
    rng = np.random.Generator(np.random.Philox(
        np.random.SeedSequence([int(order_seed) & 0xFFFFFFFFFFFFFFFF])))
    add_order = rng.permutation(truth.side_pixels(2))
    drop_order = rng.permutation(truth.side_pixels(1))
    points = [ChainPoint(0, distance(img, truth, cfg))]

    labels = truth.labels.copy()
    for j, k in enumerate(add_order[: truth.n2 - 1], start=1):
        labels[k] = 1
        if j % step == 0:
            points.append(ChainPoint(j, distance(img, Partition(labels), cfg)))

    labels = truth.labels.copy()
    for j, k in enumerate(drop_order[: truth.n1 - 1], start=1):
        labels[k] = 2
        if j % step == 0:
            points.append(ChainPoint(-j, distance(img, Partition(labels), cfg)))

    points.sort(key=lambda pt: pt.offset)
    return points


def overlay(truth_mask, segmented_mask, img=None) -> np.ndarray:
    """Residual image of foreground pixels the segmentation missed.

    Pixels where the truth foreground was found (or there is no truth
    foreground) are 0; missed foreground pixels carry the original image
    value (1.0 when no image is supplied, matching clean two-level
    inputs).  A perfect segmentation therefore yields an all-black image,
    and an empty segmentation reproduces the truth foreground.
    """
    truth = np.asarray(truth_mask, dtype=bool)
    seg = np.asarray(segmented_mask, dtype=bool)
    if truth.shape != seg.shape:
        raise ValueError("masks must share a shape")
    missed = truth & ~seg
    if img is None:
        return missed.astype(np.float64)
    img = as_image(img)
    return np.where(missed, img, 0.0)


def invert(mask) -> np.ndarray:
    """Complement of a binary mask; applying it twice is the identity."""
    return ~np.asarray(mask, dtype=bool)
