"""Patch-wise segmentation, mask filtering, and the sort-and-restore strategy.

Patch-wise mode runs the optimizer on overlapping square windows and
combines per-window labelings by per-pixel voting.  The sort-and-restore
("segmenting together") mode first rearranges all pixel values into
nondecreasing row-major order, segments that transformed image patch-wise,
then scatters the labels back through the recorded bijection.  Sorting
groups similar intensities into contiguous blocks, which is what makes
heavily fragmented foregrounds tractable.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.ndimage

from .core import Partition, SegConfig, as_image
from .optimizer import run

__all__ = [
    "PatchGrid",
    "VoteMap",
    "SortMapping",
    "extract_patches",
    "patch_votes",
    "segment_patchwise",
    "median_filter",
    "sort_transform",
    "restore",
    "segment_together",
]


@dataclass(frozen=True)
class PatchGrid:
    """Square windows of side ``patch_len`` covering an image."""

    patch_len: int
    stride: int
    windows: tuple  # (top, left) origins, row-major order


@dataclass
class VoteMap:
    """Per-pixel foreground votes and window coverage counts."""

    votes: np.ndarray
    coverage: np.ndarray


def _origins(extent: int, length: int, stride: int) -> list[int]:
    out = list(range(0, extent - length + 1, stride))
    # clamp a final window flush to the edge so coverage is total
    if out[-1] != extent - length:
        out.append(extent - length)
    return out


def extract_patches(width: int, height: int, patch_len: int,
                    stride: int) -> PatchGrid:
    """Window origins for an image of the given size.

    Origins advance by ``stride``; when the remainder does not divide
    evenly a final window is clamped flush to the image edge.  For a
    square image of side D with stride 2 and even D - L this yields
    ((D - L)/2 + 1)^2 windows.
    """
    if patch_len < 1 or stride < 1:
        raise ValueError("patch_len and stride must be positive")
    if patch_len > min(width, height):
        raise ValueError(
            f"patch_len {patch_len} exceeds image side {min(width, height)}"
        )
    rows = _origins(height, patch_len, stride)
    cols = _origins(width, patch_len, stride)
    windows = tuple((r, c) for r in rows for c in cols)
    return PatchGrid(patch_len=patch_len, stride=stride, windows=windows)


def _patch_seed(seed: int, top: int, left: int) -> int:
    key = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, top, left])
    return int(key.generate_state(1, np.uint64)[0])


def _align_side1(sub: np.ndarray, mask: np.ndarray, p1: float) -> np.ndarray:
    """Resolve label identity: side 1 is the side whose mean is nearest p1.

    On an exact tie the side holding the window's first pixel (row-major)
    becomes side 2.
    """
    m1 = float(sub[mask].mean())
    m2 = float(sub[~mask].mean())
    d1 = abs(m1 - p1)
    d2 = abs(m2 - p1)
    if d2 < d1:
        return ~mask
    if d1 == d2 and mask.flat[0]:
        return ~mask
    return mask


def patch_votes(img, cfg: SegConfig) -> VoteMap:
    """Run the optimizer per window and accumulate foreground votes.

    Windows with exactly constant values skip the optimizer (it would
    split them arbitrarily): they vote all their pixels foreground when
    the constant is strictly closer to p1 than to p2, and cast no votes
    otherwise.  Per-window init streams derive from (init_seed, origin),
    except that a single full-image window reuses the seed unchanged and
    therefore reproduces a plain full-image run.
    """
    img = as_image(img)
    if cfg.patch_len is None:
        raise ValueError("cfg.patch_len is required for patch-wise runs")
    height, width = img.shape
    grid = extract_patches(width, height, cfg.patch_len, cfg.stride)
    votes = np.zeros(img.shape, dtype=np.int64)
    coverage = np.zeros(img.shape, dtype=np.int64)
    length = cfg.patch_len
    single = len(grid.windows) == 1 and (height, width) == (length, length)
    for top, left in grid.windows:
        sub = np.ascontiguousarray(img[top:top + length, left:left + length])
        coverage[top:top + length, left:left + length] += 1
        lo = sub.flat[0]
        if np.all(sub == lo):
            if abs(lo - cfg.p1) < abs(lo - cfg.p2):
                votes[top:top + length, left:left + length] += 1
            continue
        if single:
            pcfg = cfg
        else:
            pcfg = replace(cfg, init_seed=_patch_seed(cfg.init_seed, top, left))
        try:
            part, _ = run(sub, pcfg)
        except Exception as exc:
            raise RuntimeError(
                f"patch optimization failed at window origin ({top}, {left})"
            ) from exc
        mask = part.side1_mask((length, length))
        mask = _align_side1(sub, mask, cfg.p1)
        votes[top:top + length, left:left + length] += mask
    return VoteMap(votes=votes, coverage=coverage)


def segment_patchwise(img, cfg: SegConfig) -> Partition:
    """Patch-wise segmentation: window votes thresholded per pixel."""
    vm = patch_votes(img, cfg)
    frac = vm.votes / vm.coverage
    return Partition.from_mask(frac >= cfg.vote_threshold)


def median_filter(mask, window: int = 3):
    """Median filter with replicate border padding.

    ``window`` must be odd; window 1 is the identity.  Works on binary
    masks (majority vote per neighborhood) and grayscale arrays alike;
    the input dtype is preserved.
    """
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be odd and positive")
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise ValueError("mask must be 2-d")
    if window == 1:
        return arr.copy()
    return scipy.ndimage.median_filter(arr, size=window, mode="nearest")


@dataclass(frozen=True)
class SortMapping:
    """Bijection between transformed entries and original pixels.

    ``forward[t]`` is the original flat pixel index whose value landed at
    transformed entry ``t``; ``inverse`` is its inverse permutation.
    """

    forward: np.ndarray
    inverse: np.ndarray


def sort_transform(img):
    """Rearrange pixel values into nondecreasing row-major order.

    Stable: ties keep their original row-major order.  Returns the
    transformed image (same shape) and the mapping back to original
    pixel positions.
    """
    img = as_image(img)
    flat = img.ravel()
    forward = np.argsort(flat, kind="stable")
    inverse = np.empty_like(forward)
    inverse[forward] = np.arange(flat.size)
    transformed = flat[forward].reshape(img.shape)
    return transformed, SortMapping(forward=forward, inverse=inverse)


def restore(mask, mapping: SortMapping):
    """Scatter a mask over the transformed image back to original pixels."""
    arr = np.asarray(mask)
    if arr.size != mapping.forward.size:
        raise ValueError("mask size does not match the mapping")
    flat = arr.ravel()
    out = np.empty_like(flat)
    out[mapping.forward] = flat
    return out.reshape(arr.shape)


def segment_together(img, cfg: SegConfig) -> Partition:
    """Sort, segment the transformed image patch-wise, restore labels."""
    transformed, mapping = sort_transform(img)
    part = segment_patchwise(transformed, cfg)
    mask = part.side1_mask(transformed.shape)
    return Partition.from_mask(restore(mask, mapping))
