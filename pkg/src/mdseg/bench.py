"""Runtime scaling benchmark for patch-wise segmentation.

For each requested patch length the harness times per-window optimizer
runs over a fixed noisy image, once with brute-force row sums ("naive",
O(n^2) netgain screening per sweep) and once with the sorted prefix-sum
index ("sumindex").  Per-window time in naive mode grows roughly like
the fourth power of the patch length; the index flattens that curve.

Timing runs are strictly serial so the scaling measurement stays
meaningful.  ``max_windows`` subsamples the window grid evenly and
extrapolates the total, which keeps large patch lengths affordable; the
window count column always reflects the full grid.
"""

from __future__ import annotations

import time
from dataclasses import replace

import numpy as np

from .core import SegConfig, as_image
from .io import BenchRecord
from .optimizer import run
from .pipeline import extract_patches, _patch_seed

__all__ = ["bench_harness", "bench_image"]


def bench_image(size: int = 200, sigma: float = 0.5, seed: int = 0):
    """Fixed benchmark input: a noisy centered disk."""
    from .synth import NoiseSpec, ShapeSpec, add_noise, make_shape

    img, _ = make_shape(ShapeSpec(kind="circle", width=size, height=size))
    return add_noise(img, NoiseSpec(sigma=sigma, seed=seed))


def _time_windows(img, cfg: SegConfig, windows, reps: int) -> float:
    length = cfg.patch_len
    total = 0.0
    for _ in range(reps):
        for top, left in windows:
            sub = np.ascontiguousarray(img[top:top + length, left:left + length])
            pcfg = replace(cfg, init_seed=_patch_seed(cfg.init_seed, top, left))
            t0 = time.perf_counter()
            run(sub, pcfg)
            total += time.perf_counter() - t0
    return total / reps


def bench_harness(lengths, reps, img, cfg: SegConfig | None = None,
                  max_windows: int | None = None) -> list[BenchRecord]:
    """Time patch-wise segmentation for each length in both backends."""
    img = as_image(img)
    if reps < 1:
        raise ValueError("reps must be positive")
    base = cfg or SegConfig()
    height, width = img.shape
    records = []
    for length in lengths:
        grid = extract_patches(width, height, int(length), base.stride)
        windows = grid.windows
        timed = windows
        if max_windows is not None and max_windows < len(windows):
            picks = np.linspace(0, len(windows) - 1, max_windows).astype(int)
            timed = [windows[i] for i in picks]
        for accel in ("naive", "sumindex"):
            cfg_l = replace(base, patch_len=int(length), accel=accel)
            measured = _time_windows(img, cfg_l, timed, reps)
            total = measured * (len(windows) / len(timed))
            records.append(BenchRecord(
                mode=accel,
                patch_len=int(length),
                total_seconds=total,
                windows=len(windows),
                windows_timed=len(timed),
            ))
    return records
