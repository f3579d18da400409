"""Greedy netgain descent over two-side partitions.

One sweep builds an ordered transfer set for side 1 (repeated selection
of negative-netgain pixels against the shrinking side), moves it to side
2, then does the same for side 2 restricted to pixels that were on side
2 when the sweep started (pixels that just arrived are provably not
worth moving back within the sweep).  Sweeps repeat until both transfer
sets come back empty.

In exact netgain mode every accepted move strictly decreases the
distance, so the loop terminates at a state where no single transfer
improves, a single-move local minimum.  Asymptotic mode can accept
non-improving moves on small inputs; a cycle detector falls back to
exact mode if a state repeats.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .core import (
    EmptySideError,
    LastPixelError,
    Partition,
    SegConfig,
    SumIndex,
    apply_transfer,
    as_image,
    f_pair,
    gain_from_terms,
)

__all__ = [
    "ConvergenceError",
    "TransferSet",
    "SweepStats",
    "SegState",
    "initial_partition",
    "negative_set",
    "build_transfer_set",
    "sweep",
    "run",
    "verify_local_min",
]

# Query block size for the brute-force ("naive") row-sum engine; bounds
# the pairwise matrix memory without changing the O(n^2) cost profile.
_NAIVE_BLOCK = 512


class ConvergenceError(RuntimeError):
    """The sweep cap was reached with transfer sets still nonempty."""


@dataclass
class TransferSet:
    """Pixels accepted for transfer out of ``side``, in selection order.

    ``netgains`` holds each pixel's netgain at acceptance time, i.e.
    relative to the side already shrunk by the earlier selections; every
    entry is strictly negative.
    """

    side: int
    pixels: list = field(default_factory=list)
    netgains: list = field(default_factory=list)

    def __len__(self):
        return len(self.pixels)


@dataclass
class SweepStats:
    sweep_index: int
    distance_before: float
    distance_after: float
    moved_1to2: int
    moved_2to1: int
    elapsed_seconds: float


def _rng(*entropy) -> np.random.Generator:
    """Counter-based generator keyed by a tuple of integers."""
    key = [int(e) & 0xFFFFFFFFFFFFFFFF for e in entropy]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


def initial_partition(img, cfg: SegConfig) -> Partition:
    """Starting partition: seeded balanced coin flips or target threshold.

    Threshold init puts a pixel on side 1 iff its value is strictly
    closer to p1 than to p2.  Either way, if a side comes out empty the
    single pixel whose value is closest to that side's target is
    reassigned, so the result is always usable by the optimizer.
    """
    img = as_image(img)
    values = img.ravel()
    if cfg.init == "random":
        rng = _rng(cfg.init_seed)
        mask = rng.random(values.size) < 0.5
    else:
        mask = np.abs(values - cfg.p1) < np.abs(values - cfg.p2)
    if not mask.any():
        mask[int(np.argmin(np.abs(values - cfg.p1)))] = True
    if mask.all():
        mask[int(np.argmin(np.abs(values - cfg.p2)))] = False
    return Partition.from_mask(mask)


class SegState:
    """Mutable optimizer state: partition plus cached kernel double sums.

    With ``accel="sumindex"`` the state owns a :class:`SumIndex` and
    netgain queries cost O(log n); with ``accel="naive"`` row sums are
    brute force over the side's values, O(n) per query, and the double
    sums are maintained incrementally the same way.
    """

    def __init__(self, img, cfg: SegConfig, part: Partition | None = None):
        self.img = as_image(img)
        self.values = self.img.ravel()
        self.cfg = cfg
        self.mode = cfg.netgain_mode
        if part is None:
            part = initial_partition(self.img, cfg)
        if part.size != self.values.size:
            raise ValueError("partition does not match image")
        if part.n1 == 0 or part.n2 == 0:
            raise EmptySideError("both sides must be nonempty")
        self.part = part
        if cfg.accel == "sumindex":
            self.idx = SumIndex(self.img, part, cfg)
        else:
            self.idx = None
            self._dsum = {
                1: _double_sum_direct(self.values[part.labels == 1], cfg.p1),
                2: _double_sum_direct(self.values[part.labels == 2], cfg.p2),
            }

    @property
    def n1(self) -> int:
        return self.part.n1

    @property
    def n2(self) -> int:
        return self.part.n2

    def dsums(self) -> tuple[float, float]:
        if self.idx is not None:
            return self.idx.dsum1, self.idx.dsum2
        return self._dsum[1], self._dsum[2]

    def distance(self) -> float:
        d1, d2 = self.dsums()
        return d1 / self.n1**2 + d2 / self.n2**2

    def _target(self, side: int) -> float:
        return self.cfg.p1 if side == 1 else self.cfg.p2

    def row_sums(self, side: int, xs, p: float):
        if self.idx is not None:
            return self.idx.row_sums(side, xs, p)
        sv = self.values[self.part.labels == side]
        return _row_sums_direct(sv, np.asarray(xs, dtype=np.float64), p)

    def netgains(self, pixels, mode: str | None = None) -> np.ndarray:
        """Netgains of ``pixels`` (all on one side) against the frozen state."""
        pixels = np.asarray(pixels, dtype=np.intp)
        if pixels.size == 0:
            return np.empty(0, dtype=np.float64)
        side = int(self.part.labels[pixels[0]])
        if self.part.count(side) <= 1:
            raise LastPixelError(f"last pixel on side {side}")
        dst = 2 if side == 1 else 1
        x = self.values[pixels]
        r_src = self.row_sums(side, x, self._target(side))
        r_dst = self.row_sums(dst, x, self._target(dst))
        f_src = f_pair(x, x, self._target(side))
        f_dst = f_pair(x, x, self._target(dst))
        d1, d2 = self.dsums()
        out = gain_from_terms(side, r_src, r_dst, f_src, f_dst,
                              d1, d2, self.n1, self.n2, mode or self.mode)
        return np.atleast_1d(np.asarray(out, dtype=np.float64))

    def netgain(self, k: int, mode: str | None = None) -> float:
        return float(self.netgains([k], mode)[0])

    def _probe(self, k: int, mode: str):
        """Netgain of pixel ``k`` plus the terms needed to apply the move."""
        side = int(self.part.labels[k])
        if self.part.count(side) <= 1:
            raise LastPixelError(f"last pixel on side {side}")
        dst = 2 if side == 1 else 1
        x = float(self.values[k])
        r_src = float(self.row_sums(side, x, self._target(side)))
        r_dst = float(self.row_sums(dst, x, self._target(dst)))
        f_src = f_pair(x, x, self._target(side))
        f_dst = f_pair(x, x, self._target(dst))
        d1, d2 = self.dsums()
        gain = gain_from_terms(side, r_src, r_dst, f_src, f_dst,
                               d1, d2, self.n1, self.n2, mode)
        return gain, (side, dst, x, r_src, r_dst, f_src, f_dst)

    def _apply_probe(self, k: int, terms) -> None:
        """Apply the move probed for pixel ``k``, reusing its row sums.

        The cache updates repeat the exact expression shapes used inside
        the netgain evaluation, so an accepted negative netgain always
        translates into a strictly smaller cached distance.
        """
        side, dst, x, r_src, r_dst, f_src, f_dst = terms
        if self.idx is not None:
            new_src = self.idx._dsum(side) - 2.0 * r_src + f_src
            new_dst = self.idx._dsum(dst) + 2.0 * r_dst + f_dst
            self.idx._set_dsum(side, new_src)
            self.idx._set_dsum(dst, new_dst)
            self.idx._delete(side, x)
            self.idx._insert(dst, x)
            self.idx._mutations += 1
            self.idx.maybe_rebuild(self.part)
        else:
            self._dsum[side] = self._dsum[side] - 2.0 * r_src + f_src
            self._dsum[dst] = self._dsum[dst] + 2.0 * r_dst + f_dst
        self.part.flip([k], dst)

    def move(self, k: int) -> None:
        """Transfer a single pixel, keeping all caches consistent."""
        _, terms = self._probe(k, self.mode)
        self._apply_probe(k, terms)

    def apply(self, pixels) -> None:
        """Transfer a batch of pixels (all on one side)."""
        pixels = np.asarray(pixels, dtype=np.intp)
        if pixels.size == 0:
            return
        if self.idx is not None:
            apply_transfer(self.part, self.idx, pixels, self.values)
            return
        for k in pixels:
            self.move(int(k))

    def copy(self) -> "SegState":
        out = object.__new__(SegState)
        out.img = self.img
        out.values = self.values
        out.cfg = self.cfg
        out.mode = self.mode
        out.part = self.part.copy()
        if self.idx is not None:
            out.idx = self.idx.copy()
        else:
            out.idx = None
            out._dsum = dict(self._dsum)
        return out


def _row_sums_direct(side_vals: np.ndarray, xs: np.ndarray, p: float):
    """Brute-force row sums, blocked to bound memory."""
    xs1 = np.atleast_1d(xs)
    out = np.empty(xs1.size, dtype=np.float64)
    for lo in range(0, xs1.size, _NAIVE_BLOCK):
        blk = xs1[lo:lo + _NAIVE_BLOCK, None]
        out[lo:lo + _NAIVE_BLOCK] = (
            np.abs(blk + side_vals[None, :] - 2.0 * p).sum(axis=1)
            - np.abs(blk - side_vals[None, :]).sum(axis=1)
        )
    return out if np.ndim(xs) else float(out[0])


def _double_sum_direct(side_vals: np.ndarray, p: float) -> float:
    rs = _row_sums_direct(side_vals, side_vals, p)
    return float(np.sum(rs)) if side_vals.size else 0.0


def _screen(state: SegState, side: int, candidates=None):
    """Pixels of ``side`` with negative netgain, plus those netgains."""
    if state.part.count(side) <= 1:
        return np.empty(0, dtype=np.intp), np.empty(0, dtype=np.float64)
    if candidates is None:
        cand = state.part.side_pixels(side)
    else:
        cand = np.asarray(candidates, dtype=np.intp)
        if cand.size and not np.all(state.part.labels[cand] == side):
            raise ValueError("candidates must currently lie on the given side")
    if cand.size == 0:
        return cand, np.empty(0, dtype=np.float64)
    gains = state.netgains(cand)
    keep = gains < 0.0
    return cand[keep], gains[keep]


def negative_set(state: SegState, side: int, candidates=None) -> np.ndarray:
    """Pixels of ``side`` whose individual transfer decreases the distance.

    Uses the state's configured netgain mode.  A lone pixel on a side is
    never transferable and is excluded.
    """
    return _screen(state, side, candidates)[0]


def build_transfer_set(state: SegState, side: int, candidates=None) -> TransferSet:
    """Ordered transfer set for ``side`` under the configured tset mode.

    Candidates are fixed at entry (the negative-netgain set); netgains
    are re-evaluated against the shrinking side as selections accumulate,
    and construction halts at the first nonnegative minimum ("strict")
    or first nonnegative recheck in initial-netgain order ("sorted").
    Every accepted netgain is strictly negative, so applying the set in
    exact mode strictly decreases the distance.  The input state is not
    modified.
    """
    ts = TransferSet(side=side)
    cand, gains = _screen(state, side, candidates)
    if cand.size == 0:
        return ts
    work = state.copy()
    if state.cfg.tset_mode == "strict":
        remaining = cand
        current = gains
        while remaining.size:
            pick = int(np.lexsort((remaining, current))[0])
            if not current[pick] < 0.0:
                break
            k = int(remaining[pick])
            ts.pixels.append(k)
            ts.netgains.append(float(current[pick]))
            work.move(k)
            remaining = np.delete(remaining, pick)
            if remaining.size == 0 or work.part.count(side) <= 1:
                break
            current = work.netgains(remaining)
        return ts
    # sorted heuristic: initial-netgain order, fresh recheck per acceptance
    order = np.lexsort((cand, gains))
    for j in order:
        if work.part.count(side) <= 1:
            break
        k = int(cand[j])
        g, terms = work._probe(k, work.mode)
        g = float(g)
        if not g < 0.0:
            break
        ts.pixels.append(k)
        ts.netgains.append(g)
        work._apply_probe(k, terms)
    return ts


def sweep(state: SegState, sweep_index: int = 0) -> SweepStats:
    """One alternating pass: transfer T(side 1), then T(side 2).

    The side-2 transfer set only considers pixels that were on side 2
    when the sweep started, so nothing moves twice within a sweep.
    Mutates ``state`` and returns the sweep statistics.
    """
    t0 = time.perf_counter()
    before = state.distance()
    side2_at_start = state.part.side_pixels(2)
    t1 = build_transfer_set(state, 1)
    state.apply(t1.pixels)
    t2 = build_transfer_set(state, 2, candidates=side2_at_start)
    state.apply(t2.pixels)
    after = state.distance()
    return SweepStats(
        sweep_index=sweep_index,
        distance_before=before,
        distance_after=after,
        moved_1to2=len(t1),
        moved_2to1=len(t2),
        elapsed_seconds=time.perf_counter() - t0,
    )


def run(img, cfg: SegConfig, part: Partition | None = None):
    """Full optimization: initialize, sweep until no transfers remain.

    Returns ``(partition, stats)`` where ``stats`` is the list of
    per-sweep records (the last sweep always reports zero moves).  In
    asymptotic mode a repeated (n1, distance) state triggers a permanent
    fallback to exact netgains; if the sweep cap is reached with moves
    still pending, :class:`ConvergenceError` is raised.
    """
    state = SegState(img, cfg, part)
    stats: list[SweepStats] = []
    seen: set = set()
    moved = True
    for i in range(cfg.max_sweeps):
        st = sweep(state, i)
        stats.append(st)
        moved = st.moved_1to2 + st.moved_2to1 > 0
        if not moved:
            break
        if state.mode == "asymptotic":
            key = (state.n1, st.distance_after)
            if key in seen:
                state.mode = "exact"
            seen.add(key)
    else:
        if moved:
            raise ConvergenceError(
                f"no convergence within {cfg.max_sweeps} sweeps"
            )
    return state.part, stats


def verify_local_min(state: SegState) -> bool:
    """True iff no transferable pixel has a negative exact netgain."""
    for side in (1, 2):
        if state.part.count(side) <= 1:
            continue
        gains = state.netgains(state.part.side_pixels(side), mode="exact")
        if np.any(gains < 0.0):
            return False
    return True
