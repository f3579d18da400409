"""Independent reference implementations used as test oracles.

Everything here is deliberately slow and simple (plain Python loops, no
shared code with the package) so that agreement with the fast paths is
meaningful.  ``distance_integral`` goes one step further and evaluates
the defining integral of the objective directly, by exact piecewise
integration, without ever using the pairwise closed form.
"""

from __future__ import annotations

import math

import numpy as np


def f_ref(a: float, b: float, p: float) -> float:
    return abs(a + b - 2.0 * p) - abs(a - b)


def side_values(values, labels, side):
    return [float(v) for v, s in zip(values, labels) if s == side]


def distance_ref(values, labels, p1=1.0, p2=0.0) -> float:
    """O(n^2) double sums straight from the closed form."""
    total = 0.0
    for side, p in ((1, p1), (2, p2)):
        vals = side_values(values, labels, side)
        if not vals:
            raise ValueError("empty side")
        acc = 0.0
        for a in vals:
            for b in vals:
                acc += f_ref(a, b, p)
        total += acc / len(vals) ** 2
    return total


def distance_integral(values, labels, p1=1.0, p2=0.0) -> float:
    """Exact piecewise integration of the defining objective.

    Per side the integrand is G(x)^2 / n^2 where
    G(x) = sum_i [ 1(v_i - p <= x) - 1(p - v_i < x) ],
    a step function with breakpoints at +-(v_i - p) that vanishes outside
    the breakpoint range.  Integrate segment by segment.
    """
    total = 0.0
    for side, p in ((1, p1), (2, p2)):
        vals = side_values(values, labels, side)
        if not vals:
            raise ValueError("empty side")
        res = [v - p for v in vals]
        breaks = sorted(set(res) | set(-r for r in res))
        acc = 0.0
        for lo, hi in zip(breaks[:-1], breaks[1:]):
            if hi <= lo:
                continue
            x = (lo + hi) / 2.0
            g = sum((1 if r <= x else 0) - (1 if -r < x else 0) for r in res)
            acc += (g * g) * (hi - lo)
        total += acc / len(vals) ** 2
    return total


def row_sum_ref(side_vals, x: float, p: float) -> float:
    return sum(f_ref(x, v, p) for v in side_vals)


def netgain_ref(values, labels, k: int, p1=1.0, p2=0.0) -> float:
    """Exact netgain as the difference of two reference distances."""
    after = list(labels)
    after[k] = 2 if labels[k] == 1 else 1
    return distance_ref(values, after, p1, p2) - distance_ref(values, labels, p1, p2)


def negative_set_ref(values, labels, side, p1=1.0, p2=0.0):
    """Brute filter over all single moves from ``side``."""
    if sum(1 for s in labels if s == side) <= 1:
        return []
    out = []
    for k, s in enumerate(labels):
        if s == side and netgain_ref(values, labels, k, p1, p2) < 0:
            out.append(k)
    return out


def descend_ref(values, labels, p1=1.0, p2=0.0):
    """Steepest single-move descent to a local minimum (tiny inputs only)."""
    labels = list(labels)
    while True:
        best_k, best_g = None, 0.0
        for k, s in enumerate(labels):
            n_side = sum(1 for t in labels if t == s)
            if n_side <= 1:
                continue
            g = netgain_ref(values, labels, k, p1, p2)
            if g < best_g:
                best_k, best_g = k, g
        if best_k is None:
            return labels, distance_ref(values, labels, p1, p2)
        labels[best_k] = 2 if labels[best_k] == 1 else 1


def is_local_min_ref(values, labels, p1=1.0, p2=0.0) -> bool:
    for k, s in enumerate(labels):
        n_side = sum(1 for t in labels if t == s)
        if n_side <= 1:
            continue
        if netgain_ref(values, labels, k, p1, p2) < 0:
            return False
    return True


def median_filter_ref(mask, window):
    """Median with replicate padding, plain loops."""
    mask = np.asarray(mask)
    h, w = mask.shape
    half = window // 2
    out = np.empty_like(mask)
    for r in range(h):
        for c in range(w):
            vals = []
            for dr in range(-half, half + 1):
                for dc in range(-half, half + 1):
                    rr = min(max(r + dr, 0), h - 1)
                    cc = min(max(c + dc, 0), w - 1)
                    vals.append(mask[rr, cc])
            vals.sort()
            out[r, c] = vals[len(vals) // 2]
    return out


def dsc_ref(a: set, b: set) -> float:
    return 2.0 * len(a & b) / (len(a) + len(b))


def circle_count_ref(width, height, cy, cx, radius) -> int:
    count = 0
    for r in range(height):
        for c in range(width):
            if (r - cy) ** 2 + (c - cx) ** 2 <= radius * radius:
                count += 1
    return count


def delta_ref(a: set, b: set) -> int:
    """Three-branch piecewise definition of the subset metric."""
    if a <= b or b <= a:
        return abs(len(a) - len(b))
    if not (a & b):
        return max(len(a), len(b))
    inter = len(a & b)
    return max(len(a) - inter, len(b) - inter)


def random_instance(rng, n_min=4, n_max=12, binary_chance=0.25):
    """Small random (values, labels) pair with both sides nonempty."""
    n = int(rng.integers(n_min, n_max + 1))
    if rng.random() < binary_chance:
        values = rng.integers(0, 2, size=n).astype(float)
    else:
        values = rng.uniform(-0.25, 1.25, size=n)
    labels = rng.integers(1, 3, size=n)
    labels[int(rng.integers(0, n))] = 1
    labels[int(rng.integers(0, n))] = 2
    if not (labels == 1).any():
        labels[0] = 1
    if not (labels == 2).any():
        labels[-1] = 2
    return values, labels.astype(np.uint8)
