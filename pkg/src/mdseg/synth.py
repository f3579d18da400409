"""Deterministic synthetic inputs: shapes, speckle grids, additive noise.

All randomness comes from counter-based generators (Philox) keyed by the
caller's seed, so outputs are bit-identical across platforms and the
per-pixel noise stream cannot be reordered by execution order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import Partition, as_image

__all__ = [
    "ShapeSpec",
    "NoiseSpec",
    "make_shape",
    "make_pseudo_qr",
    "add_noise",
]


@dataclass(frozen=True)
class ShapeSpec:
    """Geometry request for a clean two-level image.

    ``params`` overrides the kind-specific defaults: circles take
    ``center`` (row, col) and ``radius``; squares ``center`` and ``side``;
    triangles and stars a ``vertices`` list of (row, col) pairs, with
    stars also accepting ``outer_radius``/``inner_radius``/``points``.
    The speckle kind ("pseudo-qr") takes ``count`` and ``seed``.
    """

    kind: str
    width: int = 200
    height: int = 200
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")


def _rng(*entropy) -> np.random.Generator:
    key = [int(e) & 0xFFFFFFFFFFFFFFFF for e in entropy]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


def _circle_mask(width, height, center, radius):
    cy, cx = center
    if not (0 <= cy < height and 0 <= cx < width):
        raise ValueError("circle center out of bounds")
    if min(cy, cx, height - 1 - cy, width - 1 - cx) < radius:
        raise ValueError("circle does not fit inside the image")
    rr = np.arange(height)[:, None] - cy
    cc = np.arange(width)[None, :] - cx
    # squared-distance test keeps integer geometry exact
    return rr * rr + cc * cc <= radius * radius


def _square_mask(width, height, center, side):
    cy, cx = center
    top = cy - side // 2
    left = cx - side // 2
    if top < 0 or left < 0 or top + side > height or left + side > width:
        raise ValueError("square does not fit inside the image")
    rr = np.arange(height)[:, None]
    cc = np.arange(width)[None, :]
    return (rr >= top) & (rr < top + side) & (cc >= left) & (cc < left + side)


def _polygon_mask(width, height, vertices):
    """Even-odd fill of a closed polygon, sampled at integer pixel centers."""
    verts = [(float(r), float(c)) for r, c in vertices]
    if len(verts) < 3:
        raise ValueError("polygon needs at least 3 vertices")
    for r, c in verts:
        if not (0 <= r <= height - 1 and 0 <= c <= width - 1):
            raise ValueError("polygon vertex out of bounds")
    rr = np.arange(height, dtype=np.float64)[:, None]
    cc = np.arange(width, dtype=np.float64)[None, :]
    inside = np.zeros((height, width), dtype=bool)
    n = len(verts)
    for i in range(n):
        r1, c1 = verts[i]
        r2, c2 = verts[(i + 1) % n]
        if r1 == r2:
            continue
        spans = (r1 > rr) != (r2 > rr)
        cross = c1 + (rr - r1) * (c2 - c1) / (r2 - r1)
        inside ^= spans & (cc < cross)
    return inside


def _star_vertices(center, outer_radius, inner_radius, points):
    cy, cx = center
    verts = []
    for i in range(2 * points):
        radius = outer_radius if i % 2 == 0 else inner_radius
        angle = math.pi * i / points - math.pi / 2.0
        verts.append((cy + radius * math.sin(angle),
                      cx + radius * math.cos(angle)))
    return verts


def make_shape(spec: ShapeSpec):
    """Clean image (1 inside the shape, 0 outside) and its true partition."""
    w, h = spec.width, spec.height
    if w < 1 or h < 1:
        raise ValueError("image dimensions must be positive")
    params = spec.params
    center = params.get("center", (h // 2, w // 2))
    if spec.kind == "circle":
        radius = params.get("radius", round(0.3 * min(w, h)))
        mask = _circle_mask(w, h, center, radius)
    elif spec.kind == "square":
        side = params.get("side", round(0.6 * min(w, h)))
        mask = _square_mask(w, h, center, side)
    elif spec.kind == "triangle":
        verts = params.get("vertices")
        if verts is None:
            verts = [(0.1 * (h - 1), 0.5 * (w - 1)),
                     (0.9 * (h - 1), 0.12 * (w - 1)),
                     (0.9 * (h - 1), 0.88 * (w - 1))]
        mask = _polygon_mask(w, h, verts)
    elif spec.kind == "star":
        verts = params.get("vertices")
        if verts is None:
            outer = params.get("outer_radius", 0.42 * min(w, h))
            inner = params.get("inner_radius", 0.38 * outer)
            points = params.get("points", 5)
            verts = _star_vertices(center, outer, inner, points)
        mask = _polygon_mask(w, h, verts)
    elif spec.kind in ("pseudo-qr", "qr"):
        count = params.get("count", (w * h) // 2)
        return make_pseudo_qr(w, h, count, params.get("seed", 0))
    else:
        raise ValueError(f"unknown shape kind {spec.kind!r}")
    img = mask.astype(np.float64)
    return img, Partition.from_mask(mask)


def make_pseudo_qr(width: int = 100, height: int = 100, count: int = 5000,
                   seed: int = 0):
    """Speckle image: exactly ``count`` distinct pixels set to 1.

    Positions are drawn uniformly over the grid with the seeded
    generator; collisions are redrawn until exactly ``count`` distinct
    foreground pixels exist, so the foreground size is seed-independent.
    """
    total = width * height
    if count < 0 or count > total:
        raise ValueError("count must lie in [0, width*height]")
    mask = np.zeros(total, dtype=bool)
    if count:
        rng = _rng(seed)
        chosen: set[int] = set()
        while len(chosen) < count:
            need = count - len(chosen)
            draws = rng.integers(0, total, size=max(2 * need, 16))
            for d in draws:
                chosen.add(int(d))
                if len(chosen) == count:
                    break
        mask[np.fromiter(chosen, dtype=np.intp, count=count)] = True
    mask = mask.reshape(height, width)
    return mask.astype(np.float64), Partition.from_mask(mask)


def add_noise(img, spec: NoiseSpec):
    """Add i.i.d. zero-mean Gaussian noise of scale ``spec.sigma``.

    Pixel i consumes uniform draws 2i and 2i+1 of a Philox stream keyed
    by the seed and maps them through the Box-Muller transform, so the
    output is reproducible bit for bit and independent of evaluation
    order.  Values are deliberately not clamped afterwards: clamping
    would skew the error distribution.
    """
    img = as_image(img)
    if spec.sigma == 0.0:
        return img.copy()
    n = img.size
    u = _rng(spec.seed).random(2 * n)
    u1 = 1.0 - u[0::2]  # shift into (0, 1] so the log is finite
    u2 = u[1::2]
    z = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
    return img + spec.sigma * z.reshape(img.shape)
