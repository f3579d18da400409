"""A metric on pixel subsets and the neighborhoods it induces.

Used to state single-move local optimality: a partition is locally
minimal when no partition within distance 1 of its foreground set has a
smaller objective.
"""

from __future__ import annotations

__all__ = ["delta", "in_neighborhood"]


def delta(a, b) -> int:
    """Distance between two pixel sets over a common universe.

    Computed as max(|A| - |A n B|, |B| - |A n B|), which reproduces the
    nested case (||A| - |B||) and the disjoint case (max(|A|, |B|)) of
    the piecewise definition without branching.
    """
    a = a if isinstance(a, (set, frozenset)) else set(a)
    b = b if isinstance(b, (set, frozenset)) else set(b)
    common = len(a & b)
    return max(len(a) - common, len(b) - common)


def in_neighborhood(a, b, xi) -> bool:
    """True iff delta(a, b) <= xi."""
    if xi <= 0:
        raise ValueError("xi must be positive")
    return delta(a, b) <= xi
