"""Piecewise-affine minorants with limited memory.

A minorant of a convex function f at an anchor z is a convex lower bound
that is tight at z.  The workhorse representation here is a CutPool: a
weighted sum of blocks, each block the max of affine cuts (optionally
clipped at zero for functions known to be nonnegative).  Memory bounds
how many past anchor generations a block retains.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np


class EmptyBlockWarning(UserWarning):
    """A cut block was evaluated with no cuts in it; it contributes 0."""


@dataclass
class AffineCut:
    """The affine function x -> coeff . x + offset, tagged with its birth iteration."""

    coeff: np.ndarray
    offset: float
    birth_iter: int = 0

    def __post_init__(self):
        self.coeff = np.asarray(self.coeff, dtype=float)
        self.offset = float(self.offset)
        if not (np.all(np.isfinite(self.coeff)) and np.isfinite(self.offset)):
            raise ValueError("cut coefficients must be finite")

    def value(self, x: np.ndarray) -> float:
        return float(self.coeff @ x) + self.offset

    def scaled(self, w: float) -> "AffineCut":
        return AffineCut(w * self.coeff, w * self.offset, self.birth_iter)


def cut_from_subgradient(z: np.ndarray, fz: float, g: np.ndarray, birth_iter: int = 0) -> AffineCut:
    """Affine minorant of f at z from a subgradient g: x -> fz + g.(x - z).

    The offset is fz - g.z, so the cut evaluates to fz at z exactly.
    """
    z = np.asarray(z, dtype=float)
    g = np.asarray(g, dtype=float)
    if not (np.all(np.isfinite(z)) and np.isfinite(fz) and np.all(np.isfinite(g))):
        raise ValueError("cut inputs must be finite")
    return AffineCut(g.copy(), float(fz) - float(g @ z), birth_iter)


@dataclass
class CutBlock:
    """weight * max over cuts, then max with 0 if clip_at_zero."""

    weight: float = 1.0
    cuts: list[AffineCut] = field(default_factory=list)
    clip_at_zero: bool = False

    def __post_init__(self):
        if self.weight < 0.0:
            raise ValueError("block weight must be nonnegative")

    def raw_max(self, x: np.ndarray) -> float | None:
        """Max of the cuts at x, or None when the block is empty."""
        if not self.cuts:
            return None
        return max(cut.value(x) for cut in self.cuts)


@dataclass
class CutPool:
    """Limited-memory piecewise-affine minorant of one function.

    memory=M keeps cuts from the most recent M+1 birth generations per
    block (the current anchor plus M past anchors); None means unbounded.
    tight_value records f(z) at the most recent anchor.
    """

    blocks: list[CutBlock]
    memory: int | None = None
    tight_value: float | None = None

    @classmethod
    def from_layout(cls, layout, memory: int | None = None) -> "CutPool":
        """Build an empty pool from (weight, clip_at_zero) block descriptors."""
        return cls(blocks=[CutBlock(weight=w, clip_at_zero=clip) for w, clip in layout],
                   memory=memory)

    def insert(self, block_id: int, cut: AffineCut) -> "CutPool":
        """Append a cut; evict generations older than newest_birth - memory.

        Cuts born in the same iteration form one generation, so multi-cut
        minorants (e.g. rank-r eigenvalue cuts) are kept or dropped whole
        and the newest cut is never evicted.
        """
        block = self.blocks[block_id]
        block.cuts.append(cut)
        if self.memory is not None:
            newest = max(c.birth_iter for c in block.cuts)
            keep_from = newest - self.memory
            block.cuts = [c for c in block.cuts if c.birth_iter >= keep_from]
        return self

    def eval(self, x: np.ndarray) -> float:
        """Sum of weight * max(cuts) per block (clipped at 0 where flagged).

        Never produces -inf: an empty block contributes 0 and raises
        EmptyBlockWarning.
        """
        x = np.asarray(x, dtype=float)
        for block in self.blocks:
            for cut in block.cuts:
                if cut.coeff.shape != x.shape:
                    raise ValueError(
                        f"cut dimension {cut.coeff.shape[0]} does not match point "
                        f"dimension {x.shape[0]}")
        total = 0.0
        for block in self.blocks:
            m = block.raw_max(x)
            if m is None:
                warnings.warn("empty cut block evaluates to 0", EmptyBlockWarning)
                continue
            if block.clip_at_zero and m < 0.0:
                m = 0.0
            total += block.weight * m
        return total

    def cut_count(self) -> int:
        return sum(len(b.cuts) for b in self.blocks)

    def is_empty(self) -> bool:
        return self.cut_count() == 0
