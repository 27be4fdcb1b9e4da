"""Function oracles: values, subgradients, and block-structured minorants.

Each oracle reports a block layout (weights and clip-at-zero flags) and can
emit affine cuts at any anchor; together with a CutPool this yields the
limited-memory minorants the solver projects onto.  A small composer builds
oracles for expressions (nonnegative weighted sums and maxima of convex
pieces) checked against the standard convexity composition rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .linalg import smat, svec, svec_dim, sym_eig, sym_part
from .minorant import AffineCut, CutPool, cut_from_subgradient

_SQRT2 = math.sqrt(2.0)


class DcpError(ValueError):
    """An expression tree violates the convexity composition rule."""


class ConvexFunction:
    """Base oracle: a convex function with a cut-generating minorant.

    Subclasses set `dim` and `nonnegative` and implement `value` and
    `_cuts` (the cuts of a minorant tight at the anchor).  The default
    layout is a single block of weight 1, clipped at zero when the
    function is known nonnegative.
    """

    dim: int
    nonnegative: bool = False

    def value(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def _cuts(self, x: np.ndarray) -> tuple[float, list[AffineCut]]:
        raise NotImplementedError

    def block_layout(self) -> list[tuple[float, bool]]:
        return [(1.0, self.nonnegative)]

    def cuts_at(self, x: np.ndarray) -> tuple[float, list[list[AffineCut]]]:
        """Value at x and new cuts per block, tight at x as a pool."""
        val, cuts = self._cuts(x)
        return val, [cuts]

    def make_pool(self, memory: int | None = None) -> CutPool:
        return CutPool.from_layout(self.block_layout(), memory=memory)


def soc_dist_subgrad(s: np.ndarray, t: float) -> tuple[float, np.ndarray]:
    """Distance from (s, t) to the second-order cone {||s|| <= t}, with a subgradient.

    Uses the closed-form projection: inside the cone the distance is 0 with
    subgradient 0; in the polar region (||s|| <= -t) the projection is the
    origin; otherwise the distance is (||s|| - t) / sqrt(2) and the
    subgradient is the unit residual direction.
    """
    s = np.asarray(s, dtype=float)
    t = float(t)
    ns = float(np.linalg.norm(s))
    g = np.zeros(s.shape[0] + 1)
    if ns <= t:
        return 0.0, g
    if ns <= -t:
        d = math.hypot(ns, t)
        if d > 0.0:
            g[:-1] = s / d
            g[-1] = t / d
        return d, g
    d = (ns - t) / _SQRT2
    g[:-1] = s / (ns * _SQRT2)
    g[-1] = -1.0 / _SQRT2
    return d, g


@dataclass
class SocDistanceAtom(ConvexFunction):
    """l2 distance from the x[start:stop] block to the second-order cone.

    The block is (s, t) with t the last entry.  The cone is self-dual, so
    dual_flag only records whether this models a dual-cone constraint.
    """

    dim: int
    start: int
    stop: int
    dual_flag: bool = False
    nonnegative: bool = field(default=True, init=False)

    def __post_init__(self):
        if self.stop - self.start < 2:
            raise ValueError("cone block needs at least one s entry plus t")
        if not (0 <= self.start < self.stop <= self.dim):
            raise ValueError("cone block out of range")

    def _split(self, x: np.ndarray) -> tuple[np.ndarray, float]:
        block = np.asarray(x, dtype=float)[self.start:self.stop]
        return block[:-1], float(block[-1])

    def value(self, x: np.ndarray) -> float:
        d, _ = soc_dist_subgrad(*self._split(x))
        return d

    def _cuts(self, x: np.ndarray) -> tuple[float, list[AffineCut]]:
        d, g_block = soc_dist_subgrad(*self._split(x))
        g = np.zeros(self.dim)
        g[self.start:self.stop] = g_block
        return d, [cut_from_subgradient(np.asarray(x, dtype=float), d, g)]


class AffineSymMap:
    """Affine map from symmetric matrices to symmetric matrices.

    apply(X) = const + linear(X); adjoint_rank1(v) returns linear*(v v^T),
    which is all the cut construction needs.
    """

    def __init__(self, in_dim: int, out_dim: int,
                 apply_linear: Callable[[np.ndarray], np.ndarray],
                 adjoint_rank1: Callable[[np.ndarray], np.ndarray],
                 const: np.ndarray | None = None):
        self.in_dim = in_dim
        self.out_dim = out_dim
        self._apply_linear = apply_linear
        self._adjoint_rank1 = adjoint_rank1
        self.const = None if const is None else sym_part(const)

    def apply(self, X: np.ndarray) -> np.ndarray:
        out = self._apply_linear(X)
        if self.const is not None:
            out = out + self.const
        return sym_part(out)

    def adjoint_rank1(self, v: np.ndarray) -> np.ndarray:
        return sym_part(self._adjoint_rank1(v))

    def const_quad(self, v: np.ndarray) -> float:
        if self.const is None:
            return 0.0
        return float(v @ self.const @ v)

    @classmethod
    def scaled_identity(cls, q: int, scale: float = 1.0,
                        const: np.ndarray | None = None) -> "AffineSymMap":
        """X -> const + scale * X (e.g. I - X with scale=-1, const=I)."""
        return cls(q, q,
                   apply_linear=lambda X: scale * X,
                   adjoint_rank1=lambda v: scale * np.outer(v, v),
                   const=const)

    @classmethod
    def lyapunov(cls, A: np.ndarray) -> "AffineSymMap":
        """X -> A^T X + X A; adjoint of v v^T is A (v v^T) + (v v^T) A^T."""
        A = np.asarray(A, dtype=float)
        q = A.shape[0]
        return cls(q, q,
                   apply_linear=lambda X: A.T @ X + X @ A,
                   adjoint_rank1=lambda v: A @ np.outer(v, v) + np.outer(v, v) @ A.T)


@dataclass
class MaxEigAtom(ConvexFunction):
    """lambda_max of an affine symmetric-matrix map of X, over svec coordinates.

    variant="single" emits the one cut v^T L(X) v from the top eigenvector;
    variant="diag" emits r cuts v_j^T L(X) v_j from the top-r eigenvectors,
    which stays piecewise linear for any rank.
    """

    map: AffineSymMap
    rank: int = 1
    variant: str = "single"

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError("rank must be >= 1")
        if self.variant not in ("single", "diag"):
            raise ValueError(f"unknown variant {self.variant!r}")
        self.dim = svec_dim(self.map.in_dim)
        self.nonnegative = False

    def value(self, x: np.ndarray) -> float:
        Z = self.map.apply(smat(np.asarray(x, dtype=float)))
        return float(sym_eig(Z).eigenvalues[0])

    def _cuts(self, x: np.ndarray) -> tuple[float, list[AffineCut]]:
        return maxeig_minorant(self, x)


def maxeig_minorant(atom: MaxEigAtom, x: np.ndarray) -> tuple[float, list[AffineCut]]:
    """Value and eigenvector cuts of a MaxEigAtom at x.

    Each cut w_j(y) = v_j^T L(smat(y)) v_j is affine in y, below lambda_max
    everywhere (Rayleigh quotient), and the top one is tight at x.
    Eigenvector ties break deterministically via the Jacobi sweep order.
    """
    x = np.asarray(x, dtype=float)
    Z = atom.map.apply(smat(x))
    dec = sym_eig(Z)
    value = float(dec.eigenvalues[0])
    r = 1 if atom.variant == "single" else min(atom.rank, atom.map.out_dim)
    cuts = []
    for j in range(r):
        v = dec.eigenvectors[:, j]
        coeff = svec(atom.map.adjoint_rank1(v))
        cuts.append(AffineCut(coeff, atom.map.const_quad(v)))
    return value, cuts


@dataclass
class EuclideanNorm(ConvexFunction):
    dim: int
    nonnegative: bool = field(default=True, init=False)

    def value(self, x: np.ndarray) -> float:
        return float(np.linalg.norm(np.asarray(x, dtype=float)))

    def _cuts(self, x: np.ndarray) -> tuple[float, list[AffineCut]]:
        x = np.asarray(x, dtype=float)
        v = float(np.linalg.norm(x))
        g = x / v if v > 0.0 else np.zeros(self.dim)
        return v, [cut_from_subgradient(x, v, g)]


@dataclass
class L1Norm(ConvexFunction):
    dim: int
    nonnegative: bool = field(default=True, init=False)

    def value(self, x: np.ndarray) -> float:
        return float(np.abs(np.asarray(x, dtype=float)).sum())

    def _cuts(self, x: np.ndarray) -> tuple[float, list[AffineCut]]:
        # sign(0) = 0: the zero subgradient at kinks
        x = np.asarray(x, dtype=float)
        v = float(np.abs(x).sum())
        return v, [cut_from_subgradient(x, v, np.sign(x))]


@dataclass
class LinfNorm(ConvexFunction):
    dim: int
    nonnegative: bool = field(default=True, init=False)

    def value(self, x: np.ndarray) -> float:
        return float(np.abs(np.asarray(x, dtype=float)).max())

    def _cuts(self, x: np.ndarray) -> tuple[float, list[AffineCut]]:
        x = np.asarray(x, dtype=float)
        v = float(np.abs(x).max())
        g = np.zeros(self.dim)
        if v > 0.0:
            j = int(np.argmax(np.abs(x)))  # first maximizer: deterministic
            g[j] = math.copysign(1.0, x[j])
        return v, [cut_from_subgradient(x, v, g)]


@dataclass
class AffineFunction(ConvexFunction):
    """a . x + beta; it is its own (exact) minorant."""

    coeff: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        self.coeff = np.asarray(self.coeff, dtype=float)
        self.dim = self.coeff.shape[0]
        self.nonnegative = False

    def value(self, x: np.ndarray) -> float:
        return float(self.coeff @ np.asarray(x, dtype=float)) + self.offset

    def _cuts(self, x: np.ndarray) -> tuple[float, list[AffineCut]]:
        return self.value(x), [AffineCut(self.coeff.copy(), self.offset)]


# typed curvature lattice for the composer
AFFINE, CONVEX, CONCAVE, UNKNOWN = "affine", "convex", "concave", "unknown"


@dataclass
class ExprNode:
    """Node of a convex expression tree: atom, affine leaf, weighted sum, or max."""

    kind: str
    children: tuple = ()
    weights: tuple = ()
    atom: ConvexFunction | None = None
    coeff: np.ndarray | None = None
    offset: float = 0.0

    @classmethod
    def wrap(cls, atom: ConvexFunction) -> "ExprNode":
        return cls(kind="atom", atom=atom)

    @classmethod
    def affine(cls, coeff: np.ndarray, offset: float = 0.0) -> "ExprNode":
        return cls(kind="affine", coeff=np.asarray(coeff, dtype=float), offset=float(offset))

    @classmethod
    def weighted_sum(cls, children, weights) -> "ExprNode":
        children = tuple(_as_node(c) for c in children)
        weights = tuple(float(w) for w in weights)
        if len(children) != len(weights) or not children:
            raise ValueError("need matching, nonempty children and weights")
        return cls(kind="sum", children=children, weights=weights)

    @classmethod
    def maximum(cls, children) -> "ExprNode":
        children = tuple(_as_node(c) for c in children)
        if not children:
            raise ValueError("max needs at least one child")
        return cls(kind="max", children=children)

    @property
    def dim(self) -> int:
        if self.kind == "atom":
            return self.atom.dim
        if self.kind == "affine":
            return self.coeff.shape[0]
        return self.children[0].dim

    def curvature(self) -> str:
        if self.kind == "affine":
            return AFFINE
        if self.kind == "atom":
            return CONVEX
        if self.kind == "max":
            kinds = {c.curvature() for c in self.children}
            return CONVEX if kinds <= {AFFINE, CONVEX} else UNKNOWN
        # weighted sum
        cur = AFFINE
        for w, child in zip(self.weights, self.children):
            cc = child.curvature()
            if cc == AFFINE:
                contrib = AFFINE
            elif cc in (CONVEX, CONCAVE):
                flip = {CONVEX: CONCAVE, CONCAVE: CONVEX}
                contrib = cc if w >= 0.0 else flip[cc]
            else:
                return UNKNOWN
            cur = _combine_curvature(cur, contrib)
            if cur == UNKNOWN:
                return UNKNOWN
        return cur

    def sign_nonneg(self) -> bool:
        if self.kind == "atom":
            return self.atom.nonnegative
        if self.kind == "affine":
            return False
        if self.kind == "max":
            return any(c.sign_nonneg() for c in self.children)
        return all(c.sign_nonneg() for c in self.children) and all(w >= 0.0 for w in self.weights)

    def value(self, x: np.ndarray) -> float:
        if self.kind == "atom":
            return self.atom.value(x)
        if self.kind == "affine":
            return float(self.coeff @ np.asarray(x, dtype=float)) + self.offset
        if self.kind == "max":
            return max(c.value(x) for c in self.children)
        return sum(w * c.value(x) for w, c in zip(self.weights, self.children))


def _as_node(obj) -> ExprNode:
    if isinstance(obj, ExprNode):
        return obj
    if isinstance(obj, ConvexFunction):
        return ExprNode.wrap(obj)
    raise TypeError(f"cannot treat {type(obj).__name__} as an expression node")


def _combine_curvature(a: str, b: str) -> str:
    if a == b:
        return a
    if AFFINE in (a, b):
        return a if b == AFFINE else b
    return UNKNOWN


def dcp_verify(root: ExprNode) -> list[str]:
    """Check every node against the convexity composition rule.

    Returns a list of violation messages, each naming the offending node by
    path from the root; an empty list means the tree is certified convex.
    """
    violations: list[str] = []

    def visit(node: ExprNode, path: str):
        if node.kind == "sum":
            for i, (w, child) in enumerate(zip(node.weights, node.children)):
                if w < 0.0 and child.curvature() != AFFINE:
                    violations.append(
                        f"{path}: weight {w} on non-affine child {i} "
                        "(scaling rule requires nonnegative weights)")
        if node.kind == "max":
            for i, child in enumerate(node.children):
                if child.curvature() not in (AFFINE, CONVEX):
                    violations.append(
                        f"{path}.children[{i}]: max over a {child.curvature()} child "
                        "(needs convex arguments)")
        for i, child in enumerate(node.children):
            visit(child, f"{path}.children[{i}]")

    visit(root, "root")
    if not violations and root.curvature() not in (AFFINE, CONVEX):
        violations.append(f"root: curvature {root.curvature()} is not convex")
    return violations


def _expr_layout(node: ExprNode) -> list[tuple[float, bool]]:
    """Flattened (weight, clip) block layout of a verified tree."""
    if node.kind in ("atom", "affine", "max"):
        clip = node.sign_nonneg() if node.kind != "affine" else False
        return [(1.0, clip)]
    layout: list[tuple[float, bool]] = []
    affine_folded = False
    for w, child in zip(node.weights, node.children):
        if child.curvature() == AFFINE:
            # all affine summands fold into one exact single-cut block
            if not affine_folded:
                layout.append((1.0, False))
                affine_folded = True
            continue
        layout.extend((w * cw, clip) for cw, clip in _expr_layout(child))
    return layout


def _collapse_to_cut(layout, block_cuts, z: np.ndarray) -> AffineCut:
    """Fold a multi-block minorant into one affine cut tight at z.

    Per block take the cut attaining the block value at z (the zero cut for
    a clipped block whose max is negative); the weighted sum stays a lower
    bound and inherits tightness.
    """
    total_coeff = np.zeros(np.asarray(z).shape[0])
    total_offset = 0.0
    for (w, clip), cuts in zip(layout, block_cuts):
        best = max(cuts, key=lambda c: c.value(z))
        if clip and best.value(z) < 0.0:
            continue  # the zero branch of max(. , 0) is active
        total_coeff += w * best.coeff
        total_offset += w * best.offset
    return AffineCut(total_coeff, total_offset)


def _expr_cuts(node: ExprNode, z: np.ndarray) -> tuple[float, list[list[AffineCut]]]:
    """Value at z plus fresh cuts per flattened block (matching _expr_layout)."""
    if node.kind == "atom":
        val, cuts = node.atom._cuts(z)
        return val, [cuts]
    if node.kind == "affine":
        return node.value(z), [[AffineCut(node.coeff.copy(), node.offset)]]
    if node.kind == "max":
        merged: list[AffineCut] = []
        best = -math.inf
        for child in node.children:
            val, blocks = _expr_cuts(child, z)
            best = max(best, val)
            if len(blocks) == 1:
                layout = _expr_layout(child)
                w, clip = layout[0]
                merged.extend(c.scaled(w) for c in blocks[0])
                if clip and not node.sign_nonneg():
                    merged.append(AffineCut(np.zeros(node.dim), 0.0))
            else:
                merged.append(_collapse_to_cut(_expr_layout(child), blocks, z))
        return best, [merged]
    # weighted sum: concatenate children blocks, folding affine summands
    total = 0.0
    out_blocks: list[list[AffineCut]] = []
    fold_coeff = np.zeros(node.dim)
    fold_offset = 0.0
    fold_seen = False
    fold_slot = None
    for w, child in zip(node.weights, node.children):
        val, blocks = _expr_cuts(child, z)
        total += w * val
        if child.curvature() == AFFINE:
            cut = _collapse_to_cut(_expr_layout(child), blocks, z)
            fold_coeff += w * cut.coeff
            fold_offset += w * cut.offset
            if not fold_seen:
                fold_slot = len(out_blocks)
                out_blocks.append([])
                fold_seen = True
            continue
        out_blocks.extend(blocks)
    if fold_seen:
        out_blocks[fold_slot] = [AffineCut(fold_coeff, fold_offset)]
    return total, out_blocks


class ExprOracle(ConvexFunction):
    """Adapter exposing a verified expression tree as a ConvexFunction."""

    def __init__(self, root: ExprNode):
        violations = dcp_verify(root)
        if violations:
            raise DcpError("; ".join(violations))
        self.root = root
        self.dim = root.dim
        self.nonnegative = root.sign_nonneg()

    def value(self, x: np.ndarray) -> float:
        return self.root.value(x)

    def block_layout(self) -> list[tuple[float, bool]]:
        return _expr_layout(self.root)

    def cuts_at(self, x: np.ndarray) -> tuple[float, list[list[AffineCut]]]:
        return _expr_cuts(self.root, np.asarray(x, dtype=float))

    def _cuts(self, x: np.ndarray):  # pragma: no cover - layout is multi-block
        raise NotImplementedError("use cuts_at")


def dcp_minorant(root: ExprNode, z: np.ndarray) -> CutPool:
    """One-shot minorant of a verified expression at z, as a CutPool.

    Raises DcpError naming the violating node when the tree fails the
    composition rule.  The pool is tight at z and a lower bound everywhere;
    nonnegative atoms keep their clip-at-zero flags.
    """
    oracle = ExprOracle(root)
    pool = oracle.make_pool(memory=None)
    value, blocks = oracle.cuts_at(np.asarray(z, dtype=float))
    for b, cuts in enumerate(blocks):
        for cut in cuts:
            pool.insert(b, cut)
    pool.tight_value = value
    return pool
