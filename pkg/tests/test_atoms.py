import math

import numpy as np
import pytest

from pmm.atoms import (
    AffineFunction,
    AffineSymMap,
    DcpError,
    EuclideanNorm,
    ExprNode,
    ExprOracle,
    L1Norm,
    LinfNorm,
    MaxEigAtom,
    SocDistanceAtom,
    dcp_minorant,
    dcp_verify,
    maxeig_minorant,
    soc_dist_subgrad,
)
from pmm.linalg import svec, sym_eig


def test_soc_dist_inside_cone():
    d, g = soc_dist_subgrad(np.array([3.0, 4.0]), 5.0)
    assert d == 0.0
    assert np.all(g == 0.0)


def test_soc_dist_polar_branch_matches_sampled_cone_minimum():
    # projection is the origin; oracle: brute-force distance over sampled cone points
    point = np.array([3.0, 4.0, -6.0])
    d, g = soc_dist_subgrad(point[:2], point[2])
    assert np.isclose(d, math.sqrt(61.0))
    rng = np.random.default_rng(0)
    best = np.inf
    for _ in range(20000):
        s = rng.standard_normal(2) * 5.0
        t = np.linalg.norm(s) + abs(rng.standard_normal()) * 5.0
        best = min(best, np.linalg.norm(point - np.concatenate([s, [t]])))
    assert best >= d - 1e-3
    assert np.isclose(np.linalg.norm(g), 1.0)


def test_soc_dist_shell_branch_closed_form_projection():
    d, g = soc_dist_subgrad(np.array([3.0, 4.0]), 0.0)
    assert np.isclose(d, 5.0 / math.sqrt(2.0))
    proj = np.array([1.5, 2.0, 2.5])
    assert np.isclose(np.linalg.norm(np.array([3.0, 4.0, 0.0]) - proj), d)
    # subgradient is the unit residual direction
    resid = np.array([3.0, 4.0, 0.0]) - proj
    assert np.allclose(g, resid / np.linalg.norm(resid))


def test_soc_dist_boundary_gives_zero_subgradient():
    d, g = soc_dist_subgrad(np.array([3.0, 4.0]), 5.0)
    assert d == 0.0 and np.all(g == 0.0)


def test_soc_dist_origin():
    d, g = soc_dist_subgrad(np.zeros(3), 0.0)
    assert d == 0.0 and np.all(g == 0.0)


def _subgradient_inequality(atom, rng, pairs=1000, scale=3.0):
    for _ in range(pairs):
        x = rng.standard_normal(atom.dim) * scale
        y = rng.standard_normal(atom.dim) * scale
        fx, blocks = atom.cuts_at(x)
        pool = atom.make_pool()
        for b, cuts in enumerate(blocks):
            for cut in cuts:
                pool.insert(b, cut)
        # tight at the anchor, lower bound at y
        assert abs(pool.eval(x) - fx) <= 1e-9 * (1.0 + abs(fx))
        fy = atom.value(y)
        assert pool.eval(y) <= fy + 1e-9 * (1.0 + abs(fy))


@pytest.mark.parametrize("atom", [
    EuclideanNorm(dim=4),
    L1Norm(dim=4),
    LinfNorm(dim=4),
    SocDistanceAtom(dim=5, start=1, stop=4),
    AffineFunction(np.array([1.0, -2.0, 0.5, 0.0]), 0.3),
])
def test_atom_minorant_tight_and_lower_bound(atom):
    _subgradient_inequality(atom, np.random.default_rng(12))


def test_maxeig_identity_diag():
    atom = MaxEigAtom(AffineSymMap.scaled_identity(2), rank=2, variant="diag")
    x = svec(np.diag([1.0, 2.0]))
    value, cuts = maxeig_minorant(atom, x)
    assert np.isclose(value, 2.0)
    vals = sorted(c.value(x) for c in cuts)
    assert np.allclose(vals, [1.0, 2.0])
    assert np.isclose(max(c.value(x) for c in cuts), value)


def test_maxeig_repeated_eigenvalue_still_tight():
    atom = MaxEigAtom(AffineSymMap.scaled_identity(3), rank=1, variant="single")
    x = svec(np.eye(3))
    value, cuts = maxeig_minorant(atom, x)
    assert np.isclose(value, 1.0)
    assert np.isclose(cuts[0].value(x), 1.0)


def test_maxeig_lyapunov_cuts_lower_bound_everywhere():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((3, 3))
    atom = MaxEigAtom(AffineSymMap.lyapunov(A), rank=2, variant="diag")
    X = rng.standard_normal((3, 3))
    X = X + X.T
    x = svec(X)
    value, cuts = maxeig_minorant(atom, x)
    # oracle: eigensolver on the mapped matrix
    Z = A.T @ X + X @ A
    assert np.isclose(value, sym_eig(0.5 * (Z + Z.T)).eigenvalues[0])
    assert np.isclose(max(c.value(x) for c in cuts), value)
    for _ in range(200):
        Y = rng.standard_normal((3, 3))
        Y = Y + Y.T
        y = svec(Y)
        fy = atom.value(y)
        for cut in cuts:
            assert cut.value(y) <= fy + 1e-9 * (1.0 + abs(fy))


def test_maxeig_affine_const_map():
    # I - X at X = diag(3, 0): top eigenvalue of diag(-2, 1) is 1
    amap = AffineSymMap.scaled_identity(2, scale=-1.0, const=np.eye(2))
    atom = MaxEigAtom(amap, rank=2, variant="diag")
    x = svec(np.diag([3.0, 0.0]))
    value, cuts = maxeig_minorant(atom, x)
    assert np.isclose(value, 1.0)
    assert np.isclose(max(c.value(x) for c in cuts), 1.0)


def test_affine_sym_map_adjoint_identity():
    # <L(X), v v^T> == <X, L*(v v^T)> for the Lyapunov map
    rng = np.random.default_rng(9)
    A = rng.standard_normal((4, 4))
    amap = AffineSymMap.lyapunov(A)
    for _ in range(50):
        X = rng.standard_normal((4, 4))
        X = X + X.T
        v = rng.standard_normal(4)
        lhs = float(v @ (A.T @ X + X @ A) @ v)
        rhs = float(svec(amap.adjoint_rank1(v)) @ svec(X))
        assert abs(lhs - rhs) <= 1e-10 * (1.0 + abs(lhs))


def test_dcp_affine_leaf_is_exact():
    node = ExprNode.affine(np.array([2.0, -1.0]), 0.5)
    pool = dcp_minorant(node, np.array([1.0, 1.0]))
    assert pool.cut_count() == 1
    for x in np.random.default_rng(1).standard_normal((50, 2)):
        assert np.isclose(pool.eval(x), node.value(x))


def test_dcp_max_of_coordinates():
    node = ExprNode.maximum([
        ExprNode.affine(np.array([1.0, 0.0])),
        ExprNode.affine(np.array([0.0, 1.0])),
    ])
    z = np.array([1.0, 0.0])
    pool = dcp_minorant(node, z)
    assert pool.tight_value == 1.0
    assert pool.eval(z) == 1.0
    coeffs = sorted(tuple(c.coeff) for b in pool.blocks for c in b.cuts)
    assert coeffs == [(0.0, 1.0), (1.0, 0.0)]


def test_dcp_composite_tight_and_lower_bound():
    # 2 * soc_dist + max-eig term over packed 2x2 symmetric coordinates
    dim = 3
    soc = SocDistanceAtom(dim=dim, start=0, stop=3)
    meig = MaxEigAtom(AffineSymMap.scaled_identity(2), rank=2, variant="diag")
    root = ExprNode.weighted_sum([soc, meig], [2.0, 1.0])
    rng = np.random.default_rng(17)
    oracle = ExprOracle(root)
    for _ in range(20):
        z = rng.standard_normal(dim) * 2.0
        pool = dcp_minorant(root, z)
        fz = oracle.value(z)
        assert abs(pool.eval(z) - fz) <= 1e-9 * (1.0 + abs(fz))
        for _ in range(50):
            y = rng.standard_normal(dim) * 4.0
            fy = oracle.value(y)
            assert pool.eval(y) <= fy + 1e-9 * (1.0 + abs(fy))


def test_dcp_sum_folds_affine_children():
    root = ExprNode.weighted_sum(
        [L1Norm(dim=2), ExprNode.affine(np.array([1.0, 0.0]), 1.0),
         ExprNode.affine(np.array([0.0, 2.0]), -0.5)],
        [1.0, 1.0, 3.0])
    oracle = ExprOracle(root)
    assert len(oracle.block_layout()) == 2
    z = np.array([0.5, -1.5])
    pool = dcp_minorant(root, z)
    assert abs(pool.eval(z) - oracle.value(z)) <= 1e-12


def test_dcp_max_over_sum_child_collapses():
    inner = ExprNode.weighted_sum([L1Norm(dim=2), EuclideanNorm(dim=2)], [1.0, 1.0])
    root = ExprNode.maximum([inner, ExprNode.affine(np.array([5.0, 0.0]))])
    oracle = ExprOracle(root)
    rng = np.random.default_rng(4)
    z = np.array([1.0, -2.0])
    pool = dcp_minorant(root, z)
    fz = oracle.value(z)
    assert abs(pool.eval(z) - fz) <= 1e-9 * (1.0 + abs(fz))
    for _ in range(500):
        y = rng.standard_normal(2) * 5.0
        fy = oracle.value(y)
        assert pool.eval(y) <= fy + 1e-9 * (1.0 + abs(fy))


def test_dcp_verify_accepts_max_of_affines():
    node = ExprNode.maximum([ExprNode.affine(np.array([1.0])), ExprNode.affine(np.array([-1.0]))])
    assert dcp_verify(node) == []


def test_dcp_verify_rejects_negative_weight():
    node = ExprNode.weighted_sum([L1Norm(dim=2)], [-1.0])
    violations = dcp_verify(node)
    assert violations and "nonnegative" in violations[0]


def test_dcp_verify_rejects_max_of_concave():
    concave = ExprNode.weighted_sum([L1Norm(dim=2)], [-1.0])
    node = ExprNode.maximum([concave])
    violations = dcp_verify(node)
    assert any("concave" in v for v in violations)


def test_dcp_minorant_raises_on_violation():
    concave = ExprNode.weighted_sum([L1Norm(dim=2)], [-1.0])
    with pytest.raises(DcpError):
        dcp_minorant(ExprNode.maximum([concave]), np.zeros(2))


def test_negative_weight_on_affine_child_is_fine():
    node = ExprNode.weighted_sum(
        [ExprNode.affine(np.array([1.0, 0.0])), L1Norm(dim=2)], [-2.0, 1.0])
    assert dcp_verify(node) == []


def test_soc_atom_span_validation():
    with pytest.raises(ValueError):
        SocDistanceAtom(dim=5, start=2, stop=3)
