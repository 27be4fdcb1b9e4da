import numpy as np
import pytest

from pmm.linalg import (
    EigDecomposition,
    NotSpdError,
    NumericalError,
    smat,
    spd_solve,
    svec,
    svec_dim,
    sym_eig,
)


def test_sym_eig_identity():
    dec = sym_eig(np.eye(3))
    assert np.allclose(dec.eigenvalues, [1.0, 1.0, 1.0])


def test_sym_eig_diagonal():
    dec = sym_eig(np.diag([3.0, 1.0]))
    assert np.allclose(dec.eigenvalues, [3.0, 1.0])
    # eigenvectors are the coordinate axes up to sign
    assert np.allclose(np.abs(dec.eigenvectors), np.eye(2))


def test_sym_eig_exchange_matrix():
    dec = sym_eig(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert np.allclose(dec.eigenvalues, [1.0, -1.0])


def test_sym_eig_rejects_nonsymmetric():
    with pytest.raises(ValueError):
        sym_eig(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_sym_eig_rejects_nonfinite():
    with pytest.raises(ValueError):
        sym_eig(np.array([[np.nan, 0.0], [0.0, 1.0]]))


def test_sym_eig_sweep_cap_signals_failure():
    S = np.array([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(NumericalError):
        sym_eig(S, max_sweeps=0)


def test_sym_eig_deterministic():
    rng = np.random.default_rng(5)
    S = rng.standard_normal((7, 7))
    S = S + S.T
    a = sym_eig(S)
    b = sym_eig(S)
    assert np.array_equal(a.eigenvalues, b.eigenvalues)
    assert np.array_equal(a.eigenvectors, b.eigenvectors)


def test_sym_eig_random_invariants():
    rng = np.random.default_rng(42)
    count = 0
    while count < 100:
        n = int(rng.integers(1, 21))
        S = rng.standard_normal((n, n))
        S = S + S.T
        dec = sym_eig(S)
        V, lam = dec.eigenvectors, dec.eigenvalues
        normS = np.linalg.norm(S)
        assert np.linalg.norm(S @ V - V * lam) <= 1e-10 * (1.0 + normS)
        assert np.linalg.norm(V.T @ V - np.eye(n)) <= 1e-10
        assert np.all(np.diff(lam) <= 1e-12)
        count += 1


def test_svec_definition():
    a, b, c = 1.7, -0.3, 2.5
    S = np.array([[a, c], [c, b]])
    assert np.allclose(svec(S), [a, np.sqrt(2.0) * c, b])


def test_svec_identity_norm():
    v = svec(np.eye(2))
    assert np.array_equal(v, [1.0, 0.0, 1.0])
    assert np.isclose(np.linalg.norm(v), np.sqrt(2.0))


def test_svec_inner_product_matches_trace():
    rng = np.random.default_rng(3)
    for _ in range(20):
        S = rng.standard_normal((5, 5))
        S = S + S.T
        T = rng.standard_normal((5, 5))
        T = T + T.T
        ip = float(svec(S) @ svec(T))
        tr = float(np.trace(S @ T))
        assert abs(ip - tr) <= 1e-12 * (1.0 + abs(tr))


def test_svec_smat_round_trip():
    # sqrt(2) scaling costs at most one rounding each way; 1 ulp is machine-exact
    rng = np.random.default_rng(11)
    for _ in range(50):
        n = int(rng.integers(1, 12))
        S = rng.standard_normal((n, n))
        S = S + S.T
        back = smat(svec(S))
        np.testing.assert_array_max_ulp(back, S, maxulp=1)
        assert np.array_equal(back, back.T)


def test_smat_rejects_bad_length():
    with pytest.raises(ValueError):
        smat(np.zeros(4))


def test_svec_dim():
    assert svec_dim(20) == 210


def test_spd_solve_identity():
    rhs = np.array([3.0, -1.0, 2.0])
    assert np.allclose(spd_solve(np.eye(3), rhs), rhs)


def test_spd_solve_diagonal():
    x = spd_solve(np.diag([2.0, 4.0]), np.array([2.0, 8.0]))
    assert np.allclose(x, [1.0, 2.0])


def test_spd_solve_random_residual():
    rng = np.random.default_rng(8)
    for _ in range(20):
        B = rng.standard_normal((8, 8))
        M = B @ B.T + 8.0 * np.eye(8)
        rhs = rng.standard_normal(8)
        x = spd_solve(M, rhs)
        assert np.linalg.norm(M @ x - rhs) <= 1e-10 * (1.0 + np.linalg.norm(rhs))


def test_spd_solve_rejects_indefinite():
    with pytest.raises(NotSpdError):
        spd_solve(np.array([[1.0, 0.0], [0.0, -1.0]]), np.array([1.0, 1.0]))


def test_eig_decomposition_dim():
    dec = EigDecomposition(np.array([2.0]), np.array([[1.0]]))
    assert dec.dim == 1
