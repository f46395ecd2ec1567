import numpy as np
import pytest
import scipy.io

from ksbcfd.linalg import (
    SingularMatrixError,
    bicgstab,
    cg,
    dense_solve,
    from_triplets,
    matvec,
    write_matrix_market,
)


def identity(n):
    return from_triplets(n, n, [(i, i, 1.0) for i in range(n)])


def random_spd(n, seed):
    rng = np.random.default_rng(seed)
    q = rng.standard_normal((n, n))
    a = q @ q.T + n * np.eye(n)
    entries = [(i, j, a[i, j]) for i in range(n) for j in range(n)]
    return from_triplets(n, n, entries), a


def laplacian_1d(n):
    entries = []
    for i in range(n):
        entries.append((i, i, 2.0))
        if i > 0:
            entries.append((i, i - 1, -1.0))
        if i < n - 1:
            entries.append((i, i + 1, -1.0))
    return from_triplets(n, n, entries)


class TestConstruction:
    def test_identity_matvec(self):
        a = identity(2)
        assert np.array_equal(matvec(a, np.array([3.0, -4.0])), [3.0, -4.0])

    def test_duplicates_summed(self):
        a = from_triplets(2, 2, [(0, 0, 1.0), (0, 0, 2.0), (1, 1, 5.0)])
        assert a.nnz == 2
        assert a.values[0] == 3.0

    def test_empty_is_zero_matrix(self):
        a = from_triplets(3, 3, [])
        assert np.array_equal(matvec(a, np.ones(3)), np.zeros(3))

    def test_out_of_bounds_rejected(self):
        with pytest.raises(ValueError):
            from_triplets(2, 2, [(2, 0, 1.0)])
        with pytest.raises(ValueError):
            from_triplets(2, 2, [(0, -1, 1.0)])

    def test_csr_invariants(self):
        a = from_triplets(3, 4, [(2, 3, 1.0), (2, 0, 2.0), (0, 1, 3.0)])
        assert np.all(np.diff(a.row_offsets) >= 0)
        for i in range(a.n_rows):
            cols = a.col_indices[a.row_offsets[i]:a.row_offsets[i + 1]]
            assert np.all(np.diff(cols) > 0)


class TestMatvec:
    def test_diagonal_scaling(self):
        a = from_triplets(3, 3, [(i, i, float(i + 1)) for i in range(3)])
        assert np.array_equal(matvec(a, np.array([1.0, 1.0, 1.0])), [1.0, 2.0, 3.0])

    def test_laplacian_row_hand_sum(self):
        a = laplacian_1d(5)
        x = np.array([1.0, 4.0, 9.0, 16.0, 25.0])
        y = matvec(a, x)
        assert y[2] == -4.0 + 2.0 * 9.0 - 16.0  # hand evaluation of row 2

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            matvec(identity(3), np.ones(4))


class TestCG:
    def test_identity_single_iteration(self):
        b = np.array([1.0, -2.0, 3.0])
        x, rep = cg(identity(3), b)
        assert rep.converged and rep.iterations <= 1
        assert np.allclose(x, b, rtol=0, atol=1e-15)

    def test_zero_rhs(self):
        x, rep = cg(laplacian_1d(4), np.zeros(4))
        assert rep.converged and rep.iterations == 0
        assert np.array_equal(x, np.zeros(4))
        assert rep.final_relative_residual == 0.0

    def test_matches_dense_oracle(self):
        a, ad = random_spd(30, 7)
        b = np.random.default_rng(8).standard_normal(30)
        x, rep = cg(a, b, tol=1e-13)
        assert rep.converged
        assert np.max(np.abs(x - dense_solve(ad, b))) <= 1e-10

    def test_report_matches_recomputed_residual(self):
        a, _ = random_spd(25, 12)
        b = np.random.default_rng(13).standard_normal(25)
        x, rep = cg(a, b)
        recomputed = np.linalg.norm(b - matvec(a, x)) / np.linalg.norm(b)
        assert rep.converged
        assert abs(recomputed - rep.final_relative_residual) <= 1e-12

    def test_breakdown_reported_not_raised(self):
        # indefinite system: zero curvature direction possible
        a = from_triplets(2, 2, [(0, 0, 1.0), (1, 1, -1.0)])
        x, rep = cg(a, np.array([0.0, 1.0]), max_iter=50)
        assert not rep.converged


class TestBiCGStab:
    def test_identity(self):
        b = np.array([2.0, 0.5])
        x, rep = bicgstab(identity(2), b)
        assert rep.converged
        assert np.allclose(x, b, rtol=0, atol=1e-14)

    def test_nonsymmetric_vs_dense(self):
        rng = np.random.default_rng(9)
        n = 40
        ad = 5 * np.eye(n) + 0.5 * rng.standard_normal((n, n))
        a = from_triplets(n, n, [(i, j, ad[i, j]) for i in range(n) for j in range(n)])
        b = rng.standard_normal(n)
        x, rep = bicgstab(a, b, tol=1e-13)
        assert rep.converged
        assert np.max(np.abs(x - dense_solve(ad, b))) <= 1e-10
        recomputed = np.linalg.norm(b - matvec(a, x)) / np.linalg.norm(b)
        assert abs(recomputed - rep.final_relative_residual) <= 1e-12

    def test_singular_row_reports_failure(self):
        a = from_triplets(3, 3, [(0, 0, 1.0), (1, 1, 1.0)])  # row 2 all zero
        x, rep = bicgstab(a, np.array([1.0, 1.0, 1.0]), max_iter=100)
        assert not rep.converged
        assert rep.final_relative_residual >= 0.0

    def test_zero_rhs(self):
        x, rep = bicgstab(laplacian_1d(6), np.zeros(6))
        assert rep.converged and rep.iterations == 0

    def test_agrees_with_cg_on_spd(self):
        for n, seed in ((50, 1), (200, 2), (400, 3)):
            a, _ = random_spd(n, seed)
            b = np.random.default_rng(seed + 100).standard_normal(n)
            x1, r1 = cg(a, b, tol=1e-12)
            x2, r2 = bicgstab(a, b, tol=1e-12)
            assert r1.converged and r2.converged
            assert np.max(np.abs(x1 - x2)) <= 1e-8

    def test_bit_deterministic(self):
        a, _ = random_spd(60, 21)
        b = np.random.default_rng(22).standard_normal(60)
        x1, _ = bicgstab(a, b)
        x2, _ = bicgstab(a, b)
        assert np.array_equal(x1, x2)
        y1, _ = cg(a, b)
        y2, _ = cg(a, b)
        assert np.array_equal(y1, y2)


class TestDenseSolve:
    def test_identity(self):
        b = np.array([4.0, 5.0])
        assert np.array_equal(dense_solve(np.eye(2), b), b)

    def test_two_by_two_hand_case(self):
        a = np.array([[2.0, 1.0], [1.0, 3.0]])
        x = dense_solve(a, np.array([5.0, 10.0]))
        assert np.allclose(x, [1.0, 3.0], rtol=1e-14)

    def test_cross_check_with_cg(self):
        a, ad = random_spd(20, 31)
        b = np.random.default_rng(32).standard_normal(20)
        x_cg, rep = cg(a, b, tol=1e-13)
        assert rep.converged
        assert np.max(np.abs(dense_solve(ad, b) - x_cg)) <= 1e-10

    def test_singular_raises(self):
        with pytest.raises(SingularMatrixError):
            dense_solve(np.array([[1.0, 2.0], [2.0, 4.0]]), np.array([1.0, 1.0]))


def test_matrix_market_export(tmp_path):
    a = from_triplets(3, 3, [(0, 0, 1.5), (2, 1, -2.0), (1, 2, 0.25)])
    path = tmp_path / "a.mtx"
    write_matrix_market(a, path)
    loaded = scipy.io.mmread(path).toarray()
    assert np.array_equal(loaded, a.to_dense())
