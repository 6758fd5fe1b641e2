import numpy as np
import pytest

from jumpmlmc.sparse_linalg import SolveError, factorize, from_triplets, solve, spmv


def random_dd_system(n=50, seed=0):
    """Random diagonally dominant nonsymmetric matrix as triplets + dense."""
    rng = np.random.default_rng(seed)
    dense = np.zeros((n, n))
    triplets = []
    for i in range(n):
        cols = rng.choice(n, size=6, replace=False)
        for j in cols:
            v = rng.standard_normal()
            triplets.append((i, int(j), v))
            dense[i, j] += v
    for i in range(n):
        boost = np.abs(dense[i]).sum() + 1.0
        triplets.append((i, i, boost))
        dense[i, i] += boost
    return triplets, dense


class TestFromTriplets:
    def test_duplicates_summed(self):
        a = from_triplets(1, [(0, 0, 1.0), (0, 0, 2.0)])
        assert a.nnz == 1
        assert a.toarray()[0, 0] == 3.0

    def test_empty_matrix_spmv_zero(self):
        a = from_triplets(4, [])
        assert np.all(spmv(a, np.ones(4)) == 0.0)

    def test_dense_reconstruction_matches(self):
        triplets, dense = random_dd_system()
        a = from_triplets(50, triplets)
        np.testing.assert_allclose(a.toarray(), dense, atol=0.0)

    def test_sorted_unique_columns(self):
        a = from_triplets(3, [(0, 2, 1.0), (0, 0, 1.0), (0, 2, 1.0)])
        row = a.csr.indices[a.csr.indptr[0]:a.csr.indptr[1]]
        assert list(row) == sorted(set(row))

    def test_out_of_range_rejected(self):
        with pytest.raises(IndexError):
            from_triplets(2, [(0, 2, 1.0)])
        with pytest.raises(IndexError):
            from_triplets(2, [(-1, 0, 1.0)])


class TestSpmv:
    def test_identity(self):
        eye = from_triplets(5, [(i, i, 1.0) for i in range(5)])
        x = np.arange(5.0)
        assert np.array_equal(spmv(eye, x), x)

    def test_zero_vector(self):
        triplets, _ = random_dd_system()
        a = from_triplets(50, triplets)
        assert np.all(spmv(a, np.zeros(50)) == 0.0)

    def test_matches_dense_product(self):
        triplets, dense = random_dd_system(seed=3)
        a = from_triplets(50, triplets)
        x = np.random.default_rng(1).standard_normal(50)
        expect = dense @ x
        got = spmv(a, x)
        assert np.linalg.norm(got - expect) <= 1e-13 * np.linalg.norm(expect)

    def test_dimension_mismatch(self):
        a = from_triplets(3, [(0, 0, 1.0)])
        with pytest.raises(ValueError):
            spmv(a, np.ones(4))


class TestSolve:
    def test_diagonal(self):
        a = from_triplets(1, [(0, 0, 2.0)])
        assert solve(a, np.array([4.0])) == pytest.approx([2.0])

    def test_identity(self):
        eye = from_triplets(6, [(i, i, 1.0) for i in range(6)])
        rhs = np.random.default_rng(0).standard_normal(6)
        np.testing.assert_allclose(solve(eye, rhs), rhs, atol=0.0)

    @pytest.mark.parametrize("method", ["lu", "bicgstab"])
    def test_matches_dense_lu_oracle(self, method):
        triplets, dense = random_dd_system(seed=7)
        a = from_triplets(50, triplets)
        rhs = np.random.default_rng(2).standard_normal(50)
        expect = np.linalg.solve(dense, rhs)
        got = solve(a, rhs, method=method)
        assert np.linalg.norm(got - expect) <= 1e-9 * np.linalg.norm(expect)

    def test_residual_contract(self):
        triplets, _ = random_dd_system(seed=9)
        a = from_triplets(50, triplets)
        rhs = np.random.default_rng(3).standard_normal(50)
        x = solve(a, rhs)
        res = np.linalg.norm(a.csr @ x - rhs)
        assert res <= 1e-10 * np.linalg.norm(rhs)

    def test_singular_matrix_reported(self):
        a = from_triplets(2, [(0, 0, 1.0)])  # second row empty
        with pytest.raises(SolveError):
            solve(a, np.ones(2))

    def test_factorization_reuse(self):
        triplets, dense = random_dd_system(seed=11)
        a = from_triplets(50, triplets)
        fact = factorize(a)
        for seed in range(3):
            rhs = np.random.default_rng(seed).standard_normal(50)
            np.testing.assert_allclose(fact.solve(rhs), np.linalg.solve(dense, rhs),
                                       rtol=1e-9, atol=1e-12)
