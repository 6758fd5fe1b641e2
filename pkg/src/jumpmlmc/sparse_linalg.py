"""Minimal sparse kernel for the FEM: CSR storage, products, solves.

Storage and factorizations are delegated to scipy.sparse; the module owns
the contracts (duplicate-summing triplet assembly, canonical sorted CSR,
residual-checked solves) and the solver policy.  Systems here are small and
nonsymmetric, so the default is a direct sparse LU with an optional BiCGStab
path selectable by configuration.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = ["SparseMatrix", "SolveError", "from_triplets", "spmv", "solve", "factorize"]

RESIDUAL_RTOL = 1e-10


class SolveError(RuntimeError):
    """Linear solve failed; carries the achieved residual."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class SparseMatrix:
    """Square or rectangular CSR matrix with sorted, unique column indices."""

    csr: sp.csr_matrix

    @property
    def shape(self) -> tuple[int, int]:
        return self.csr.shape

    @property
    def nnz(self) -> int:
        return self.csr.nnz

    def toarray(self) -> np.ndarray:
        return self.csr.toarray()

    def transpose(self) -> "SparseMatrix":
        return SparseMatrix(self.csr.T.tocsr())


def from_triplets(n: int, triplets, n_cols: int | None = None) -> SparseMatrix:
    """Build a CSR matrix from (i, j, value) triplets; duplicates are summed."""
    if n_cols is None:
        n_cols = n
    if isinstance(triplets, tuple) and len(triplets) == 3:
        rows, cols, vals = triplets
    else:
        trip = list(triplets)
        if trip:
            rows, cols, vals = (np.array(x) for x in zip(*trip))
        else:
            rows = cols = np.empty(0, dtype=np.intp)
            vals = np.empty(0)
    rows = np.asarray(rows, dtype=np.intp)
    cols = np.asarray(cols, dtype=np.intp)
    vals = np.asarray(vals, dtype=float)
    if rows.size and (rows.min() < 0 or rows.max() >= n or cols.min() < 0 or cols.max() >= n_cols):
        raise IndexError("triplet index out of range")
    mat = sp.coo_matrix((vals, (rows, cols)), shape=(n, n_cols)).tocsr()
    mat.sum_duplicates()
    mat.sort_indices()
    return SparseMatrix(mat)


def spmv(a: SparseMatrix, x: np.ndarray) -> np.ndarray:
    """Matrix-vector product y = A x."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] != a.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape} @ {x.shape}")
    return a.csr @ x


class Factorization:
    """Reusable solver for one matrix (LU by default, BiCGStab optional)."""

    def __init__(self, a: SparseMatrix, method: str = "lu"):
        if a.shape[0] != a.shape[1]:
            raise ValueError("matrix must be square")
        if method not in ("lu", "bicgstab"):
            raise ValueError(f"unknown solver method {method!r}")
        self.a = a
        self.method = method
        self._lu = None
        if method == "lu":
            try:
                self._lu = spla.splu(a.csr.tocsc())
            except RuntimeError as exc:  # singular factorization
                raise SolveError(f"LU factorization failed: {exc}") from exc

    def solve(self, rhs: np.ndarray, check_residual: bool = True) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape[0] != self.a.shape[0]:
            raise ValueError("right-hand side has wrong length")
        if self._lu is not None:
            x = self._lu.solve(rhs)
        else:
            n = self.a.shape[0]
            x, info = spla.bicgstab(self.a.csr, rhs, rtol=RESIDUAL_RTOL / 10.0,
                                    atol=0.0, maxiter=10 * n)
            if info != 0:
                res = float(np.linalg.norm(self.a.csr @ x - rhs))
                raise SolveError(f"BiCGStab did not converge (info={info})", residual=res)
        if check_residual:
            rhs_norm = float(np.linalg.norm(rhs))
            res = float(np.linalg.norm(self.a.csr @ x - rhs))
            if res > RESIDUAL_RTOL * max(rhs_norm, 1e-300):
                raise SolveError(
                    f"solve residual {res:.3e} exceeds {RESIDUAL_RTOL:.0e} * |rhs|",
                    residual=res,
                )
        return x


def factorize(a: SparseMatrix, method: str = "lu") -> Factorization:
    return Factorization(a, method=method)


def solve(a: SparseMatrix, rhs: np.ndarray, method: str = "lu") -> np.ndarray:
    """Solve A x = rhs with residual norm below 1e-10 * |rhs|."""
    return factorize(a, method=method).solve(rhs)
