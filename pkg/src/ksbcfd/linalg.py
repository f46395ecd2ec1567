"""Minimal sparse linear algebra for the per-step systems.

CSR matrices (storage and matvec delegate to scipy.sparse behind this
module's interface), Conjugate Gradient for the symmetric positive definite
concentration system, BiCGStab for the nonsymmetric density systems, Jacobi
preconditioning, and a dense partial-pivot solver used as an independent
oracle in the tests.

All solves are single-threaded with a fixed arithmetic order, so identical
inputs give bit-identical outputs.  Reported residuals are always recomputed
from the returned iterate (``|b - A x| / |b|``), never taken from the
recursive residual of the iteration.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

__all__ = [
    "SparseMatrix",
    "SolveReport",
    "SingularMatrixError",
    "from_triplets",
    "from_scipy_csr",
    "matvec",
    "cg",
    "bicgstab",
    "dense_solve",
    "write_matrix_market",
]

# Denominators smaller than this (relative to the surrounding scale) count as
# algorithmic breakdown.
_BREAKDOWN = 1e-300


class SingularMatrixError(ValueError):
    """Raised by dense_solve when a pivot falls below the tolerance."""


@dataclass(frozen=True)
class SolveReport:
    converged: bool
    iterations: int
    final_relative_residual: float


@dataclass(frozen=True)
class SparseMatrix:
    """CSR matrix: nondecreasing offsets, sorted unique columns per row."""

    n_rows: int
    n_cols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray
    _csr: sp.csr_matrix = field(repr=False, compare=False)

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    def diagonal(self) -> np.ndarray:
        return self._csr.diagonal()

    def to_dense(self) -> np.ndarray:
        return self._csr.toarray()

    def transpose(self) -> "SparseMatrix":
        return from_scipy_csr(self._csr.transpose().tocsr())


def from_scipy_csr(csr: sp.csr_matrix) -> SparseMatrix:
    """Wrap a scipy CSR matrix, canonicalizing it first."""
    csr = csr.tocsr()
    csr.sum_duplicates()
    csr.sort_indices()
    if not np.all(np.isfinite(csr.data)):
        raise ValueError("matrix entries must be finite")
    return SparseMatrix(
        n_rows=csr.shape[0],
        n_cols=csr.shape[1],
        row_offsets=csr.indptr.copy(),
        col_indices=csr.indices.copy(),
        values=csr.data.copy(),
        _csr=csr,
    )


def from_triplets(n_rows: int, n_cols: int, entries) -> SparseMatrix:
    """Build a CSR matrix from (row, col, value) triplets; duplicates sum."""
    entries = list(entries)
    if entries:
        rows = np.asarray([e[0] for e in entries], dtype=np.int64)
        cols = np.asarray([e[1] for e in entries], dtype=np.int64)
        vals = np.asarray([e[2] for e in entries], dtype=np.float64)
    else:
        rows = np.zeros(0, dtype=np.int64)
        cols = np.zeros(0, dtype=np.int64)
        vals = np.zeros(0, dtype=np.float64)
    if rows.size and (rows.min() < 0 or rows.max() >= n_rows or cols.min() < 0 or cols.max() >= n_cols):
        raise ValueError("triplet index out of bounds")
    coo = sp.coo_matrix((vals, (rows, cols)), shape=(n_rows, n_cols))
    return from_scipy_csr(coo.tocsr())


def coo_arrays_to_matrix(n_rows, n_cols, rows, cols, vals) -> SparseMatrix:
    """Vectorized from_triplets for assembly code (arrays, not tuples)."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=np.float64)
    if rows.size and (rows.min() < 0 or rows.max() >= n_rows or cols.min() < 0 or cols.max() >= n_cols):
        raise ValueError("triplet index out of bounds")
    return from_scipy_csr(sp.coo_matrix((vals, (rows, cols)), shape=(n_rows, n_cols)).tocsr())


def matvec(a: SparseMatrix, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (a.n_cols,):
        raise ValueError(f"vector length {x.shape} does not match {a.n_cols} columns")
    return a._csr @ x


def _jacobi_inverse(a: SparseMatrix) -> np.ndarray:
    d = a.diagonal().copy()
    small = np.abs(d) < _BREAKDOWN
    d[small] = 1.0  # fall back to identity on (near-)zero diagonal entries
    return 1.0 / d


def _true_relative_residual(a: SparseMatrix, b: np.ndarray, x: np.ndarray, b_norm: float) -> float:
    return float(np.linalg.norm(b - a._csr @ x) / b_norm)


def cg(a: SparseMatrix, b: np.ndarray, tol: float = 1e-12, max_iter: int | None = None,
       precond: str = "jacobi", x0: np.ndarray | None = None) -> tuple[np.ndarray, SolveReport]:
    """Preconditioned Conjugate Gradient for SPD systems.

    The caller asserts symmetry.  Zero-curvature breakdown is reported as
    non-convergence.  Convergence means the recomputed relative residual
    ``|b - A x|_2 / |b|_2`` is at or below ``tol``.  ``x0`` warm-starts the
    iteration (time steppers pass the previous level).
    """
    b = np.asarray(b, dtype=np.float64)
    _check_square(a, b)
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    n = a.n_rows
    if max_iter is None:
        max_iter = 10 * n

    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return np.zeros(n), SolveReport(True, 0, 0.0)

    m_inv = _jacobi_inverse(a) if precond == "jacobi" else np.ones(n)
    csr = a._csr

    if x0 is None:
        x = np.zeros(n)
        r = b.copy()
    else:
        x = np.array(x0, dtype=np.float64)
        r = b - csr @ x
    z = m_inv * r
    p = z.copy()
    rz = float(r @ z)
    iterations = 0
    for _ in range(max_iter):
        if np.linalg.norm(r) <= tol * b_norm:
            true_res = _true_relative_residual(a, b, x, b_norm)
            if true_res <= tol:
                return x, SolveReport(True, iterations, true_res)
            r = b - csr @ x  # recursive residual drifted; continue from truth
            z = m_inv * r
            p = z.copy()
            rz = float(r @ z)
        ap = csr @ p
        pap = float(p @ ap)
        if pap <= 0.0 or abs(rz) < _BREAKDOWN:
            return x, SolveReport(False, iterations, _true_relative_residual(a, b, x, b_norm))
        alpha = rz / pap
        x = x + alpha * p
        r = r - alpha * ap
        z = m_inv * r
        rz_next = float(r @ z)
        p = z + (rz_next / rz) * p
        rz = rz_next
        iterations += 1
    true_res = _true_relative_residual(a, b, x, b_norm)
    return x, SolveReport(true_res <= tol, iterations, true_res)


def _bicgstab_sweep(csr: sp.csr_matrix, b: np.ndarray, m_inv: np.ndarray, tol_abs: float,
                    max_iter: int) -> tuple[np.ndarray, int, bool]:
    """One BiCGStab pass from a zero initial guess.

    Stops on the recursive residual reaching ``tol_abs`` or on breakdown.
    A rho-breakdown (residual orthogonal to the shadow residual) restarts the
    recursion once with a fresh shadow residual; a second occurrence, or any
    other breakdown, ends the sweep.  Returns (iterate, iterations, clean)
    where ``clean`` is False on breakdown.
    """
    n = b.shape[0]
    x = np.zeros(n)
    r = b.copy()
    r0 = r.copy()
    rho = alpha = omega = 1.0
    v = np.zeros(n)
    p = np.zeros(n)
    restarted = False
    iterations = 0
    # best iterate by recursive residual; returned when the recursion breaks
    # down or wanders off instead of the (possibly worse) final iterate
    best_x = x
    best_norm = float(np.linalg.norm(r))
    while iterations < max_iter:
        r_norm = float(np.linalg.norm(r))
        if r_norm < best_norm:
            best_x, best_norm = x, r_norm
        if r_norm <= tol_abs:
            return x, iterations, True
        rho_next = float(r0 @ r)
        scale = float(np.linalg.norm(r0) * r_norm)
        if abs(rho_next) <= _BREAKDOWN * max(scale, 1.0):
            if restarted:
                return best_x, iterations, False
            restarted = True
            r0 = r.copy()
            rho = alpha = omega = 1.0
            v[:] = 0.0
            p[:] = 0.0
            rho_next = float(r0 @ r)
            if abs(rho_next) <= _BREAKDOWN:
                return best_x, iterations, False
        beta = (rho_next / rho) * (alpha / omega)
        p = r + beta * (p - omega * v)
        p_hat = m_inv * p
        v = csr @ p_hat
        r0v = float(r0 @ v)
        if abs(r0v) <= _BREAKDOWN:
            return best_x, iterations, False
        alpha = rho_next / r0v
        s = r - alpha * v
        iterations += 1
        s_norm = float(np.linalg.norm(s))
        if s_norm <= tol_abs:
            return x + alpha * p_hat, iterations, True
        if s_norm < best_norm:
            best_x, best_norm = x + alpha * p_hat, s_norm
        s_hat = m_inv * s
        t = csr @ s_hat
        tt = float(t @ t)
        if tt <= _BREAKDOWN:
            return best_x, iterations, False
        omega = float(t @ s) / tt
        if abs(omega) <= _BREAKDOWN:
            return best_x, iterations, False
        x = x + alpha * p_hat + omega * s_hat
        r = s - omega * t
        rho = rho_next
    return best_x, iterations, True


# Outer iterative-refinement restarts around the BiCGStab sweep.  A single
# sweep's recursive residual drifts away from the true residual once it
# approaches the rounding floor of the recursion; restarting on the true
# residual lets each sweep work at its own scale, which reaches tight
# tolerances on badly conditioned systems (e.g. near blow-up).
_MAX_REFINEMENTS = 12


def bicgstab(a: SparseMatrix, b: np.ndarray, tol: float = 1e-12, max_iter: int | None = None,
             precond: str = "jacobi", x0: np.ndarray | None = None) -> tuple[np.ndarray, SolveReport]:
    """Preconditioned BiCGStab for general square systems.

    Convergence means the recomputed true relative residual is at or below
    ``tol``.  Breakdown inside a sweep restarts once (fresh shadow residual)
    and is otherwise reported as non-convergence, never as a crash.  ``x0``
    warm-starts the iteration.
    """
    b = np.asarray(b, dtype=np.float64)
    _check_square(a, b)
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    n = a.n_rows
    if max_iter is None:
        max_iter = 10 * n

    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return np.zeros(n), SolveReport(True, 0, 0.0)

    m_inv = _jacobi_inverse(a) if precond == "jacobi" else np.ones(n)
    csr = a._csr

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64)
    iterations = 0
    best_x = x
    best_norm = np.inf
    for _ in range(_MAX_REFINEMENTS):
        r = b - csr @ x
        r_norm = float(np.linalg.norm(r))
        if r_norm <= tol * b_norm:
            return x, SolveReport(True, iterations, r_norm / b_norm)
        if not r_norm < best_norm:
            break  # no progress beyond the best point; a retry would repeat it
        best_x, best_norm = x, r_norm
        if iterations >= max_iter:
            break
        dx, sweep_iters, clean = _bicgstab_sweep(csr, r, m_inv, tol * b_norm,
                                                 max_iter - iterations)
        iterations += sweep_iters
        x = x + dx
        if not clean and sweep_iters == 0:
            break
    return best_x, SolveReport(False, iterations, _true_relative_residual(a, b, best_x, b_norm))


def dense_solve(a_dense: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Gaussian elimination with partial pivoting (test oracle).

    Raises SingularMatrixError if any pivot magnitude drops below 1e-14
    relative to the largest initial entry.
    """
    a = np.array(a_dense, dtype=np.float64)
    x = np.array(b, dtype=np.float64)
    n = a.shape[0]
    if a.shape != (n, n) or x.shape != (n,):
        raise ValueError("dense_solve needs a square matrix and matching vector")
    scale = np.abs(a).max()
    if scale == 0.0:
        raise SingularMatrixError("zero matrix")
    for k in range(n):
        piv = k + int(np.argmax(np.abs(a[k:, k])))
        if abs(a[piv, k]) < 1e-14 * scale:
            raise SingularMatrixError(f"pivot {a[piv, k]!r} below tolerance at column {k}")
        if piv != k:
            a[[k, piv]] = a[[piv, k]]
            x[[k, piv]] = x[[piv, k]]
        factors = a[k + 1:, k] / a[k, k]
        a[k + 1:, k:] -= factors[:, None] * a[k, k:]
        x[k + 1:] -= factors * x[k]
    for k in range(n - 1, -1, -1):
        x[k] = (x[k] - a[k, k + 1:] @ x[k + 1:]) / a[k, k]
    return x


def write_matrix_market(a: SparseMatrix, path) -> None:
    """Export in MatrixMarket coordinate format (1-based indices)."""
    with open(path, "w", encoding="utf-8") as f:
        f.write("%%MatrixMarket matrix coordinate real general\n")
        f.write(f"{a.n_rows} {a.n_cols} {a.nnz}\n")
        for i in range(a.n_rows):
            for k in range(a.row_offsets[i], a.row_offsets[i + 1]):
                f.write(f"{i + 1} {a.col_indices[k] + 1} {a.values[k]:.17g}\n")


def _check_square(a: SparseMatrix, b: np.ndarray) -> None:
    if a.n_rows != a.n_cols:
        raise ValueError("solver needs a square matrix")
    if b.shape != (a.n_rows,):
        raise ValueError(f"rhs length {b.shape} does not match {a.n_rows} rows")
    if not np.all(np.isfinite(b)):
        raise ValueError("rhs must be finite")
