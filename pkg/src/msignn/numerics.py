"""Dense and sparse linear-algebra kernels used by every other module.

Dense matrices are 2-D float64 C-order ndarrays; sparse matrices are
scipy CSR arrays in canonical form (sorted column indices, no duplicates).
Everything here is a pure function: inputs are never mutated, so values
can be shared freely across threads.

The only nontrivial kernel is ``lu_solve`` (LAPACK LU with partial
pivoting); it backs the dense Kronecker oracle in ``equilibrium`` and is
never used on the iterative path.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .errors import ShapeError

__all__ = [
    "as_dense",
    "as_csr",
    "check_csr",
    "densify",
    "matmul",
    "spmm_right",
    "frobenius_norm",
    "softmax_rows",
    "transpose",
    "add",
    "sub",
    "scale",
    "hadamard",
    "tanh_map",
    "relu_map",
    "inner_product",
    "column_slice",
    "lu_solve",
]


def as_dense(a) -> np.ndarray:
    """Coerce to a 2-D float64 array; reject non-finite entries."""
    out = np.asarray(a, dtype=np.float64)
    if out.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got ndim={out.ndim}")
    if not np.all(np.isfinite(out)):
        raise ValueError("matrix contains NaN or Inf entries")
    return out


def as_csr(a, shape=None) -> sp.csr_array:
    """Coerce to a canonical float64 CSR array."""
    out = sp.csr_array(a, shape=shape, dtype=np.float64)
    out.sum_duplicates()
    out.sort_indices()
    check_csr(out)
    return out


def check_csr(s: sp.csr_array) -> None:
    """Validate CSR structural invariants (monotone indptr, sorted in-row indices)."""
    rows, cols = s.shape
    indptr, indices = s.indptr, s.indices
    if len(indptr) != rows + 1 or indptr[0] != 0 or indptr[-1] != s.nnz:
        raise ShapeError("corrupt CSR: indptr does not span the value array")
    if np.any(np.diff(indptr) < 0):
        raise ShapeError("corrupt CSR: indptr not non-decreasing")
    if s.nnz:
        if indices.min() < 0 or indices.max() >= cols:
            raise ShapeError("corrupt CSR: column index out of range")
        for r in range(rows):
            row = indices[indptr[r]:indptr[r + 1]]
            if np.any(np.diff(row) <= 0):
                raise ShapeError("corrupt CSR: in-row column indices not strictly increasing")
    if not np.all(np.isfinite(s.data)):
        raise ValueError("CSR values contain NaN or Inf")


def densify(s: sp.csr_array) -> np.ndarray:
    return np.asarray(s.todense(), dtype=np.float64)


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dimensions differ, {a.shape} x {b.shape}")
    return a @ b


def spmm_right(z: np.ndarray, s: sp.csr_array) -> np.ndarray:
    """Dense-times-CSR product Z*S, the propagation kernel.

    Powers of the adjacency are never materialized; m-hop propagation is
    m successive calls of this kernel.
    """
    if z.shape[1] != s.shape[0]:
        raise ShapeError(f"spmm_right: inner dimensions differ, {z.shape} x {s.shape}")
    return np.asarray(z @ s)


def frobenius_norm(m: np.ndarray) -> float:
    return float(np.sqrt(np.sum(m * m)))


def softmax_rows(m: np.ndarray) -> np.ndarray:
    """Row-wise softmax, max-subtracted for overflow safety."""
    shifted = m - m.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def transpose(m: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(m.T)


def add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _require_same_shape(a, b, "add")
    return a + b


def sub(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _require_same_shape(a, b, "sub")
    return a - b


def scale(a: np.ndarray, c: float) -> np.ndarray:
    return c * a


def hadamard(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _require_same_shape(a, b, "hadamard")
    return a * b


def tanh_map(a: np.ndarray) -> np.ndarray:
    return np.tanh(a)


def relu_map(a: np.ndarray) -> np.ndarray:
    return np.maximum(a, 0.0)


def inner_product(a: np.ndarray, b: np.ndarray) -> float:
    _require_same_shape(a, b, "inner_product")
    return float(np.sum(a * b))


def column_slice(m: np.ndarray, j: int) -> np.ndarray:
    if not 0 <= j < m.shape[1]:
        raise IndexError(f"column {j} out of range for {m.shape}")
    return m[:, j].copy()


def lu_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve A x = b by LU with partial pivoting (LAPACK gesv)."""
    if a.shape[0] != a.shape[1]:
        raise ShapeError(f"lu_solve: matrix not square, {a.shape}")
    if a.shape[0] != b.shape[0]:
        raise ShapeError(f"lu_solve: rhs length {b.shape[0]} != {a.shape[0]}")
    return np.linalg.solve(a, b)


def _require_same_shape(a, b, op):
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shapes differ, {a.shape} vs {b.shape}")
