"""Sparse kernels for the coupled solver: block operator, ILU(0), GMRES.

Matrices are scipy CSR; the hot kernels (ILU(0) factorization and the
triangular sweeps) are numba-compiled.  The "flattened" ordering of the
coupled matrix puts all PDE unknowns first, then the ODE unknowns in cell
order (R_i, C_i, E_i per cell).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from numba import njit


class LinAlgError(RuntimeError):
    pass


@dataclass
class PartitionedVector:
    """View pair over one contiguous unknown vector: PDE part, ODE part."""

    data: np.ndarray
    n_pde: int

    @property
    def u(self) -> np.ndarray:
        return self.data[:self.n_pde]

    @property
    def v(self) -> np.ndarray:
        return self.data[self.n_pde:]

    @classmethod
    def zeros(cls, n_pde: int, n_ode: int) -> "PartitionedVector":
        return cls(np.zeros(n_pde + n_ode), n_pde)

    @classmethod
    def concat(cls, u: np.ndarray, v: np.ndarray) -> "PartitionedVector":
        return cls(np.concatenate([u, v]), len(u))


class CoupledMatrix:
    """2x2 block operator: PDE block, the two coupling blocks, ODE block.

    B_vv is stored as (n_cells, 3, 3) dense blocks; it is strictly block
    diagonal by construction.
    """

    def __init__(self, A_uu: sp.csr_matrix, A_uv: sp.csr_matrix,
                 B_vu: sp.csr_matrix, B_vv: np.ndarray, level: int = 0):
        self.A_uu = A_uu
        self.A_uv = A_uv
        self.B_vu = B_vu
        self.B_vv = B_vv
        self.level = level
        self.n_pde = A_uu.shape[0]
        self.n_cells = B_vv.shape[0]
        self.n_ode = 3 * self.n_cells
        if A_uv.shape != (self.n_pde, self.n_ode) or \
                B_vu.shape != (self.n_ode, self.n_pde):
            raise LinAlgError("coupled block dimensions are inconsistent")
        self._flat = None
        self._bvv_lu = None

    @property
    def shape(self):
        n = self.n_pde + self.n_ode
        return (n, n)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """Apply the block operator to a flat (PDE-first) vector."""
        if x.shape[0] != self.n_pde + self.n_ode:
            raise LinAlgError("matvec dimension mismatch")
        xu, xv = x[:self.n_pde], x[self.n_pde:]
        yu = self.A_uu @ xu + self.A_uv @ xv
        yv = self.B_vu @ xu + \
            (self.B_vv @ xv.reshape(self.n_cells, 3)[:, :, None])[:, :, 0].ravel()
        return np.concatenate([yu, yv])

    def bvv_sparse(self) -> sp.csr_matrix:
        idx = np.arange(self.n_ode).reshape(self.n_cells, 3)
        rows = np.repeat(idx[:, :, None], 3, axis=2).ravel()
        cols = np.repeat(idx[:, None, :], 3, axis=1).ravel()
        return sp.csr_matrix((self.B_vv.ravel(), (rows, cols)),
                             shape=(self.n_ode, self.n_ode))

    def flatten(self) -> sp.csr_matrix:
        """Whole coupled matrix in CSR, PDE unknowns first."""
        if self._flat is None:
            flat = sp.bmat([[self.A_uu, self.A_uv],
                            [self.B_vu, self.bvv_sparse()]], format="csr")
            flat.sort_indices()
            self._flat = flat
        return self._flat

    def solve_bvv(self, rhs: np.ndarray) -> np.ndarray:
        """Per-cell 3x3 dense solves of the ODE block."""
        try:
            if self._bvv_lu is None:
                self._bvv_lu = np.linalg.inv(self.B_vv)
        except np.linalg.LinAlgError as exc:
            raise LinAlgError(f"singular ODE block: {exc}") from exc
        r = rhs.reshape(self.n_cells, 3)
        return (self._bvv_lu @ r[:, :, None])[:, :, 0].ravel()


# ---------------------------------------------------------------------------
# ILU(0)

@njit(cache=True)
def _ilu0_kernel(indptr, indices, data, diag_idx):
    n = len(indptr) - 1
    pos = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        start, end = indptr[i], indptr[i + 1]
        for idx in range(start, end):
            pos[indices[idx]] = idx
        di = -1
        for idx in range(start, end):
            k = indices[idx]
            if k >= i:
                if k == i:
                    di = idx
                break
            dk = diag_idx[k]
            piv = data[dk]
            if piv == 0.0:
                for idx2 in range(start, end):
                    pos[indices[idx2]] = -1
                return k
            lik = data[idx] / piv
            data[idx] = lik
            for idx2 in range(dk + 1, indptr[k + 1]):
                j = indices[idx2]
                p = pos[j]
                if p >= 0:
                    data[p] -= lik * data[idx2]
        if di < 0 or data[di] == 0.0:
            for idx2 in range(start, end):
                pos[indices[idx2]] = -1
            return i
        diag_idx[i] = di
        for idx in range(start, end):
            pos[indices[idx]] = -1
    return -1


@njit(cache=True)
def _ilu0_solve_kernel(indptr, indices, data, diag_idx, b, x):
    n = len(indptr) - 1
    # forward: L (unit diagonal) y = b
    for i in range(n):
        s = b[i]
        for idx in range(indptr[i], diag_idx[i]):
            s -= data[idx] * x[indices[idx]]
        x[i] = s
    # backward: U x = y
    for i in range(n - 1, -1, -1):
        s = x[i]
        for idx in range(diag_idx[i] + 1, indptr[i + 1]):
            s -= data[idx] * x[indices[idx]]
        x[i] = s / data[diag_idx[i]]


class ILU0:
    """Incomplete LU with zero fill-in; keeps the matrix sparsity pattern.

    A zero pivot triggers one retry with a tiny diagonal shift; a second
    failure raises with the offending row index.
    """

    def __init__(self, A: sp.csr_matrix):
        A = A.tocsr()
        if not A.has_sorted_indices:
            A = A.copy()
            A.sort_indices()
        self.shape = A.shape
        self.indptr = A.indptr.astype(np.int64)
        self.indices = A.indices.astype(np.int64)
        data = A.data.astype(np.float64).copy()
        diag_idx = np.zeros(A.shape[0], dtype=np.int64)
        bad = _ilu0_kernel(self.indptr, self.indices, data, diag_idx)
        if bad >= 0:
            shift = 1e-12 * np.abs(A.diagonal()).max()
            shifted = (A + sp.eye(A.shape[0], format="csr") * shift).tocsr()
            shifted.sort_indices()
            self.indptr = shifted.indptr.astype(np.int64)
            self.indices = shifted.indices.astype(np.int64)
            data = shifted.data.astype(np.float64)
            diag_idx = np.zeros(A.shape[0], dtype=np.int64)
            bad = _ilu0_kernel(self.indptr, self.indices, data, diag_idx)
            if bad >= 0:
                raise LinAlgError(f"ILU(0) zero pivot in row {bad} after shift")
        self.data = data
        self.diag_idx = diag_idx

    def solve(self, b: np.ndarray) -> np.ndarray:
        x = np.empty_like(b, dtype=np.float64)
        _ilu0_solve_kernel(self.indptr, self.indices, self.data,
                           self.diag_idx, np.asarray(b, dtype=np.float64), x)
        return x


def ilu0(A: sp.csr_matrix) -> ILU0:
    return ILU0(A)


# ---------------------------------------------------------------------------
# GMRES

def gmres(operator, rhs: np.ndarray, preconditioner=None, rel_tol: float = 1e-11,
          max_iter: int = 500):
    """Right-preconditioned, unrestarted GMRES.

    operator / preconditioner are callables on flat vectors (a matrix with a
    .matvec attribute is accepted for the operator).  Returns
    (solution, iterations, residual_history); the history holds true residual
    norms, starting with ||rhs||.  Raises on non-finite iterates.
    """
    if hasattr(operator, "matvec"):
        op = operator.matvec
    else:
        op = operator
    prec = preconditioner if preconditioner is not None else (lambda x: x)

    n = rhs.shape[0]
    beta = np.linalg.norm(rhs)
    history = [beta]
    if beta == 0.0 or not np.isfinite(beta):
        if not np.isfinite(beta):
            raise LinAlgError("non-finite right-hand side")
        return np.zeros(n), 0, history

    V = np.zeros((max_iter + 1, n))
    H = np.zeros((max_iter + 1, max_iter))
    cs = np.zeros(max_iter)
    sn = np.zeros(max_iter)
    g = np.zeros(max_iter + 1)
    g[0] = beta
    V[0] = rhs / beta

    m = 0
    for k in range(max_iter):
        # copy: an operator may return its input aliasing the basis row
        w = np.array(op(prec(V[k])), dtype=np.float64)
        if not np.all(np.isfinite(w)):
            raise LinAlgError("non-finite iterate in GMRES")
        for j in range(k + 1):
            H[j, k] = V[j] @ w
            w -= H[j, k] * V[j]
        nrm = np.linalg.norm(w)
        H[k + 1, k] = nrm
        # apply accumulated Givens rotations to the new column
        for j in range(k):
            t = cs[j] * H[j, k] + sn[j] * H[j + 1, k]
            H[j + 1, k] = -sn[j] * H[j, k] + cs[j] * H[j + 1, k]
            H[j, k] = t
        denom = np.hypot(H[k, k], H[k + 1, k])
        if denom == 0.0:
            cs[k], sn[k] = 1.0, 0.0
        else:
            cs[k], sn[k] = H[k, k] / denom, H[k + 1, k] / denom
        H[k, k] = cs[k] * H[k, k] + sn[k] * H[k + 1, k]
        H[k + 1, k] = 0.0
        g[k + 1] = -sn[k] * g[k]
        g[k] = cs[k] * g[k]
        res = abs(g[k + 1])
        history.append(min(res, history[-1]))
        m = k + 1
        if res <= rel_tol * beta or nrm == 0.0:   # converged or happy breakdown
            break
        V[k + 1] = w / nrm

    # least-squares coefficients from the rotated upper triangular system
    y = np.zeros(m)
    for i in range(m - 1, -1, -1):
        s = g[i] - H[i, i + 1:m] @ y[i + 1:m]
        y[i] = s / H[i, i] if H[i, i] != 0 else 0.0
    x = prec(V[:m].T @ y) if m > 0 else np.zeros(n)
    return x, m, history


# ---------------------------------------------------------------------------
# dense direct solves

def dense_solve(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    try:
        return scipy.linalg.solve(A, b)
    except scipy.linalg.LinAlgError as exc:
        raise LinAlgError(f"singular dense system: {exc}") from exc


class DenseLU:
    """LU with partial pivoting, reusable for repeated right-hand sides."""

    def __init__(self, A: np.ndarray):
        try:
            self._lu = scipy.linalg.lu_factor(np.asarray(A, dtype=np.float64))
        except (scipy.linalg.LinAlgError, ValueError) as exc:
            raise LinAlgError(f"dense LU failed: {exc}") from exc

    def solve(self, b: np.ndarray) -> np.ndarray:
        return scipy.linalg.lu_solve(self._lu, b)


def eig2x2(M: np.ndarray) -> tuple[complex, complex]:
    """Closed-form eigenvalues of a 2x2 matrix via trace and determinant."""
    a, b = M[0, 0], M[0, 1]
    c, d = M[1, 0], M[1, 1]
    tr, det = a + d, a * d - b * c
    disc = complex(tr * tr / 4.0 - det) ** 0.5
    return tr / 2.0 + disc, tr / 2.0 - disc


def spectral_radius_2x2(M: np.ndarray) -> float:
    l1, l2 = eig2x2(M)
    return max(abs(l1), abs(l2))


def dump_matrix_market(A: sp.spmatrix, path) -> None:
    import scipy.io
    scipy.io.mmwrite(str(path), A)
