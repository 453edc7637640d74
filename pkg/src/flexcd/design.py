"""Sparse design matrix with cheap column-subset access."""
from __future__ import annotations

import numpy as np
from scipy import sparse


class SparseDesignMatrix:
    """Row-compressed design matrix ``A`` (rows are samples).

    A column-compressed copy is kept alongside so that coordinate work
    (gathering the columns of a subset ``S``) never touches the full matrix.

    Parameters
    ----------
    indptr, indices, data : array_like
        CSR arrays.  Column indices within each row must be strictly
        increasing.
    shape : (int, int)
        ``(m, N)``.
    nnz : int, optional
        Expected number of stored entries; checked against ``len(data)``.
    """

    def __init__(self, indptr, indices, data, shape, nnz=None):
        indptr = np.asarray(indptr, dtype=np.int64)
        indices = np.asarray(indices, dtype=np.int64)
        data = np.asarray(data, dtype=float)
        m, n = int(shape[0]), int(shape[1])
        if m < 1 or n < 1:
            raise ValueError(f"design matrix needs positive shape, got {shape}")
        if indptr.shape != (m + 1,) or indptr[0] != 0:
            raise ValueError("indptr must have length m + 1 and start at 0")
        if np.any(np.diff(indptr) < 0):
            raise ValueError("indptr must be nondecreasing")
        if indices.shape != data.shape or indptr[-1] != len(data):
            raise ValueError("indices/data length does not match indptr")
        if nnz is not None and int(nnz) != len(data):
            raise ValueError(f"stored nonzero count {len(data)} != header count {nnz}")
        if len(indices) and (indices.min() < 0 or indices.max() >= n):
            raise ValueError("column index out of range")
        # strictly increasing columns within each row
        if len(indices) > 1:
            step = np.diff(indices)
            row_start = np.zeros(len(indices), dtype=bool)
            row_start[indptr[1:-1][indptr[1:-1] < len(indices)]] = True
            if np.any((step <= 0) & ~row_start[1:]):
                raise ValueError("column indices within a row must be strictly increasing")
        if not np.all(np.isfinite(data)):
            raise ValueError("design matrix entries must be finite")

        self.shape = (m, n)
        self.csr = sparse.csr_matrix((data, indices, indptr), shape=(m, n))
        self.csc = self.csr.tocsc()
        self.csc.sort_indices()
        self.col_sq_norms = np.asarray(self.csc.multiply(self.csc).sum(axis=0)).ravel()

    @classmethod
    def from_scipy(cls, mat) -> "SparseDesignMatrix":
        csr = sparse.csr_matrix(mat, dtype=float)
        csr.sum_duplicates()
        csr.sort_indices()
        return cls(csr.indptr, csr.indices, csr.data, csr.shape)

    @classmethod
    def from_dense(cls, arr) -> "SparseDesignMatrix":
        return cls.from_scipy(sparse.csr_matrix(np.asarray(arr, dtype=float)))

    @property
    def nnz(self) -> int:
        return self.csr.nnz

    def toarray(self) -> np.ndarray:
        return self.csr.toarray()

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.csr @ x

    def rmatvec(self, r: np.ndarray) -> np.ndarray:
        return self.csc.T @ r

    def block(self, S: np.ndarray) -> "ColumnBlock":
        return ColumnBlock(self, S)


class ColumnBlock:
    """The columns ``A[:, S]`` in coordinate (triplet) form.

    ``rows``/``local``/``vals`` list every stored entry of the selected
    columns; ``local`` is the position of the column inside ``S``.
    """

    __slots__ = ("S", "tau", "m", "rows", "local", "vals", "_urows", "_inv")

    def __init__(self, A: SparseDesignMatrix, S: np.ndarray):
        csc = A.csc
        self.S = S
        self.tau = len(S)
        self.m = A.shape[0]
        starts = csc.indptr[S]
        stops = csc.indptr[S + 1]
        counts = stops - starts
        total = int(counts.sum())
        if self.tau == 1:
            sl = slice(starts[0], stops[0])
            self.rows = csc.indices[sl]
            self.vals = csc.data[sl]
            self.local = np.zeros(total, dtype=np.intp)
        else:
            # positions of every stored entry of the selected columns
            offs = np.repeat(starts - np.concatenate(([0], np.cumsum(counts)[:-1])), counts)
            pos = np.arange(total) + offs
            self.rows = csc.indices[pos]
            self.vals = csc.data[pos]
            self.local = np.repeat(np.arange(self.tau), counts)
        self._urows = None
        self._inv = None

    def _unique(self):
        if self._urows is None:
            if self.tau == 1:
                self._urows = self.rows
                self._inv = np.arange(len(self.rows))
            elif self.m <= 4 * len(self.rows):
                # dense enough: work on all rows rather than sorting the touched ones
                self._urows = np.arange(self.m)
                self._inv = self.rows
            else:
                self._urows, self._inv = np.unique(self.rows, return_inverse=True)
        return self._urows, self._inv

    @property
    def touched_rows(self) -> np.ndarray:
        """Rows hit by the block (may include untouched rows when the block is dense)."""
        return self._unique()[0]

    def matvec(self, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """``A_S v`` restricted to the touched rows; returns ``(rows, values)``."""
        urows, inv = self._unique()
        out = np.bincount(inv, weights=self.vals * v[self.local], minlength=len(urows))
        return urows, out

    def rmatvec(self, r: np.ndarray) -> np.ndarray:
        """``A_S^T r`` for a full-length row vector ``r``."""
        return np.bincount(self.local, weights=self.vals * r[self.rows], minlength=self.tau)

    def rmatvec_touched(self, w: np.ndarray) -> np.ndarray:
        """``A_S^T w`` where ``w`` is indexed like :attr:`touched_rows`."""
        _, inv = self._unique()
        return np.bincount(self.local, weights=self.vals * w[inv], minlength=self.tau)

    def dense(self) -> np.ndarray:
        """Dense ``len(touched_rows) x tau`` copy of the block."""
        urows, inv = self._unique()
        M = np.zeros((len(urows), self.tau))
        M[inv, self.local] = self.vals
        return M
