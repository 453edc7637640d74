"""Smooth losses with incremental caches.

Both losses act on ``A x`` only, so a coordinate step along ``U_S t`` touches
the rows hit by the columns in ``S``.  Each loss keeps a small mutable cache
(residual for least squares, margins for logistic) that makes the partial
gradient, the function-value difference along a direction, and the commit
of a step cost proportional to the nonzeros of ``A[:, S]``.
"""
from __future__ import annotations

import numpy as np
from scipy.special import expit

from .design import ColumnBlock, SparseDesignMatrix

LIPSCHITZ_FLOOR = 1e-12
# dense Gram matrix is cached for quadratic losses up to this dimension
GRAM_CACHE_MAX_N = 4000


class LossCache:
    """Mutable per-run state of a loss at the current iterate."""

    __slots__ = ("aux", "f", "sig")

    def __init__(self, aux: np.ndarray, f: float, sig: np.ndarray | None = None):
        self.aux = aux
        self.f = f
        self.sig = sig

    def copy(self) -> "LossCache":
        return LossCache(self.aux.copy(), self.f, None if self.sig is None else self.sig.copy())


class SmoothLoss:
    name = "base"
    _lip_scale = 1.0

    def __init__(self, A: SparseDesignMatrix, b):
        b = np.asarray(b, dtype=float)
        if b.shape != (A.shape[0],):
            raise ValueError(f"b has shape {b.shape}, expected ({A.shape[0]},)")
        self.A = A
        self.b = b

    @property
    def N(self) -> int:
        return self.A.shape[1]

    @property
    def m(self) -> int:
        return self.A.shape[0]

    def lipschitz(self) -> np.ndarray:
        """Coordinate Lipschitz constants ``L_i`` (floored away from zero)."""
        return np.maximum(self._lip_scale * self.A.col_sq_norms, LIPSCHITZ_FLOOR)

    def global_lipschitz(self) -> float:
        """Largest eigenvalue bound of the full Hessian."""
        return self._lip_scale * _gram_extreme_eigs(self.A)[1]


class QuadraticLoss(SmoothLoss):
    """``f(x) = 1/2 ||A x - b||^2``; cache holds the residual ``A x - b``."""

    name = "quadratic"
    _lip_scale = 1.0

    def __init__(self, A, b):
        super().__init__(A, b)
        self._gram = None

    def value(self, x) -> float:
        r = self.A.matvec(x) - self.b
        return 0.5 * float(r @ r)

    def gradient(self, x) -> np.ndarray:
        return self.A.rmatvec(self.A.matvec(x) - self.b)

    def init_cache(self, x) -> LossCache:
        r = self.A.matvec(np.asarray(x, dtype=float)) - self.b
        return LossCache(r, 0.5 * float(r @ r))

    def full_gradient(self, cache: LossCache) -> np.ndarray:
        return self.A.rmatvec(cache.aux)

    def partial_gradient(self, cache, blk: ColumnBlock) -> np.ndarray:
        return blk.rmatvec(cache.aux)

    def hessian_diag(self, cache, blk: ColumnBlock) -> np.ndarray:
        return self.A.col_sq_norms[blk.S].copy()

    def hessian_product(self, cache, blk: ColumnBlock, v) -> np.ndarray:
        _, w = blk.matvec(v)
        return blk.rmatvec_touched(w)

    def hessian_block(self, cache, blk: ColumnBlock) -> np.ndarray:
        gram = self.gram()
        if gram is not None:
            return gram[np.ix_(blk.S, blk.S)]
        M = blk.dense()
        return M.T @ M

    def gram(self):
        if self._gram is None and self.N <= GRAM_CACHE_MAX_N:
            self._gram = (self.A.csc.T @ self.A.csc).toarray()
        return self._gram

    def direction(self, blk: ColumnBlock, t) -> tuple[np.ndarray, np.ndarray]:
        """Rows touched by ``U_S t`` and the values of ``A U_S t`` there."""
        return blk.matvec(t)

    def decrease(self, cache, direction, alpha: float) -> float:
        """``f(x) - f(x + alpha U_S t)`` from the cached residual."""
        rows, u = direction
        return -alpha * float(cache.aux[rows] @ u) - 0.5 * alpha * alpha * float(u @ u)

    def commit(self, cache, direction, alpha: float, decrease=None) -> None:
        rows, u = direction
        if decrease is None:
            decrease = self.decrease(cache, direction, alpha)
        cache.f -= decrease
        cache.aux[rows] += alpha * u

    def hessian_spectrum(self) -> tuple[float, float]:
        """``(mu_f, L_f)``: extreme eigenvalues of ``A^T A``."""
        return _gram_extreme_eigs(self.A)


class LogisticLoss(SmoothLoss):
    """``f(x) = sum_j log(1 + exp(-b_j a_j^T x))`` with labels in {-1, +1}.

    The cache stores the margins ``z_j = b_j a_j^T x`` and the sigmoids
    ``sigma(-z_j)``; a commit refreshes both on the touched rows only.
    """

    name = "logistic"
    _lip_scale = 0.25

    def __init__(self, A, b):
        super().__init__(A, b)
        if not np.all(np.isin(self.b, (-1.0, 1.0))):
            raise ValueError("logistic labels must be in {-1, +1}")

    def value(self, x) -> float:
        z = self.b * self.A.matvec(x)
        return float(np.sum(np.logaddexp(0.0, -z)))

    def gradient(self, x) -> np.ndarray:
        z = self.b * self.A.matvec(x)
        return -self.A.rmatvec(self.b * expit(-z))

    def init_cache(self, x) -> LossCache:
        z = self.b * self.A.matvec(np.asarray(x, dtype=float))
        return LossCache(z, float(np.sum(np.logaddexp(0.0, -z))), expit(-z))

    def full_gradient(self, cache) -> np.ndarray:
        return -self.A.rmatvec(self.b * cache.sig)

    def partial_gradient(self, cache, blk: ColumnBlock) -> np.ndarray:
        rows = blk.rows
        return -np.bincount(blk.local, weights=blk.vals * self.b[rows] * cache.sig[rows], minlength=blk.tau)

    def _curvature(self, cache, rows):
        sig = cache.sig[rows]
        return sig * (1.0 - sig)

    def hessian_diag(self, cache, blk: ColumnBlock) -> np.ndarray:
        d = self._curvature(cache, blk.rows)
        return np.bincount(blk.local, weights=blk.vals * blk.vals * d, minlength=blk.tau)

    def hessian_product(self, cache, blk: ColumnBlock, v) -> np.ndarray:
        urows, w = blk.matvec(v)
        return blk.rmatvec_touched(self._curvature(cache, urows) * w)

    def hessian_block(self, cache, blk: ColumnBlock) -> np.ndarray:
        M = blk.dense()
        d = self._curvature(cache, blk.touched_rows)
        return M.T @ (d[:, None] * M)

    def direction(self, blk: ColumnBlock, t):
        """Touched rows and ``b_j a_j^T (U_S t)`` on them."""
        rows, u = blk.matvec(t)
        return rows, self.b[rows] * u

    def decrease(self, cache, direction, alpha: float) -> float:
        rows, u = direction
        # log(1+e^{-z}) - log(1+e^{-z-au}) = -log1p(sigma(-z) * expm1(-a u))
        with np.errstate(over="ignore", invalid="ignore"):
            out = -float(np.sum(np.log1p(cache.sig[rows] * np.expm1(-alpha * u))))
        if np.isfinite(out):
            return out
        z = cache.aux[rows]
        return float(np.sum(np.logaddexp(0.0, -z) - np.logaddexp(0.0, -z - alpha * u)))

    def commit(self, cache, direction, alpha: float, decrease=None) -> None:
        rows, u = direction
        if decrease is None:
            decrease = self.decrease(cache, direction, alpha)
        cache.f -= decrease
        cache.aux[rows] += alpha * u
        cache.sig[rows] = expit(-cache.aux[rows])

    def hessian_spectrum(self) -> tuple[float, float]:
        """``(0, L_f)``; logistic loss is not strongly convex in general."""
        return 0.0, self.global_lipschitz()


def _gram_extreme_eigs(A: SparseDesignMatrix) -> tuple[float, float]:
    m, n = A.shape
    if n <= 3000:
        G = (A.csc.T @ A.csc).toarray()
        ev = np.linalg.eigvalsh(G)
        return max(float(ev[0]), 0.0), float(ev[-1])
    from scipy.sparse.linalg import svds

    smax = svds(A.csr, k=1, which="LM", return_singular_vectors=False)[0]
    return 0.0, float(smax) ** 2


def make_loss(kind: str, A: SparseDesignMatrix, b) -> SmoothLoss:
    kind = kind.lower()
    if kind in ("quadratic", "lsq", "lasso"):
        return QuadraticLoss(A, b)
    if kind == "logistic":
        return LogisticLoss(A, b)
    raise ValueError(f"unknown loss {kind!r}")
