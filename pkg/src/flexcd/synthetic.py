"""Synthetic problem instances with controlled conditioning and planted optima."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .design import SparseDesignMatrix
from .losses import LogisticLoss, QuadraticLoss
from .problem import CompositeProblem, eval_F
from .regularizers import Regularizer, Zero, scalar_subgradient


@dataclass(frozen=True)
class SyntheticRecipe:
    """Parameters of a generated instance.

    ``cond`` is the condition number of the least-squares Hessian
    ``A^T A`` (dense quadratic instances).  ``sparsity`` is the fraction of
    stored entries in ``A``.  ``support`` is the fraction of nonzeros in
    the planted solution or separator.
    """

    kind: str = "quadratic"
    N: int = 50
    m: int = 100
    cond: float = 1.0
    sparsity: float = 1.0
    support: float = 0.2
    margin: float = 0.1
    label_noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("quadratic", "logistic"):
            raise ValueError("kind must be 'quadratic' or 'logistic'")
        if self.N < 1 or self.m < 1:
            raise ValueError("N and m must be positive")
        if not self.cond >= 1:
            raise ValueError("condition number must be >= 1")
        if not 0 < self.sparsity <= 1:
            raise ValueError("sparsity must lie in (0, 1]")
        if not 0 < self.support <= 1:
            raise ValueError("support must lie in (0, 1]")
        if self.margin < 0 or not 0 <= self.label_noise < 0.5:
            raise ValueError("margin must be >= 0 and label_noise in [0, 0.5)")


@dataclass
class SyntheticInstance:
    problem: CompositeProblem
    x_star: np.ndarray | None
    F_star: float | None
    recipe: SyntheticRecipe

    @property
    def exact(self) -> bool:
        return self.x_star is not None


def _planted_vector(rng, N, support):
    k = max(1, int(round(support * N)))
    x = np.zeros(N)
    idx = rng.choice(N, size=k, replace=False)
    x[idx] = rng.choice([-1.0, 1.0], size=k) * rng.uniform(0.5, 2.0, size=k)
    return x


def _subgradient_at(reg: Regularizer, x, rng):
    """A subgradient of ``reg`` at ``x`` with kink entries drawn inside the interval."""
    interior = rng.uniform(-0.8, 0.8, size=len(x))
    return np.array([scalar_subgradient(reg, xi, ui) for xi, ui in zip(x, interior)])


def _dense_design(rng, N, m, cond):
    """``A = U diag(s) V^T`` with ``s^2`` geometric between ``1/cond`` and 1."""
    r = min(N, m)
    U, _ = np.linalg.qr(rng.standard_normal((m, r)))
    V, _ = np.linalg.qr(rng.standard_normal((N, r)))
    eig = np.geomspace(1.0 / cond, 1.0, r) if r > 1 else np.ones(1)
    s = np.sqrt(eig)
    return (U * s) @ V.T, eig


def _sparse_design(rng, N, m, sparsity, cond):
    """Random sparse ``A`` whose columns are rescaled to spread the diagonal over ``[1/cond, 1]``."""
    A = sparse.random(m, N, density=sparsity, format="csc", random_state=rng,
                      data_rvs=rng.standard_normal)
    norms = np.sqrt(np.asarray(A.multiply(A).sum(axis=0)).ravel())
    norms[norms == 0] = 1.0
    target = np.sqrt(np.geomspace(1.0 / cond, 1.0, N)) if N > 1 else np.ones(1)
    target = rng.permutation(target)
    return (A @ sparse.diags(target / norms)).tocsr()


def generate_synthetic(recipe: SyntheticRecipe, reg: Regularizer | None = None) -> SyntheticInstance:
    """Build an instance from ``recipe`` with regularizer ``reg`` (default zero).

    Quadratic instances plant a solution ``x*``: ``b`` is chosen so that
    ``-grad f(x*)`` is a subgradient of ``reg`` at ``x*``, which needs
    ``A^T A`` to be invertible (``m >= N`` with full column rank).  When
    that fails, ``x_star`` and ``F_star`` are ``None``.  Logistic instances
    draw Gaussian features and labels from a planted separator, keeping
    only samples whose margin is at least ``margin``.
    """
    reg = Zero() if reg is None else reg
    rng = np.random.default_rng(recipe.seed)
    N, m = recipe.N, recipe.m
    if recipe.kind == "quadratic":
        return _quadratic(recipe, reg, rng)

    w = _planted_vector(rng, N, recipe.support)
    w /= np.linalg.norm(w)
    rows, labels = [], []
    need = m
    scale = np.sqrt(recipe.sparsity)
    while need > 0:
        batch = max(2 * need, 64)
        X = rng.standard_normal((batch, N))
        if recipe.sparsity < 1:
            X *= rng.random((batch, N)) < recipe.sparsity
        z = X @ w
        keep = np.abs(z) >= recipe.margin * scale
        X, z = X[keep][:need], z[keep][:need]
        rows.append(X)
        labels.append(np.where(z >= 0, 1.0, -1.0))
        need -= len(z)
    X = np.vstack(rows) / np.sqrt(N)
    y = np.concatenate(labels)
    if recipe.label_noise > 0:
        flip = rng.random(m) < recipe.label_noise
        y[flip] = -y[flip]
    A = SparseDesignMatrix.from_scipy(sparse.csr_matrix(X))
    problem = CompositeProblem(LogisticLoss(A, y), reg)
    return SyntheticInstance(problem, None, None, recipe)


def _quadratic(recipe, reg, rng):
    N, m = recipe.N, recipe.m
    if recipe.sparsity >= 1:
        M, eig = _dense_design(rng, N, m, recipe.cond)
        A = SparseDesignMatrix.from_dense(M)
        mu_f = float(eig.min()) if m >= N else 0.0
    else:
        A = SparseDesignMatrix.from_scipy(_sparse_design(rng, N, m, recipe.sparsity, recipe.cond))
        mu_f = None
    x_star = _planted_vector(rng, N, recipe.support)
    v = _subgradient_at(reg, x_star, rng) if not reg.is_zero else np.zeros(N)
    Ax = A.matvec(x_star)
    r = None
    if m >= N:
        G = (A.csc.T @ A.csc).tocsc()
        try:
            w = splu(G).solve(v) if np.any(v) else np.zeros(N)
            if np.all(np.isfinite(w)):
                r = -A.matvec(w)
        except RuntimeError:
            r = None
        if r is not None and np.linalg.norm(A.rmatvec(r) + v) > 1e-8 * max(1.0, np.linalg.norm(v)):
            r = None
    elif not np.any(v):
        r = np.zeros(m)
    if r is None:
        b = Ax + 0.1 * rng.standard_normal(m)
        problem = CompositeProblem(QuadraticLoss(A, b), reg)
        return SyntheticInstance(problem, None, None, recipe)
    b = Ax - r
    loss = QuadraticLoss(A, b)
    if mu_f is None and m >= N:
        mu_f = loss.hessian_spectrum()[0]
    mu_F = None if mu_f is None else mu_f + reg.strong_convexity
    problem = CompositeProblem(loss, reg, mu_f, mu_F)
    return SyntheticInstance(problem, x_star, eval_F(problem, x_star), recipe)
