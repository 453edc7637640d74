"""Composite problems ``F(x) = f(x) + Psi(x)`` and per-run iterate state."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .design import ColumnBlock
from .losses import SmoothLoss
from .regularizers import Regularizer


@dataclass
class CompositeProblem:
    """A smooth loss paired with a coordinate-separable regularizer.

    ``mu_f`` and ``mu_F`` are optional strong-convexity constants of the
    loss and of the whole objective.
    """

    loss: SmoothLoss
    reg: Regularizer
    mu_f: float | None = None
    mu_F: float | None = None

    def __post_init__(self):
        for name in ("mu_f", "mu_F"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.mu_f is not None and self.mu_F is not None and self.mu_f > self.mu_F * (1 + 1e-12):
            raise ValueError("mu_f must not exceed mu_F")

    @property
    def N(self) -> int:
        return self.loss.N

    def start(self, x0=None, refresh_every: int | None = None) -> "ProblemState":
        return ProblemState(self, x0, refresh_every)

    def lipschitz(self) -> np.ndarray:
        return self.loss.lipschitz()


def check_subset(S, N: int) -> np.ndarray:
    """Validate a coordinate subset: sorted, duplicate-free, inside ``[0, N)``."""
    S = np.asarray(S, dtype=np.intp)
    if S.ndim != 1 or not 1 <= len(S) <= N:
        raise ValueError(f"subset size must be in [1, {N}]")
    if S[0] < 0 or S[-1] >= N or np.any(np.diff(S) <= 0):
        raise ValueError("subset must be strictly increasing indices in [0, N)")
    return S


def eval_F(problem: CompositeProblem, x) -> float:
    """Objective value computed from scratch."""
    x = np.asarray(x, dtype=float)
    if x.shape != (problem.N,):
        raise ValueError(f"x has shape {x.shape}, expected ({problem.N},)")
    return problem.loss.value(x) + problem.reg.value(x)


class ProblemState:
    """Current iterate of one run together with the loss cache.

    Exposes the subset-local operations the solvers need: partial gradients,
    Hessian information on ``S``, the objective decrease along ``U_S t`` and
    the commit of an accepted step.  Caches are rebuilt from scratch every
    ``refresh_every`` commits to bound floating-point drift.

    :attr:`F` is the starting value minus the sum of committed decreases,
    each computed by a difference formula, so a positive decrease can never
    raise it.  Refreshes rebuild the loss cache but leave this running value
    alone.
    """

    def __init__(self, problem: CompositeProblem, x0=None, refresh_every=None):
        N = problem.N
        self.problem = problem
        self.loss = problem.loss
        self.reg = problem.reg
        self.x = np.zeros(N) if x0 is None else np.array(x0, dtype=float)
        if self.x.shape != (N,) or not np.all(np.isfinite(self.x)):
            raise ValueError("x0 must be a finite vector of length N")
        self.refresh_every = refresh_every
        self.commits = 0
        self.refreshes = 0
        self._blk: ColumnBlock | None = None
        self._dir_key = None
        self._dir = None
        self._last_decrease = None
        self.refresh()
        self._F = self.cache.f + self.psi

    # -- cache management -------------------------------------------------
    def refresh(self) -> None:
        self.cache = self.loss.init_cache(self.x)
        self.psi = self.reg.value(self.x)
        self._since_refresh = 0
        self._dir_key = None
        self.refreshes += 1

    @property
    def F(self) -> float:
        return self._F

    @property
    def f(self) -> float:
        return self.cache.f

    def block(self, S) -> ColumnBlock:
        blk = self._blk
        if blk is None or len(blk.S) != len(S) or not np.array_equal(blk.S, S):
            blk = self._blk = self.loss.A.block(np.asarray(S, dtype=np.intp))
        return blk

    def _direction(self, S, t):
        key = self._dir_key
        if key is not None and key[0] is S and np.array_equal(key[1], t):
            return self._dir
        d = self.loss.direction(self.block(S), t)
        self._dir_key = (S, np.array(t, copy=True))
        self._dir = d
        self._last_decrease = None
        return d

    # -- subset-local oracles ---------------------------------------------
    def partial_gradient(self, S) -> np.ndarray:
        return self.loss.partial_gradient(self.cache, self.block(S))

    def full_gradient(self) -> np.ndarray:
        return self.loss.full_gradient(self.cache)

    def hessian_diag(self, S) -> np.ndarray:
        return self.loss.hessian_diag(self.cache, self.block(S))

    def hessian_product(self, S, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != (len(S),):
            raise ValueError("v must have length |S|")
        return self.loss.hessian_product(self.cache, self.block(S), v)

    def hessian_block(self, S) -> np.ndarray:
        return self.loss.hessian_block(self.cache, self.block(S))

    def lipschitz(self) -> np.ndarray:
        return self.loss.lipschitz()

    def prepare_direction(self, S, t) -> None:
        """Compute and keep the row products of ``U_S t`` for later trials and the commit."""
        self._direction(S, np.asarray(t, dtype=float))

    def loss_decrease(self, S, t, alpha: float) -> float:
        """``f(x) - f(x + alpha U_S t)`` from cached quantities."""
        df = self.loss.decrease(self.cache, self._direction(S, t), alpha)
        self._last_decrease = (alpha, df)
        return df

    def delta_F(self, S, t, alpha: float) -> float:
        """``F(x) - F(x + alpha U_S t)`` from cached quantities."""
        t = np.asarray(t, dtype=float)
        if not np.any(t):
            return 0.0
        xs = self.x[S]
        dpsi = self.reg.value(xs) - self.reg.value(xs + alpha * t)
        return self.loss_decrease(S, t, alpha) + dpsi

    def commit(self, S, t, alpha: float) -> float:
        """Apply ``x <- x + alpha U_S t``; returns the realised decrease of F."""
        if not alpha > 0:
            raise ValueError("a committed step size must be positive")
        t = np.asarray(t, dtype=float)
        d = self._direction(S, t)
        xs = self.x[S]
        xs_new = xs + alpha * t
        last = self._last_decrease
        if last is not None and last[0] == alpha:
            # the line search already evaluated this exact step
            df = last[1]
        else:
            df = self.loss.decrease(self.cache, d, alpha)
        dpsi = self.reg.value(xs) - self.reg.value(xs_new)
        self.loss.commit(self.cache, d, alpha, df)
        self.psi -= dpsi
        self._F -= df + dpsi
        self.x[S] = xs_new
        self._dir_key = None
        self._last_decrease = None
        self.commits += 1
        self._since_refresh += 1
        if self.refresh_every and self._since_refresh >= self.refresh_every:
            self.refresh()
        return df + dpsi

    def copy(self) -> "ProblemState":
        new = object.__new__(ProblemState)
        new.__dict__.update(self.__dict__)
        new.x = self.x.copy()
        new.cache = self.cache.copy()
        new._dir_key = None
        return new


def delta_F(state: ProblemState, S, t, alpha: float) -> float:
    return state.delta_F(S, t, alpha)


def commit_step(state: ProblemState, S, t, alpha: float) -> float:
    return state.commit(S, t, alpha)


def partial_gradient(state: ProblemState, S) -> np.ndarray:
    return state.partial_gradient(S)


def hessian_subset_product(state: ProblemState, S, v) -> np.ndarray:
    return state.hessian_product(S, v)


def coordinate_lipschitz(problem: CompositeProblem, i: int) -> float:
    return float(problem.loss.lipschitz()[i])
