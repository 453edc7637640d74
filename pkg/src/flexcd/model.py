"""Subset quadratic models and the curvature strategies that build them.

A model on a subset ``S`` is

    Q_S(t) = <grad_S, t> + 1/2 <H t, t> + Psi_S(x_S + t)

where ``H`` is the curvature operator chosen by a :class:`CurvatureStrategy`.
Each strategy also reports bounds ``lam <= eig(H) <= Lam``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import eigh

from .losses import LIPSCHITZ_FLOOR
from .problem import ProblemState
from .regularizers import Regularizer

# dense curvature blocks are formed up to this subset size
DENSE_BLOCK_MAX_TAU = 512
POWER_ITERATIONS = 20
POWER_SAFETY = 1.1


@dataclass
class SubproblemModel:
    """Snapshot of ``Q_S`` at the current iterate.

    Exactly one of ``diag``, ``matrix`` or ``op`` defines ``H``; ``diag`` and
    ``matrix`` also make the operator available to coordinate-wise solvers.
    """

    S: np.ndarray
    x_S: np.ndarray
    grad: np.ndarray
    reg: Regularizer
    lam: float
    Lam: float
    L_S: float
    diag: np.ndarray | None = None
    matrix: np.ndarray | None = None
    op: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)

    @property
    def tau(self) -> int:
        return len(self.S)

    @property
    def is_diagonal(self) -> bool:
        return self.diag is not None

    def apply_H(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if self.diag is not None:
            return self.diag * v
        if self.matrix is not None:
            return self.matrix @ v
        return self.op(v)

    def H_diagonal(self) -> np.ndarray | None:
        if self.diag is not None:
            return self.diag
        if self.matrix is not None:
            return np.diag(self.matrix).copy()
        return None


def model_value_delta(model: SubproblemModel, t, Ht=None) -> float:
    """``Q_S(t) - Q_S(0)``."""
    t = np.asarray(t, dtype=float)
    if Ht is None:
        Ht = model.apply_H(t)
    reg = model.reg
    return (
        float(model.grad @ t)
        + 0.5 * float(Ht @ t)
        + reg.value(model.x_S + t)
        - reg.value(model.x_S)
    )


def stationarity_residual(model: SubproblemModel, t, Ht=None) -> np.ndarray:
    """``grad + H t + prox_{Psi*}(x_S + t - grad - H t)``; zero iff ``t`` minimises ``Q_S``."""
    t = np.asarray(t, dtype=float)
    if Ht is None:
        Ht = model.apply_H(t)
    smooth = model.grad + Ht
    return smooth + model.reg.conj_prox(model.x_S + t - smooth)


def projection_distance(model: SubproblemModel, t, Ht=None) -> float:
    """Distance from the stationarity residual to the model subdifferential at ``t``.

    After shifting by ``grad + H t`` this is the distance from
    ``prox_{Psi*}(x_S + t - grad - H t)`` to ``dPsi_S(x_S + t)``, which
    separates into scalar interval projections.
    """
    t = np.asarray(t, dtype=float)
    if Ht is None:
        Ht = model.apply_H(t)
    point = model.x_S + t
    p = model.reg.conj_prox(point - model.grad - Ht)
    v = model.reg.subdiff_project(point, p)
    return float(np.linalg.norm(v - p))


def largest_eigenvalue(M: np.ndarray) -> float:
    """Exact largest eigenvalue of a dense symmetric matrix."""
    tau = M.shape[0]
    return float(eigh(M, eigvals_only=True, subset_by_index=[tau - 1, tau - 1])[0])


def power_iteration_bound(apply, tau: int, steps: int = POWER_ITERATIONS) -> float:
    """Largest-eigenvalue estimate of a symmetric PSD operator times a safety factor."""
    v = np.ones(tau) / np.sqrt(tau)
    # break symmetry with a deterministic perturbation
    v = v + 1e-3 * np.cos(np.arange(tau))
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(steps):
        w = apply(v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        est = float(v @ w)
        v = w / nw
    return POWER_SAFETY * max(est, float(v @ apply(v)))


# ---------------------------------------------------------------------------
# curvature strategies


class CurvatureStrategy:
    """Builds the curvature operator for a subset at the current iterate."""

    name = "base"

    def build(self, state: ProblemState, S: np.ndarray, grad=None) -> SubproblemModel:
        raise NotImplementedError

    def observe_step(self, state: ProblemState, S, step, grad_before) -> None:
        """Hook called after each committed step (only quasi-Newton uses it)."""

    def reset(self) -> None:
        pass

    def describe(self) -> dict:
        return {"kind": self.name}

    def _base(self, state: ProblemState, S, grad):
        if grad is None:
            grad = state.partial_gradient(S)
        if not np.all(np.isfinite(grad)):
            raise FloatingPointError("non-finite partial gradient")
        L_S = float(state.lipschitz()[S].sum())
        return grad, state.x[S].copy(), L_S


class Identity(CurvatureStrategy):
    name = "identity"

    def build(self, state, S, grad=None):
        grad, xs, L_S = self._base(state, S, grad)
        return SubproblemModel(S, xs, grad, state.reg, 1.0, 1.0, L_S, diag=np.ones(len(S)))


class ScaledIdentity(CurvatureStrategy):
    """``nu * I`` with a constant ``nu`` or ``nu = L_S`` (``nu="lipschitz"``)."""

    name = "scaled"

    def __init__(self, nu: float | str = "lipschitz"):
        if nu != "lipschitz" and not float(nu) > 0:
            raise ValueError("nu must be positive or 'lipschitz'")
        self.nu = nu

    def build(self, state, S, grad=None):
        grad, xs, L_S = self._base(state, S, grad)
        nu = L_S if self.nu == "lipschitz" else float(self.nu)
        return SubproblemModel(S, xs, grad, state.reg, nu, nu, L_S, diag=np.full(len(S), nu))

    def describe(self):
        return {"kind": self.name, "nu": self.nu}


class CoordinateLipschitz(CurvatureStrategy):
    """``diag(L_i)`` over the subset: the classical coordinate-descent model."""

    name = "lipschitz"

    def build(self, state, S, grad=None):
        grad, xs, L_S = self._base(state, S, grad)
        d = state.lipschitz()[S].copy()
        return SubproblemModel(S, xs, grad, state.reg, float(d.min()), float(d.max()), L_S, diag=d)


class DiagonalHessian(CurvatureStrategy):
    """``diag(hessian_S) + ridge``; entries floored at the Lipschitz floor."""

    name = "diag"

    def __init__(self, ridge: float = 0.0):
        if ridge < 0:
            raise ValueError("ridge must be nonnegative")
        self.ridge = float(ridge)

    def build(self, state, S, grad=None):
        grad, xs, L_S = self._base(state, S, grad)
        d = np.maximum(state.hessian_diag(S) + self.ridge, LIPSCHITZ_FLOOR)
        return SubproblemModel(S, xs, grad, state.reg, float(d.min()), float(d.max()), L_S, diag=d)

    def describe(self):
        return {"kind": self.name, "ridge": self.ridge}


class PrincipalMinor(CurvatureStrategy):
    """Subset principal minor of the Hessian plus ``ridge * I``."""

    name = "minor"

    def __init__(self, ridge: float = 1e-6):
        if not ridge > 0:
            raise ValueError("principal-minor ridge must be strictly positive")
        self.ridge = float(ridge)

    def build(self, state, S, grad=None):
        grad, xs, L_S = self._base(state, S, grad)
        tau = len(S)
        rho = self.ridge
        if tau <= DENSE_BLOCK_MAX_TAU:
            M = state.hessian_block(S)
            M = 0.5 * (M + M.T)
            M[np.diag_indices(tau)] += rho
            Lam = largest_eigenvalue(M)
            return SubproblemModel(S, xs, grad, state.reg, rho, max(Lam, rho), L_S, matrix=M)
        snap = state.copy()

        def op(v):
            return snap.hessian_product(S, v) + rho * v

        Lam = power_iteration_bound(op, tau)
        return SubproblemModel(S, xs, grad, state.reg, rho, max(Lam, rho), L_S, op=op)

    def describe(self):
        return {"kind": self.name, "ridge": self.ridge}


class LimitedMemoryQN(CurvatureStrategy):
    """Compact limited-memory BFGS matrix restricted to the subset, plus ``ridge * I``.

    Curvature pairs ``(s, y)`` are kept in full space: ``s`` is the committed
    step and ``y`` the change of the partial gradient on the subset where the
    step was taken.  The restriction of the full compact BFGS matrix to
    ``S`` is its principal minor, which stays positive definite.
    """

    name = "lbfgs"

    def __init__(self, memory: int = 10, ridge: float = 1e-6):
        if memory < 1:
            raise ValueError("memory must be at least 1")
        if not ridge > 0:
            raise ValueError("L-BFGS ridge must be strictly positive")
        self.memory = int(memory)
        self.ridge = float(ridge)
        self.reset()

    def reset(self):
        self._s: list[np.ndarray] = []
        self._y: list[np.ndarray] = []

    @property
    def pairs(self) -> int:
        return len(self._s)

    def observe_step(self, state, S, step, grad_before):
        grad_after = state.partial_gradient(S)
        y_loc = grad_after - grad_before
        sy = float(step @ y_loc)
        if not sy > 1e-10 * np.linalg.norm(step) * np.linalg.norm(y_loc):
            return
        s = np.zeros(state.problem.N)
        y = np.zeros(state.problem.N)
        s[S] = step
        y[S] = y_loc
        self._s.append(s)
        self._y.append(y)
        if len(self._s) > self.memory:
            self._s.pop(0)
            self._y.pop(0)

    def _compact(self, S):
        """Scaling ``gamma``, restricted factor ``W_S`` and middle matrix ``M``."""
        Smat = np.array(self._s)
        Ymat = np.array(self._y)
        s_last, y_last = Smat[-1], Ymat[-1]
        gamma = float(y_last @ y_last) / float(s_last @ y_last)
        SY = Smat @ Ymat.T
        low = np.tril(SY, -1)
        D = np.diag(np.diag(SY))
        M = np.block([[gamma * (Smat @ Smat.T), low], [low.T, -D]])
        W_S = np.hstack([gamma * Smat[:, S].T, Ymat[:, S].T])
        return gamma, W_S, M

    def build(self, state, S, grad=None):
        grad, xs, L_S = self._base(state, S, grad)
        tau = len(S)
        rho = self.ridge
        if not self._s:
            c = 1.0 + rho
            return SubproblemModel(S, xs, grad, state.reg, rho, c, L_S, matrix=np.eye(tau) * c)
        gamma, W_S, M = self._compact(S)
        Minv_WT = np.linalg.solve(M, W_S.T)
        if tau <= DENSE_BLOCK_MAX_TAU:
            B = -W_S @ Minv_WT
            B = 0.5 * (B + B.T)
            B[np.diag_indices(tau)] += gamma + rho
            Lam = largest_eigenvalue(B)
            return SubproblemModel(S, xs, grad, state.reg, rho, max(Lam, rho), L_S, matrix=B)

        def op(v):
            return (gamma + rho) * v - W_S @ (Minv_WT @ v)

        Lam = power_iteration_bound(op, tau)
        return SubproblemModel(S, xs, grad, state.reg, rho, max(Lam, rho), L_S, op=op)

    def describe(self):
        return {"kind": self.name, "memory": self.memory, "ridge": self.ridge}


def build_model(state: ProblemState, S, strategy: CurvatureStrategy, grad=None) -> SubproblemModel:
    return strategy.build(state, np.asarray(S, dtype=np.intp), grad)


def make_strategy(kind: str, ridge: float | None = None, memory: int = 10, nu=None) -> CurvatureStrategy:
    """Strategy from a CLI-style name (``identity``, ``scaled``, ``lipschitz``, ``diag``, ``minor``, ``lbfgs``)."""
    kind = kind.lower()
    if kind == "identity":
        return Identity()
    if kind == "scaled":
        return ScaledIdentity("lipschitz" if nu is None else nu)
    if kind == "lipschitz":
        return CoordinateLipschitz()
    if kind == "diag":
        return DiagonalHessian(0.0 if ridge is None else ridge)
    if kind == "minor":
        return PrincipalMinor(1e-6 if ridge is None else ridge)
    if kind == "lbfgs":
        return LimitedMemoryQN(memory, 1e-6 if ridge is None else ridge)
    raise ValueError(f"unknown curvature strategy {kind!r}")
