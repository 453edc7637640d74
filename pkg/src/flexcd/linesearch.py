"""Backtracking line search with a sufficient-decrease test."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problem import ProblemState


class LineSearchError(RuntimeError):
    """Backtracking ran out of trials without accepting a step."""


@dataclass(frozen=True)
class LineSearchConfig:
    """Halving search from ``alpha = 1``.

    A step is accepted once the decrease of ``F`` is at least ``theta``
    times the decrease of the linearised loss.
    """

    theta: float = 1e-3
    max_backtracks: int = 200
    shrink: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.theta < 1.0:
            raise ValueError("theta must lie in (0, 1)")
        if self.max_backtracks < 0:
            raise ValueError("max_backtracks must be nonnegative")
        if self.shrink != 0.5:
            raise ValueError("only exact halving is supported")


@dataclass
class LineSearchResult:
    alpha: float
    backtracks: int
    decrease: float
    model_decrease: float


def loss_delta(state: ProblemState, S, t, alpha: float, grad) -> float:
    """Decrease of the linearised loss ``f + <grad f, .> + Psi`` along ``alpha * U_S t``."""
    t = np.asarray(t, dtype=float)
    xs = state.x[S]
    reg = state.reg
    return -alpha * float(grad @ t) + reg.value(xs) - reg.value(xs + alpha * t)


def backtrack(state: ProblemState, S, t, grad, config: LineSearchConfig) -> LineSearchResult:
    """First ``alpha`` in ``1, 1/2, 1/4, ...`` passing the sufficient-decrease test.

    Raises
    ------
    LineSearchError
        If ``max_backtracks`` halvings do not produce an acceptable step.
    """
    alpha = 1.0
    theta = config.theta
    t = np.asarray(t, dtype=float)
    xs = state.x[S]
    reg = state.reg
    psi0 = reg.value(xs)
    gt = float(grad @ t)
    for j in range(config.max_backtracks + 1):
        dpsi = psi0 - reg.value(xs + alpha * t)
        rhs = dpsi - alpha * gt
        lhs = state.loss_decrease(S, t, alpha) + dpsi
        if lhs >= theta * rhs:
            return LineSearchResult(alpha, j, lhs, rhs)
        alpha *= 0.5
    raise LineSearchError(f"no acceptable step after {config.max_backtracks} halvings")


def worst_case_trials(alpha_floor: float) -> int:
    """Upper bound on trials when every step at or below ``alpha_floor`` is accepted."""
    if not 0 < alpha_floor:
        raise ValueError("alpha_floor must be positive")
    return int(np.ceil(np.log2(1.0 / alpha_floor))) + 1 if alpha_floor < 1 else 1
