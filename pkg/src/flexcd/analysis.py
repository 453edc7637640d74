"""Complexity constants, iteration bounds and their Monte-Carlo validation.

The per-subset constants ``lam_S``, ``Lam_S`` and ``L_S`` are replaced by
global surrogates (smallest ``lam``, largest ``Lam`` and ``L``).  ``chi``
grows with ``lam`` and shrinks with ``L`` and ``Lam``, so the surrogate
value never exceeds the minimum over subsets and the resulting iteration
counts stay valid, only more conservative.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from .driver import FcdConfig, fcd_run
from .model import (
    CoordinateLipschitz,
    CurvatureStrategy,
    DiagonalHessian,
    Identity,
    PrincipalMinor,
    ScaledIdentity,
)
from .problem import CompositeProblem, eval_F
from .losses import QuadraticLoss

BOUND_TAGS = ("C-N-i", "C-N-ii", "SC-N", "C-S", "SC-S")


@dataclass
class ComplexityConstants:
    lam_min: float
    Lam_max: float
    L_max: float
    theta: float
    eta: float
    mu_f: float = 0.0
    mu_F: float = 0.0

    @property
    def gamma_min(self) -> float:
        return (1.0 - self.eta) / (1.0 + 2.0 * self.Lam_max)

    @property
    def alpha_min(self) -> float:
        return (1.0 - self.theta) * self.lam_min / (2.0 * self.L_max)

    @property
    def chi(self) -> float:
        return compute_chi(self.lam_min, self.Lam_max, self.L_max, self.eta, self.theta)

    @property
    def vartheta(self) -> float:
        return compute_vartheta(self.lam_min, self.Lam_max, self.L_max, self.eta, self.theta)

    @property
    def delta(self) -> float:
        return compute_delta(self.mu_f, self.mu_F, self.Lam_max)

    def to_dict(self) -> dict:
        out = asdict(self)
        out.update(gamma_min=self.gamma_min, alpha_min=self.alpha_min, chi=self.chi)
        return out


def compute_chi(lam: float, Lam: float, L: float, eta: float, theta: float) -> float:
    """Decrease constant of the nonsmooth bounds.

    ``theta (1-theta) lam^3 gamma^2 / (2 L (eta^2 + lam gamma^2 (L - (1-theta) lam)))``
    with ``gamma = (1 - eta) / (1 + 2 Lam)``.
    """
    if not lam > 0:
        raise ValueError("lam must be positive")
    if lam > L * (1 + 1e-12):
        raise ValueError("lam must not exceed L")
    if not 0 <= eta < 1:
        raise ValueError("eta must lie in [0, 1)")
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    gamma = (1.0 - eta) / (1.0 + 2.0 * Lam)
    g2 = gamma * gamma
    den = 2.0 * L * (eta * eta + lam * g2 * (L - (1.0 - theta) * lam))
    return theta * (1.0 - theta) * lam ** 3 * g2 / den


def compute_vartheta(lam: float, Lam: float, L: float, eta: float, theta: float) -> float:
    """Decrease constant of the smooth bounds, ``theta lam^2 (1-eta)^2 / (L Lam^2)``."""
    if not 0 < theta < 0.5:
        raise ValueError("theta must lie in (0, 1/2) for the smooth bounds")
    if not 0 <= eta < 1:
        raise ValueError("eta must lie in [0, 1)")
    if not (lam > 0 and Lam > 0 and L > 0):
        raise ValueError("lam, Lam and L must be positive")
    return theta * lam * lam * (1.0 - eta) ** 2 / (L * Lam * Lam)


def compute_delta(mu_f: float, mu_F: float, Lam_max: float) -> float:
    """Strong-convexity factor of the nonsmooth strongly convex bound; lies in (0, 1]."""
    if not 0 < mu_f <= mu_F * (1 + 1e-12):
        raise ValueError("need 0 < mu_f <= mu_F")
    if Lam_max < mu_f:
        raise ValueError("need Lam_max >= mu_f")
    if mu_F + mu_f < 2.0 * Lam_max:
        return (mu_f + mu_F) / (4.0 * Lam_max) * (1.0 + mu_f / mu_F)
    return 1.0 - (Lam_max - mu_f) / mu_F


def iteration_bound(tag: str, *, N: int, tau: int, eps: float, rho: float, gap: float,
                    chi: float | None = None, vartheta: float | None = None,
                    delta: float | None = None, radius: float | None = None,
                    mu_f: float | None = None, Lam_max: float | None = None) -> int:
    """Iterations ``K`` after which ``P(F(x_K) - F* <= eps) >= 1 - rho``.

    Parameters
    ----------
    tag : {"C-N-i", "C-N-ii", "SC-N", "C-S", "SC-S"}
        Convex / strongly convex, nonsmooth / smooth regime.
    gap : float
        ``F(x0) - F*``.
    radius : float
        Level-set radius; required by the convex bounds.
    Lam_max : float, optional
        For the convex nonsmooth bounds, multiplies the squared radius.
        Without it the squared radius is used as is.
    """
    if tag not in BOUND_TAGS:
        raise ValueError(f"unknown bound {tag!r}; choose from {BOUND_TAGS}")
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")
    if not (eps > 0 and gap > 0):
        raise ValueError("eps and the initial gap must be positive")
    if not 1 <= tau <= N:
        raise ValueError("tau must lie in [1, N]")

    def need(name, value):
        if value is None or not value > 0:
            raise ValueError(f"{tag} needs a positive {name}")
        return value

    if tag in ("C-N-i", "C-N-ii"):
        scale = 2.0 * N / (tau * need("chi", chi))
        r2 = need("radius", radius) ** 2 * (Lam_max if Lam_max is not None else 1.0)
        if tag == "C-N-i":
            if not eps < gap:
                raise ValueError("C-N-i needs eps < F(x0) - F*")
            m1 = max(r2, gap)
            K = scale * m1 / eps * (1.0 + math.log(1.0 / rho)) + 2.0 - scale * m1 / gap
        else:
            if not eps < min(r2, gap):
                raise ValueError("C-N-ii needs eps < min(R^2, F(x0) - F*)")
            K = scale * r2 / eps * math.log(gap / (eps * rho))
    elif tag == "SC-N":
        K = N / (tau * need("chi", chi) * need("delta", delta)) * math.log(gap / (eps * rho))
    elif tag == "C-S":
        r2 = need("radius", radius) ** 2
        if not eps < max(r2, gap):
            raise ValueError("C-S needs eps < max(R^2, f(x0) - f*)")
        c1 = 2.0 * N * r2 / (tau * need("vartheta", vartheta))
        K = c1 / eps * (1.0 + math.log(1.0 / rho)) + 2.0 - c1 / gap
    else:
        K = N / (tau * need("vartheta", vartheta) * need("mu_f", mu_f)) * math.log(gap / (eps * rho))
    return max(0, math.ceil(K))


def levelset_radius(problem: CompositeProblem, x0, x_star, F_star: float | None = None,
                    mu_F: float | None = None, samples: int = 200, seed: int = 0,
                    safety: float = 1.2) -> float:
    """Upper bound on ``max{||x - x*|| : F(x) <= F(x0)}``.

    With ``mu_F > 0`` this is ``sqrt(2 (F(x0) - F*) / mu_F)``.  Otherwise the
    boundary is located along random rays from ``x*`` and the largest
    distance found is inflated by ``safety``.

    Raises
    ------
    ValueError
        When the level set looks unbounded along some ray.
    """
    x0 = np.asarray(x0, dtype=float)
    x_star = np.asarray(x_star, dtype=float)
    F0 = eval_F(problem, x0)
    Fs = eval_F(problem, x_star) if F_star is None else F_star
    gap = max(F0 - Fs, 0.0)
    if mu_F is None:
        mu_F = problem.mu_F
    if mu_F is not None and mu_F > 0:
        return math.sqrt(2.0 * gap / mu_F)
    if gap == 0.0:
        return 0.0
    rng = np.random.default_rng(seed)
    best = float(np.linalg.norm(x0 - x_star))
    for _ in range(samples):
        d = rng.standard_normal(len(x_star))
        d /= np.linalg.norm(d)
        hi = max(best, 1.0)
        grow = 0
        while eval_F(problem, x_star + hi * d) <= F0:
            hi *= 2.0
            grow += 1
            if grow > 60:
                raise ValueError("level set appears unbounded")
        lo = 0.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if eval_F(problem, x_star + mid * d) <= F0:
                lo = mid
            else:
                hi = mid
        best = max(best, hi)
    return safety * best


def _strategy_bounds(problem: CompositeProblem, strategy: CurvatureStrategy, tau: int,
                     mu_f: float, L_f: float):
    """Global ``(lam_min, Lam_max)`` for strategies whose curvature is known a priori."""
    Ls = np.sort(problem.lipschitz())
    quadratic = isinstance(problem.loss, QuadraticLoss)
    if isinstance(strategy, Identity):
        return 1.0, 1.0
    if isinstance(strategy, ScaledIdentity):
        if strategy.nu == "lipschitz":
            return float(Ls[:tau].sum()), float(Ls[-tau:].sum())
        return float(strategy.nu), float(strategy.nu)
    if isinstance(strategy, CoordinateLipschitz):
        return float(Ls[0]), float(Ls[-1])
    if isinstance(strategy, DiagonalHessian) and quadratic:
        d = problem.loss.A.col_sq_norms
        return float(max(d.min() + strategy.ridge, 1e-12)), float(d.max() + strategy.ridge)
    if isinstance(strategy, PrincipalMinor) and quadratic:
        rho = strategy.ridge
        return mu_f + rho, min(L_f, float(Ls[-tau:].sum())) + rho
    raise ValueError(f"no a-priori curvature bounds for strategy {strategy.name!r} on this loss")


def estimate_constants(problem: CompositeProblem, strategy: CurvatureStrategy, tau: int,
                       theta: float, eta: float) -> ComplexityConstants:
    """Conservative global constants for a problem, strategy and block size."""
    mu_f_loss, L_f = problem.loss.hessian_spectrum()
    mu_f = problem.mu_f if problem.mu_f is not None else mu_f_loss
    mu_F = problem.mu_F if problem.mu_F is not None else mu_f + problem.reg.strong_convexity
    Ls = np.sort(problem.lipschitz())
    L_max = min(float(Ls[-tau:].sum()), L_f)
    lam, Lam = _strategy_bounds(problem, strategy, tau, mu_f, L_f)
    # the bounds assume lam <= L; a valid L can always be enlarged
    L_max = max(L_max, lam)
    return ComplexityConstants(lam, Lam, L_max, theta, eta, mu_f, mu_F)


@dataclass
class BoundReport:
    tag: str
    eps: float
    rho: float
    K: int
    trials: int
    successes: int
    threshold: float

    @property
    def frequency(self) -> float:
        return self.successes / self.trials if self.trials else 0.0

    @property
    def passed(self) -> bool:
        return self.frequency >= self.threshold

    def to_dict(self) -> dict:
        out = asdict(self)
        out.update(frequency=self.frequency, passed=self.passed)
        return out


def pass_threshold(rho: float, trials: int) -> float:
    """Success frequency needed to accept ``1 - rho`` under Monte-Carlo noise."""
    return (1.0 - rho) - 2.0 * math.sqrt(rho * (1.0 - rho) / trials)


def validate_bound(problem: CompositeProblem, config: FcdConfig, *, tag: str, K: int,
                   eps: float, rho: float, F_star: float, trials: int = 200,
                   x0=None, seed0: int = 0, workers: int = 4) -> BoundReport:
    """Run ``trials`` independently seeded runs of ``K`` iterations and count successes.

    A trial succeeds when ``F(x_K) - F* <= eps``.
    """
    if trials < 1:
        raise ValueError("trials must be positive")

    def one(i):
        if K == 0:
            F = eval_F(problem, np.zeros(problem.N) if x0 is None else x0)
        else:
            cfg = replace(config, seed=seed0 + i, max_iters=K)
            F = fcd_run(problem, cfg, x0=x0).F_final
        return F - F_star <= eps

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(one, range(trials)))
    else:
        outcomes = [one(i) for i in range(trials)]
    return BoundReport(tag, eps, rho, K, trials, int(sum(outcomes)), pass_threshold(rho, trials))


def one_step_ratios(problem: CompositeProblem, config: FcdConfig, F_star: float, *,
                    states: int = 40, resamples: int = 50, warm_max: int = 20,
                    seed0: int = 0) -> np.ndarray:
    """Ratios ``(F(x_{k+1}) - F*) / (F(x_k) - F*)`` over fresh one-step draws.

    Iterates ``x_k`` come from short runs of random length up to
    ``warm_max``; from each, ``resamples`` single iterations with new seeds
    are taken.
    """
    rng = np.random.default_rng(seed0)
    out = []
    for s in range(states):
        warm = int(rng.integers(0, warm_max + 1))
        if warm:
            x = fcd_run(problem, replace(config, seed=seed0 + 10_000 + s, max_iters=warm)).x
        else:
            x = np.zeros(problem.N)
        gap = eval_F(problem, x) - F_star
        if not gap > 0:
            continue
        for r in range(resamples):
            cfg = replace(config, seed=seed0 + 1_000_000 + s * resamples + r, max_iters=1)
            F1 = fcd_run(problem, cfg, x0=x).F_final
            out.append((F1 - F_star) / gap)
    return np.array(out)
