"""Outer loops: flexible coordinate descent and the uniform coordinate descent baseline."""
from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .linesearch import LineSearchConfig, LineSearchError, backtrack
from .model import CoordinateLipschitz, CurvatureStrategy, DiagonalHessian, stationarity_residual
from .problem import CompositeProblem, ProblemState
from .sampling import TauNiceSampler, make_rng
from .subsolver import InexactnessPolicy, is_subset_stationary, solve_direction

CSV_COLUMNS = ("k", "F", "alpha", "backtracks", "inner_iters", "res_norm", "time_s")
# predicted decreases below this multiple of max(1, |F|) cannot be resolved in floating point
PRECISION_FLOOR = 1e-15


class SolverError(RuntimeError):
    """A run failed; the partial trace is attached as ``trace``."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


@dataclass
class FcdConfig:
    """Settings of one run.

    ``refresh_every`` defaults to ``10 * N / tau`` commits.  With
    ``instrument=True`` the per-step bounds are checked while running and
    violations are counted in the trace.
    """

    tau: int = 1
    seed: int = 0
    strategy: CurvatureStrategy = field(default_factory=DiagonalHessian)
    policy: InexactnessPolicy = field(default_factory=InexactnessPolicy)
    linesearch: LineSearchConfig = field(default_factory=LineSearchConfig)
    max_iters: int = 1000
    max_time: float | None = None
    stat_tol: float = 1e-8
    refresh_every: int | None = None
    instrument: bool = False

    def __post_init__(self):
        if self.tau < 1:
            raise ValueError("tau must be at least 1")
        if self.max_iters < 1:
            raise ValueError("iteration budget must be positive")
        if self.max_time is not None and not self.max_time > 0:
            raise ValueError("time budget must be positive")

    def snapshot(self) -> dict:
        return {
            "tau": self.tau,
            "seed": self.seed,
            "strategy": self.strategy.describe(),
            "policy": asdict(self.policy),
            "linesearch": asdict(self.linesearch),
            "max_iters": self.max_iters,
            "max_time": self.max_time,
            "stat_tol": self.stat_tol,
            "refresh_every": self.refresh_every,
            "instrument": self.instrument,
        }


@dataclass(slots=True)
class IterationRecord:
    k: int
    tau: int
    F: float
    alpha: float
    backtracks: int
    inner_iters: int
    res_norm: float
    time_s: float
    model_delta: float = 0.0
    base_norm: float = 0.0
    proj_dist: float = 0.0
    t_norm: float = 0.0
    decrease: float = 0.0
    lam: float = float("nan")
    Lam: float = float("nan")
    L_S: float = float("nan")
    linesearch_s: float = 0.0
    skipped: bool = False
    certified: bool = True


_RECORD_FIELDS = tuple(f.name for f in fields(IterationRecord))


@dataclass
class RunTrace:
    algorithm: str
    config: dict
    F0: float
    records: list = field(default_factory=list)
    x: np.ndarray | None = None
    reason: str = ""
    setup_time_s: float = 0.0
    violations: dict = field(default_factory=dict)

    @property
    def F(self) -> np.ndarray:
        return np.array([r.F for r in self.records])

    @property
    def F_final(self) -> float:
        return self.records[-1].F if self.records else self.F0

    def column(self, name) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    @property
    def committed(self) -> list:
        return [r for r in self.records if not r.skipped]

    def linesearch_fraction(self) -> float:
        if not self.records:
            return 0.0
        total = self.records[-1].time_s - self.setup_time_s
        return sum(r.linesearch_s for r in self.records) / total if total > 0 else 0.0

    def check_invariants(self, theta: float, eta: float, rtol: float = 1e-12) -> dict:
        """Count violations of the per-step guarantees over committed records.

        Checks monotone ``F``, the step-size floor, the direction-norm bound
        and both sufficient-decrease bounds.  Decrease bounds allow an
        absolute roundoff slack of ``rtol * max(1, |F|)``.
        """
        out = {"monotone": 0, "alpha_floor": 0, "direction_norm": 0,
               "decrease_t": 0, "decrease_g": 0, "checked": 0}
        prev = self.F0
        for r in self.records:
            slack = rtol * max(1.0, abs(prev))
            if r.F > prev + slack:
                out["monotone"] += 1
            prev = r.F
            if r.skipped or not r.certified or not np.isfinite(r.lam):
                continue
            out["checked"] += 1
            for key, ok in _step_checks(r, theta, eta, slack).items():
                out[key] += int(not ok)
        return out

    # -- serialisation ------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "config": self.config,
            "F0": self.F0,
            "reason": self.reason,
            "setup_time_s": self.setup_time_s,
            "violations": self.violations,
            "x": None if self.x is None else self.x.tolist(),
            "records": {name: [getattr(r, name) for r in self.records] for name in _RECORD_FIELDS},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), default=_json_default)

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.records:
            w.writerow([r.k, repr(r.F), repr(r.alpha), r.backtracks, r.inner_iters,
                        repr(r.res_norm), f"{r.time_s:.6f}"])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.csv_text())

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def step_bounds(lam, Lam, L_S, theta, eta):
    """Step-size floor, direction-norm factor and decrease coefficient for one subset."""
    alpha_floor = (1.0 - theta) * lam / (2.0 * L_S)
    gamma = (1.0 - eta) / (1.0 + 2.0 * Lam)
    coef = theta * (1.0 - theta) * lam * lam / (4.0 * L_S)
    return alpha_floor, gamma, coef


def _step_checks(r: IterationRecord, theta, eta, slack) -> dict:
    alpha_floor, gamma, coef = step_bounds(r.lam, r.Lam, r.L_S, theta, eta)
    return {
        "alpha_floor": r.alpha >= alpha_floor * (1 - 1e-12),
        "direction_norm": r.t_norm >= gamma * r.base_norm * (1 - 1e-12),
        "decrease_t": r.decrease > coef * r.t_norm ** 2 - slack,
        "decrease_g": r.decrease > coef * (gamma * r.base_norm) ** 2 - slack,
    }


def full_stationarity(state: ProblemState) -> float:
    """``||grad f + prox_{Psi*}(x - grad f)||_inf`` relative to ``max(1, ||x||_inf)``."""
    g = state.full_gradient()
    res = g + state.reg.conj_prox(state.x - g)
    return float(np.max(np.abs(res))) / max(1.0, float(np.max(np.abs(state.x))))


def _refresh_period(config: FcdConfig, N: int) -> int:
    if config.refresh_every is not None:
        return config.refresh_every
    return max(1, int(10 * N / config.tau))


def fcd_run(problem: CompositeProblem, config: FcdConfig, x0=None, callback=None) -> RunTrace:
    """Run flexible coordinate descent.

    Each iteration samples a subset, builds the model, finds a certified
    direction, backtracks and commits.  Stops at the iteration or time
    budget, or once the full stationarity residual drops below
    ``config.stat_tol``.

    Raises
    ------
    SolverError
        On certificate or line-search failure; the trace so far is attached.
    """
    N = problem.N
    if config.tau > N:
        raise ValueError(f"tau={config.tau} exceeds N={N}")
    tau = config.tau
    theta = config.linesearch.theta
    eta = config.policy.effective_eta
    strategy = config.strategy
    strategy.reset()
    state = problem.start(x0, _refresh_period(config, N))
    sampler = TauNiceSampler(N, tau, config.seed)
    trace = RunTrace("fcd", config.snapshot(), state.F)
    check_period = max(1, math.ceil(N / tau))
    stall_limit = check_period
    t_start = time.perf_counter()
    deadline = None if config.max_time is None else t_start + config.max_time
    stall = 0

    if full_stationarity(state) <= config.stat_tol:
        trace.reason = "stationary"
        trace.x = state.x.copy()
        return trace

    for k in range(1, config.max_iters + 1):
        if deadline is not None and time.perf_counter() > deadline:
            trace.reason = "time"
            break
        S = sampler.sample()
        try:
            model = strategy.build(state, S)
            g0 = float(np.linalg.norm(stationarity_residual(model, np.zeros(tau), np.zeros(tau))))
            cert = None
            if not is_subset_stationary(model, g0):
                cert = solve_direction(model, config.policy, g0)
        except Exception as exc:
            trace.x = state.x.copy()
            trace.reason = "error"
            raise SolverError(f"iteration {k}: {exc}", trace) from exc

        usable = cert is not None and cert.decrease_ok and (cert.passed or cert.fallback or cert.exact)
        rec = None
        if usable:
            t = cert.t
            # the row products of U_S t are needed by the commit whatever the step size
            state.prepare_direction(S, t)
            ls0 = time.perf_counter()
            try:
                ls = backtrack(state, S, t, model.grad, config.linesearch)
            except LineSearchError as exc:
                ls = None
                pred = -float(model.grad @ t) + model.reg.value(model.x_S) - model.reg.value(model.x_S + t)
                if pred > PRECISION_FLOOR * max(1.0, abs(state.F)):
                    trace.x = state.x.copy()
                    trace.reason = "error"
                    raise SolverError(f"iteration {k}: {exc}", trace) from exc
            ls_time = time.perf_counter() - ls0
            if ls is not None and not ls.decrease > 0.0:
                # roundoff swamped the decrease; committing could only raise F
                ls = None
            if ls is not None:
                realised = state.commit(S, t, ls.alpha)
                strategy.observe_step(state, S, ls.alpha * t, model.grad)
                rec = IterationRecord(
                    k=k, tau=tau, F=state.F, alpha=ls.alpha, backtracks=ls.backtracks,
                    inner_iters=cert.inner_iterations, res_norm=cert.residual_norm,
                    time_s=time.perf_counter() - t_start, model_delta=cert.model_delta,
                    base_norm=g0, proj_dist=cert.projection_distance, t_norm=cert.t_norm,
                    decrease=realised, lam=model.lam, Lam=model.Lam, L_S=model.L_S,
                    linesearch_s=ls_time, certified=cert.passed,
                )
                stall = 0
        if rec is None:
            stall += 1
            rec = IterationRecord(
                k=k, tau=tau, F=state.F, alpha=0.0, backtracks=0,
                inner_iters=0 if cert is None else cert.inner_iterations,
                res_norm=g0, time_s=time.perf_counter() - t_start, base_norm=g0,
                skipped=True, certified=False,
            )
        trace.records.append(rec)
        if config.instrument and not rec.skipped and rec.certified:
            slack = 1e-12 * max(1.0, abs(rec.F))
            for key, ok in _step_checks(rec, theta, eta, slack).items():
                if not ok:
                    trace.violations[key] = trace.violations.get(key, 0) + 1
        if callback is not None:
            callback(k, state, rec)
        if stall >= stall_limit or k % check_period == 0:
            if full_stationarity(state) <= config.stat_tol:
                trace.reason = "stationary"
                break
            stall = 0
    else:
        trace.reason = "iterations"
    trace.x = state.x.copy()
    return trace


# ---------------------------------------------------------------------------
# uniform coordinate descent baseline


@dataclass
class UcdcConfig:
    """Uniform coordinate descent for composite functions.

    ``variant="v1"`` updates one coordinate with curvature ``L_i``;
    ``variant="v2"`` fixes a partition into blocks of size ``tau`` and uses
    ``(sum_{j in block} L_j) I``.  Steps are exact model minimisers with unit
    step size.
    """

    variant: str = "v1"
    tau: int = 1
    seed: int = 0
    max_iters: int = 1000
    max_time: float | None = None
    stat_tol: float = 1e-8
    refresh_every: int | None = None

    def __post_init__(self):
        if self.variant not in ("v1", "v2"):
            raise ValueError("variant must be 'v1' or 'v2'")
        if self.variant == "v1":
            self.tau = 1
        if self.tau < 1 or self.max_iters < 1:
            raise ValueError("tau and max_iters must be positive")

    def snapshot(self) -> dict:
        return asdict(self)


def ucdc_run(problem: CompositeProblem, config: UcdcConfig, x0=None, callback=None) -> RunTrace:
    """Run the uniform coordinate descent baseline; ``alpha = 1`` always, no line search."""
    N = problem.N
    tau = min(config.tau, N)
    t_start = time.perf_counter()
    lips = problem.lipschitz()
    setup = time.perf_counter() - t_start
    refresh = config.refresh_every or max(1, int(10 * N / tau))
    state = problem.start(x0, refresh)
    trace = RunTrace(f"ucdc-{config.variant}", config.snapshot(), state.F, setup_time_s=setup)
    check_period = max(1, math.ceil(N / tau))
    deadline = None if config.max_time is None else t_start + config.max_time

    if config.variant == "v1":
        sampler = TauNiceSampler(N, 1, config.seed)
        draw = sampler.sample
    else:
        blocks = np.array_split(np.arange(N, dtype=np.intp), math.ceil(N / tau))
        rng = make_rng(config.seed)

        def draw():
            return blocks[int(rng.integers(len(blocks)))]

    if full_stationarity(state) <= config.stat_tol:
        trace.reason = "stationary"
        trace.x = state.x.copy()
        return trace

    reg = problem.reg
    for k in range(1, config.max_iters + 1):
        if deadline is not None and time.perf_counter() > deadline:
            trace.reason = "time"
            break
        S = draw()
        grad = state.partial_gradient(S)
        L_S = float(lips[S].sum())
        h = lips[S] if config.variant == "v1" else np.full(len(S), L_S)
        xs = state.x[S]
        t = reg.prox(xs - grad / h, h) - xs
        if np.any(t) and state.delta_F(S, t, 1.0) > 0.0:
            realised = state.commit(S, t, 1.0)
            skipped = False
        else:
            realised = 0.0
            skipped = True
        trace.records.append(IterationRecord(
            k=k, tau=len(S), F=state.F, alpha=0.0 if skipped else 1.0, backtracks=0,
            inner_iters=1, res_norm=float(np.linalg.norm(h * t)),
            time_s=setup + time.perf_counter() - t_start, t_norm=float(np.linalg.norm(t)),
            decrease=realised, lam=float(h.min()), Lam=float(h.max()), L_S=L_S,
            skipped=skipped, certified=False,
        ))
        if callback is not None:
            callback(k, state, trace.records[-1])
        if k % check_period == 0 and full_stationarity(state) <= config.stat_tol:
            trace.reason = "stationary"
            break
    else:
        trace.reason = "iterations"
    trace.x = state.x.copy()
    return trace


def fcd_v1_config(N: int, **kw) -> FcdConfig:
    """Diagonal-Hessian variant with closed-form directions; ``tau = ceil(0.001 N)`` by default."""
    kw.setdefault("tau", max(1, math.ceil(0.001 * N)))
    kw.setdefault("strategy", DiagonalHessian(0.0))
    kw.setdefault("policy", InexactnessPolicy(eta=0.9, inner="closed"))
    return FcdConfig(**kw)


def fcd_v2_config(N: int, **kw) -> FcdConfig:
    """Principal-minor variant with ridge ``1e-6`` and the proximal inner solver."""
    from .model import PrincipalMinor

    kw.setdefault("tau", max(1, math.ceil(0.001 * N)))
    kw.setdefault("strategy", PrincipalMinor(1e-6))
    kw.setdefault("policy", InexactnessPolicy(eta=0.9, inner="prox"))
    return FcdConfig(**kw)


def fcd_lipschitz_config(**kw) -> FcdConfig:
    """Single-coordinate variant whose curvature is ``L_i``: the uniform-descent special case."""
    kw.setdefault("tau", 1)
    kw.setdefault("strategy", CoordinateLipschitz())
    kw.setdefault("policy", InexactnessPolicy(eta=0.0, inner="closed"))
    return FcdConfig(**kw)


__all__ = [
    "CSV_COLUMNS", "FcdConfig", "IterationRecord", "RunTrace", "SolverError", "UcdcConfig",
    "fcd_run", "ucdc_run", "fcd_v1_config", "fcd_v2_config", "fcd_lipschitz_config",
    "full_stationarity", "step_bounds",
]
