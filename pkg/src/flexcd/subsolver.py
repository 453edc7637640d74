"""Inexact minimisation of subset models with certified stopping.

A direction ``t`` is accepted when the model strictly decreases and

    dist(g_S(t), dQ_S(t))^2 + ||g_S(t)||^2 <= (eta * ||g_S(0)||)^2,

where ``g_S`` is the stationarity residual of the model.  All solvers here
return a :class:`DirectionCertificate` carrying that evidence.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .model import SubproblemModel, model_value_delta, projection_distance, stationarity_residual

# relative roundoff slack in the residual test, scaled by the magnitudes involved
CERT_ROUNDOFF = 1e-13
# subsets whose residual at t=0 is this small (relative to x_S) are treated as stationary
SKIP_RTOL = 1e-14
# lenient mode retries with this many times the inner budget before giving up
LENIENT_RETRY_FACTOR = 10

INNER_KINDS = ("auto", "closed", "cg", "prox")


class CertificateError(RuntimeError):
    """No direction passing both stopping conditions was found within budget."""


def admissible_eta_cs(eta: float) -> float:
    """Largest ``e`` with ``e / (1 - e)^2 <= eta`` (the admission rule of the smooth convex bound)."""
    if eta <= 0:
        return 0.0
    return ((2 * eta + 1) - math.sqrt(4 * eta + 1)) / (2 * eta)


@dataclass(frozen=True)
class InexactnessPolicy:
    """How accurately subset models are solved.

    Parameters
    ----------
    eta : float
        Forcing parameter in ``[0, 1)`` of the residual test.
    max_inner : int, optional
        Inner-iteration budget (coordinate updates or CG steps); defaults to
        ``50 * tau``.
    inner : {"auto", "closed", "cg", "prox"}
        Inner solver.  ``auto`` picks the closed form for diagonal models,
        CG for smooth problems and proximal coordinate descent otherwise.
    strict : bool
        Raise :class:`CertificateError` instead of retrying when the budget
        is exhausted.
    admission : {"cap", "ratio"}
        ``cap`` uses ``eta`` directly; ``ratio`` uses the largest ``e`` with
        ``e / (1 - e)^2 <= eta``.
    """

    eta: float = 0.9
    max_inner: int | None = None
    inner: str = "auto"
    strict: bool = False
    admission: str = "cap"

    def __post_init__(self):
        if not 0.0 <= self.eta < 1.0:
            raise ValueError("eta must lie in [0, 1)")
        if self.inner not in INNER_KINDS:
            raise ValueError(f"inner solver must be one of {INNER_KINDS}")
        if self.admission not in ("cap", "ratio"):
            raise ValueError("admission must be 'cap' or 'ratio'")
        if self.max_inner is not None and self.max_inner < 1:
            raise ValueError("max_inner must be positive")

    @property
    def effective_eta(self) -> float:
        return self.eta if self.admission == "cap" else admissible_eta_cs(self.eta)

    def budget(self, tau: int) -> int:
        return self.max_inner if self.max_inner is not None else 50 * tau


@dataclass
class DirectionCertificate:
    t: np.ndarray
    model_delta: float
    residual_norm: float
    baseline_norm: float
    projection_distance: float
    inner_iterations: int
    passed: bool
    eta: float
    decrease_ok: bool = True
    exact: bool = False
    fallback: bool = False

    @property
    def t_norm(self) -> float:
        return float(np.linalg.norm(self.t))


def baseline_norm(model: SubproblemModel) -> float:
    """``||g_S(x; 0)||``."""
    return float(np.linalg.norm(stationarity_residual(model, np.zeros(model.tau), np.zeros(model.tau))))


def is_subset_stationary(model: SubproblemModel, g0_norm: float) -> bool:
    return g0_norm <= SKIP_RTOL * max(1.0, float(np.linalg.norm(model.x_S)))


def check_certificates(model: SubproblemModel, t, policy: InexactnessPolicy, g0_norm=None,
                       Ht=None, inner_iterations: int = 0):
    """Evaluate both stopping conditions at ``t``.

    Returns ``(passed, certificate)``.
    """
    t = np.asarray(t, dtype=float)
    if Ht is None:
        Ht = model.apply_H(t)
    if g0_norm is None:
        g0_norm = baseline_norm(model)
    eta = policy.effective_eta
    delta = model_value_delta(model, t, Ht)
    res = float(np.linalg.norm(stationarity_residual(model, t, Ht)))
    dist = projection_distance(model, t, Ht)
    scale = float(np.linalg.norm(model.grad) + np.linalg.norm(Ht) + np.linalg.norm(model.x_S + t))
    slack = (CERT_ROUNDOFF * scale) ** 2
    decrease_ok = delta < 0.0
    passed = decrease_ok and dist * dist + res * res <= (eta * g0_norm) ** 2 + slack
    cert = DirectionCertificate(
        t=t, model_delta=delta, residual_norm=res, baseline_norm=g0_norm,
        projection_distance=dist, inner_iterations=inner_iterations, passed=passed,
        eta=eta, decrease_ok=decrease_ok,
    )
    return passed, cert


def solve_closed_form_diagonal(model: SubproblemModel, policy: InexactnessPolicy | None = None,
                               g0_norm=None) -> DirectionCertificate:
    """Exact minimiser of a model with diagonal curvature, one scalar prox per coordinate."""
    if model.diag is None:
        raise ValueError("closed-form solve requires a diagonal curvature model")
    policy = policy or InexactnessPolicy()
    d = model.diag
    t = model.reg.prox(model.x_S - model.grad / d, d) - model.x_S
    _, cert = check_certificates(model, t, policy, g0_norm, d * t, inner_iterations=1)
    cert.exact = True
    return cert


def solve_cg_smooth(model: SubproblemModel, policy: InexactnessPolicy | None = None,
                    g0_norm=None) -> DirectionCertificate:
    """Conjugate gradients on ``H t = -grad`` from ``t = 0``.

    Stops at the first iterate with ``||grad + H t|| <= eta ||grad||`` or
    after ``tau`` steps, then rescales ``t`` to the exact minimiser of the
    model along its own direction.
    """
    if not model.reg.is_zero:
        raise ValueError("CG inner solver applies only when the regularizer is zero")
    policy = policy or InexactnessPolicy()
    g = model.grad
    gnorm = float(np.linalg.norm(g))
    if gnorm == 0.0:
        raise ValueError("CG inner solver needs a nonzero partial gradient")
    eta = policy.effective_eta
    tau = model.tau
    t = np.zeros(tau)
    Ht = np.zeros(tau)
    r = -g.copy()
    p = r.copy()
    rr = float(r @ r)
    steps = 0
    for steps in range(1, min(tau, policy.budget(tau)) + 1):
        Hp = model.apply_H(p)
        pHp = float(p @ Hp)
        if not pHp > 0:
            break
        a = rr / pHp
        t += a * p
        Ht += a * Hp
        r -= a * Hp
        rr_new = float(r @ r)
        if math.sqrt(rr_new) <= eta * gnorm or rr_new == 0.0:
            break
        p = r + (rr_new / rr) * p
        rr = rr_new
    tHt = float(t @ Ht)
    if tHt > 0:
        # exact step along t restores <Ht, t> = -<g, t>, which drifts as CG loses orthogonality
        beta = -float(g @ t) / tHt
        t *= beta
        Ht *= beta
    _, cert = check_certificates(model, t, policy, g0_norm if g0_norm is not None else gnorm,
                                 Ht, inner_iterations=steps)
    return cert


def _prox_cd_sweeps(model, policy, t, Ht, h, g0_norm, max_updates, start_updates=0):
    """Cyclic proximal coordinate descent on a model with an explicit matrix.

    Checks the certificate after every sweep.  Returns the last certificate,
    the iterate, ``H t`` and the update count.
    """
    H = model.matrix
    reg = model.reg
    grad = model.grad
    x = model.x_S
    tau = model.tau
    updates = start_updates
    cert = None
    cols = [H[:, i] for i in range(tau)]
    tl = t.tolist()
    while updates < max_updates:
        for i in range(tau):
            hi = h[i]
            cur = x[i] + tl[i]
            z = cur - (grad[i] + Ht[i]) / hi
            new = reg.prox_scalar(z, hi)
            step = new - cur
            if step != 0.0:
                tl[i] += step
                Ht += step * cols[i]
        updates += tau
        t = np.array(tl)
        passed, cert = check_certificates(model, t, policy, g0_norm, Ht, inner_iterations=updates)
        if passed:
            break
    return cert, t, Ht, updates


def _prox_gradient_sweeps(model, policy, t, g0_norm, max_updates, start_updates=0):
    """Proximal gradient steps with step ``1/Lam`` for matrix-free models."""
    Lam = model.Lam
    x = model.x_S
    updates = start_updates
    cert = None
    Ht = model.apply_H(t)
    while updates < max_updates:
        t = model.reg.prox(x + t - (model.grad + Ht) / Lam, Lam) - x
        Ht = model.apply_H(t)
        updates += model.tau
        passed, cert = check_certificates(model, t, policy, g0_norm, Ht, inner_iterations=updates)
        if passed:
            break
    return cert, t, Ht, updates


def solve_proximal_inner(model: SubproblemModel, policy: InexactnessPolicy | None = None,
                         g0_norm=None) -> DirectionCertificate:
    """Proximal coordinate descent on ``Q_S`` until both certificates hold.

    Diagonal models are solved in closed form.  When the budget runs out,
    strict policies raise :class:`CertificateError`; lenient ones retry with
    a larger budget and, failing that, return the best iterate with
    ``fallback=True`` provided it still decreases the model.
    """
    policy = policy or InexactnessPolicy()
    if model.diag is not None:
        return solve_closed_form_diagonal(model, policy, g0_norm)
    if g0_norm is None:
        g0_norm = baseline_norm(model)
    tau = model.tau
    budget = policy.budget(tau)
    t = np.zeros(tau)
    if model.matrix is not None:
        h = np.maximum(np.diag(model.matrix), model.lam)

        def run(t, Ht, limit, start):
            return _prox_cd_sweeps(model, policy, t, Ht, h, g0_norm, limit, start)
    else:
        def run(t, Ht, limit, start):
            return _prox_gradient_sweeps(model, policy, t, g0_norm, limit, start)

    cert, t, Ht, used = run(t, np.zeros(tau), budget, 0)
    if cert.passed:
        return cert
    if policy.strict:
        raise CertificateError(
            f"stopping conditions unmet after {used} inner updates "
            f"(residual {cert.residual_norm:.3e}, baseline {cert.baseline_norm:.3e})"
        )
    cert, t, Ht, used = run(t, Ht, LENIENT_RETRY_FACTOR * budget, used)
    if cert.passed:
        return cert
    if cert.decrease_ok:
        warnings.warn("inner solve did not certify the direction; using best iterate", RuntimeWarning)
        cert.fallback = True
    return cert


def solve_direction(model: SubproblemModel, policy: InexactnessPolicy, g0_norm=None) -> DirectionCertificate:
    """Dispatch to the inner solver selected by ``policy``."""
    kind = policy.inner
    if kind == "auto":
        if model.diag is not None:
            kind = "closed"
        elif model.reg.is_zero:
            kind = "cg"
        else:
            kind = "prox"
    if kind == "closed":
        return solve_closed_form_diagonal(model, policy, g0_norm)
    if kind == "cg":
        cert = solve_cg_smooth(model, policy, g0_norm)
        if not cert.passed and not policy.strict:
            # CG capped at tau steps; finish with proximal sweeps from scratch
            return solve_proximal_inner(model, policy, g0_norm)
        if not cert.passed:
            raise CertificateError("CG direction failed the stopping conditions")
        return cert
    return solve_proximal_inner(model, policy, g0_norm)
