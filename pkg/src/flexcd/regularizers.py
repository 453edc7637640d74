"""Coordinate-separable convex regularizers.

Every regularizer is a sum of identical scalar terms ``psi(y)``, so all
operations act componentwise on arrays.  ``prox(z, h)`` solves the scalar
problem ``argmin_y psi(y) + (h/2)(y - z)^2`` with a positive curvature
weight ``h``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def soft_threshold(u, v):
    """``sign(u) * max(|u| - v, 0)``, componentwise."""
    return np.sign(u) * np.maximum(np.abs(u) - v, 0.0)


def _check_h(h):
    if np.any(np.asarray(h) <= 0):
        raise ValueError("prox curvature weight h must be strictly positive")


class Regularizer:
    """Base class; subclasses define the scalar term."""

    name = "base"

    def value(self, y) -> float:
        return float(np.sum(self.values(np.asarray(y, dtype=float))))

    def values(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def prox(self, z, h=1.0):
        raise NotImplementedError

    def prox_scalar(self, z: float, h: float) -> float:
        return float(self.prox(np.float64(z), h))

    def conj_prox(self, z):
        """Prox of the convex conjugate with unit step (Moreau identity)."""
        z = np.asarray(z, dtype=float)
        return z - self.prox(z, 1.0)

    def subdiff_project(self, point, target):
        """Closest element of the subdifferential at ``point`` to ``target``."""
        raise NotImplementedError

    def subdiff_interval(self, point):
        """Endpoints ``(lo, hi)`` of the subdifferential interval at ``point``."""
        raise NotImplementedError

    @property
    def strong_convexity(self) -> float:
        return 0.0

    @property
    def is_zero(self) -> bool:
        return False

    def describe(self) -> dict:
        return {"kind": self.name}


@dataclass(frozen=True)
class Zero(Regularizer):
    name = "zero"

    def values(self, y):
        return np.zeros_like(y)

    def prox(self, z, h=1.0):
        _check_h(h)
        return np.asarray(z, dtype=float) * 1.0

    def prox_scalar(self, z, h):
        return z

    def conj_prox(self, z):
        return np.zeros_like(np.asarray(z, dtype=float))

    def subdiff_interval(self, point):
        p = np.asarray(point, dtype=float)
        return np.zeros_like(p), np.zeros_like(p)

    def subdiff_project(self, point, target):
        return np.zeros_like(np.asarray(target, dtype=float))

    @property
    def is_zero(self):
        return True


@dataclass(frozen=True)
class L1(Regularizer):
    c: float = 1.0
    name = "l1"

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("l1 weight must be strictly positive")

    def values(self, y):
        return self.c * np.abs(y)

    def prox(self, z, h=1.0):
        _check_h(h)
        return soft_threshold(np.asarray(z, dtype=float), self.c / np.asarray(h, dtype=float))

    def prox_scalar(self, z, h):
        thr = self.c / h
        if z > thr:
            return z - thr
        if z < -thr:
            return z + thr
        return 0.0

    def conj_prox(self, z):
        return np.clip(np.asarray(z, dtype=float), -self.c, self.c)

    def subdiff_interval(self, point):
        p = np.asarray(point, dtype=float)
        lo = np.where(p > 0, self.c, -self.c)
        hi = np.where(p < 0, -self.c, self.c)
        return lo, hi

    def subdiff_project(self, point, target):
        lo, hi = self.subdiff_interval(point)
        return np.clip(np.asarray(target, dtype=float), lo, hi)

    def describe(self):
        return {"kind": self.name, "c": self.c}


@dataclass(frozen=True)
class SquaredL2(Regularizer):
    """``(w/2) y^2`` per coordinate."""

    w: float = 1.0
    name = "l2sq"

    def __post_init__(self):
        if not self.w > 0:
            raise ValueError("squared-l2 weight must be strictly positive")

    def values(self, y):
        return 0.5 * self.w * np.square(y)

    def prox(self, z, h=1.0):
        _check_h(h)
        h = np.asarray(h, dtype=float)
        return h * np.asarray(z, dtype=float) / (h + self.w)

    def prox_scalar(self, z, h):
        return h * z / (h + self.w)

    def conj_prox(self, z):
        return self.w * np.asarray(z, dtype=float) / (1.0 + self.w)

    def subdiff_interval(self, point):
        g = self.w * np.asarray(point, dtype=float)
        return g, g

    def subdiff_project(self, point, target):
        return self.w * np.asarray(point, dtype=float) + 0.0 * np.asarray(target, dtype=float)

    @property
    def strong_convexity(self):
        return self.w

    def describe(self):
        return {"kind": self.name, "w": self.w}


@dataclass(frozen=True)
class ElasticNet(Regularizer):
    """``c1 |y| + (c2/2) y^2`` per coordinate."""

    c1: float = 1.0
    c2: float = 1.0
    name = "elastic"

    def __post_init__(self):
        if not (self.c1 > 0 and self.c2 > 0):
            raise ValueError("elastic-net weights must be strictly positive")

    def values(self, y):
        return self.c1 * np.abs(y) + 0.5 * self.c2 * np.square(y)

    def prox(self, z, h=1.0):
        _check_h(h)
        h = np.asarray(h, dtype=float)
        return soft_threshold(h * np.asarray(z, dtype=float), self.c1) / (h + self.c2)

    def prox_scalar(self, z, h):
        hz = h * z
        if hz > self.c1:
            return (hz - self.c1) / (h + self.c2)
        if hz < -self.c1:
            return (hz + self.c1) / (h + self.c2)
        return 0.0

    def subdiff_interval(self, point):
        p = np.asarray(point, dtype=float)
        lo = np.where(p > 0, self.c1, -self.c1) + self.c2 * p
        hi = np.where(p < 0, -self.c1, self.c1) + self.c2 * p
        return lo, hi

    def subdiff_project(self, point, target):
        lo, hi = self.subdiff_interval(point)
        return np.clip(np.asarray(target, dtype=float), lo, hi)

    @property
    def strong_convexity(self):
        return self.c2

    def describe(self):
        return {"kind": self.name, "c1": self.c1, "c2": self.c2}


def make_regularizer(kind: str, c: float = 1.0, c2: float | None = None) -> Regularizer:
    """Build a regularizer from a CLI-style name."""
    kind = kind.lower()
    if kind in ("zero", "none"):
        return Zero()
    if kind == "l1":
        return L1(c)
    if kind in ("l2sq", "l2", "ridge"):
        return SquaredL2(c)
    if kind in ("elastic", "elasticnet", "enet"):
        return ElasticNet(c, c if c2 is None else c2)
    raise ValueError(f"unknown regularizer {kind!r}")


def scalar_subgradient(reg: Regularizer, y: float, interior: float = 0.0) -> float:
    """A subgradient of the scalar term at ``y``.

    At the kink of an l1-type term, ``interior`` in [-1, 1] selects the point
    ``interior * c`` of the interval.
    """
    lo, hi = reg.subdiff_interval(np.float64(y))
    lo, hi = float(lo), float(hi)
    if math.isclose(lo, hi):
        return lo
    return 0.5 * (lo + hi) + 0.5 * interior * (hi - lo)
