"""Approximation bases: clamped B-splines, rescaled Fourier, Hermite functions.

All three families expose the same shape: a dimension `m`, an `interval`
((a, b) for compact families, None for the real line) and `evaluate(x)`
returning the m basis values. The B-spline family of degree M on K
subintervals spans a (K+M)-dimensional space and vanishes outside [a, b];
the spline dimension grid {2^q} yields nested subspaces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.interpolate import BSpline

from .sde import PathSample


class InvalidInterval(ValueError):
    """Interval endpoints are not ordered a < b."""


@dataclass(frozen=True)
class KnotVector:
    """Clamped knot vector u_{-M..K+M}: endpoint multiplicity M+1, equal spacing."""

    a: float
    b: float
    K: int
    M: int
    u: np.ndarray

    def __len__(self):
        return self.u.size


def make_knots(a: float, b: float, K: int, M: int) -> KnotVector:
    if not a < b:
        raise InvalidInterval(f"need a < b, got [{a}, {b}]")
    if K < 1 or M < 1:
        raise ValueError("K and M must be >= 1")
    interior = a + np.arange(1, K) * (b - a) / K
    u = np.concatenate([np.full(M + 1, float(a)), interior, np.full(M + 1, float(b))])
    return KnotVector(a=float(a), b=float(b), K=K, M=M, u=u)


@dataclass(frozen=True)
class BSplineBasis:
    """Degree-M B-splines on K equal subintervals of [a, b]; dimension K + M.

    Evaluation is zero outside [a, b]; the right endpoint takes the limit
    values from the last subinterval, so the partition of unity holds on the
    closed interval.
    """

    a: float
    b: float
    K: int
    M: int = 3

    def __post_init__(self):
        if not self.a < self.b:
            raise InvalidInterval(f"need a < b, got [{self.a}, {self.b}]")
        if self.K < 1 or self.M < 1:
            raise ValueError("K and M must be >= 1")

    @property
    def family(self) -> str:
        return "bspline"

    @property
    def m(self) -> int:
        return self.K + self.M

    @property
    def interval(self) -> tuple[float, float]:
        return (self.a, self.b)

    def knots(self) -> KnotVector:
        return make_knots(self.a, self.b, self.K, self.M)

    def evaluate(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros((x.size, self.m))
        inside = (x >= self.a) & (x <= self.b)
        if np.any(inside):
            xin = x[inside]
            order = np.argsort(xin, kind="stable")
            t = self.knots().u
            dm = BSpline.design_matrix(xin[order], t, self.M, extrapolate=False)
            rows = dm.toarray()
            unsrt = np.empty_like(rows)
            unsrt[order] = rows
            out[inside] = unsrt
        return out


@dataclass(frozen=True)
class FourierBasis:
    """Trigonometric basis {1, sqrt(2)cos(2*pi*j*y), sqrt(2)sin(2*pi*j*y)} on [a, b].

    y = (x - a)/(b - a) and m = 2d + 1. With the default orthonormal scaling
    (b - a)^{-1/2} the family is orthonormal in L2([a, b]); paper_scaling
    uses the literal 1/(b - a) factor instead.
    """

    m: int
    a: float = 0.0
    b: float = 1.0
    paper_scaling: bool = False

    def __post_init__(self):
        if not self.a < self.b:
            raise InvalidInterval(f"need a < b, got [{self.a}, {self.b}]")
        if self.m < 1 or self.m % 2 == 0:
            raise ValueError("Fourier dimension must be odd (m = 2d + 1)")

    @property
    def family(self) -> str:
        return "fourier"

    @property
    def interval(self) -> tuple[float, float]:
        return (self.a, self.b)

    @property
    def scale(self) -> float:
        width = self.b - self.a
        return 1.0 / width if self.paper_scaling else width ** -0.5

    def evaluate(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = (x - self.a) / (self.b - self.a)
        out = np.empty((x.size, self.m))
        out[:, 0] = 1.0
        d = (self.m - 1) // 2
        for j in range(1, d + 1):
            ang = 2.0 * np.pi * j * y
            out[:, 2 * j - 1] = math.sqrt(2.0) * np.cos(ang)
            out[:, 2 * j] = math.sqrt(2.0) * np.sin(ang)
        out *= self.scale
        return out


@dataclass(frozen=True)
class HermiteBasis:
    """Orthonormal Hermite functions h_0..h_{m-1} on the real line.

    Evaluated by the normalized three-term recurrence
        h_{j+1}(x) = x sqrt(2/(j+1)) h_j(x) - sqrt(j/(j+1)) h_{j-1}(x),
    seeded with h_0(x) = pi^{-1/4} exp(-x^2/2), which avoids the overflow of
    raw Hermite polynomials and factorials.
    """

    m: int

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("Hermite dimension must be >= 1")

    @property
    def family(self) -> str:
        return "hermite"

    @property
    def interval(self) -> None:
        return None

    def evaluate(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty((x.size, self.m))
        h0 = np.pi ** -0.25 * np.exp(-0.5 * x * x)
        out[:, 0] = h0
        if self.m > 1:
            out[:, 1] = math.sqrt(2.0) * x * h0
        for j in range(1, self.m - 1):
            out[:, j + 1] = (x * math.sqrt(2.0 / (j + 1)) * out[:, j]
                             - math.sqrt(j / (j + 1)) * out[:, j - 1])
        return out


BasisSpec = Union[BSplineBasis, FourierBasis, HermiteBasis]


def eval_basis(spec: BasisSpec, x) -> np.ndarray:
    """Basis values at x: (m,) for a scalar x, (len(x), m) for a vector."""
    scalar = np.isscalar(x) or np.ndim(x) == 0
    out = spec.evaluate(x)
    return out[0] if scalar else out


def design_matrix(spec: BasisSpec, sample: PathSample) -> np.ndarray:
    """(N*n) x m matrix with row (j, k) = basis values at X^j_{k/n}, k = 0..n-1."""
    return spec.evaluate(sample.states_flat())


def dimension_grid(family: str, q_max: int = 5) -> list[int]:
    """Candidate dimensions: K = 2^q for splines (nested), m for the others.

    Fourier entries are forced odd (m = 2^q + 1), since the family pairs
    each cosine with a sine.
    """
    if q_max < 0:
        raise ValueError("q_max must be >= 0")
    powers = [2 ** q for q in range(q_max + 1)]
    if family == "fourier":
        return [1] + [p + 1 for p in powers[1:]]
    return powers


def spline_dimension_grid(q_max: int = 5) -> list[int]:
    return dimension_grid("bspline", q_max)
