"""Squared-increment response and ball-constrained least squares.

The response stacks U^j_k = (X^j_{(k+1)/n} - X^j_{k/n})^2 / (1/n) in the same
path-major order as the design matrix. The coefficient vector minimizes
||u - F a||_2^2 over the closed ball ||a||_2^2 <= m*L; when the minimum-norm
least-squares solution already lies inside the ball it is returned with a
zero multiplier, otherwise the multiplier solves the secular equation
||a(lambda)||^2 = m*L on the boundary (trust-region subproblem).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .bases import BasisSpec, BSplineBasis, FourierBasis, HermiteBasis
from .sde import PathSample


class DimensionMismatch(ValueError):
    """Shapes of the design matrix, response, or dimension disagree."""


class NonFiniteInput(ValueError):
    """Design matrix or response contains NaN or +-inf."""


def build_response(sample: PathSample) -> np.ndarray:
    """Length-N*n response of normalized squared increments, path-major."""
    u = sample.increments() ** 2 / sample.delta
    return u.reshape(-1)


def contrast(h_values: np.ndarray, u: np.ndarray) -> float:
    """Least-squares contrast (1/(Nn)) sum (u_i - h_i)^2."""
    h_values = np.asarray(h_values, dtype=float)
    u = np.asarray(u, dtype=float)
    if h_values.shape != u.shape:
        raise DimensionMismatch(f"shapes {h_values.shape} and {u.shape} differ")
    d = u - h_values
    return float(d @ d / d.size)


# Relative threshold below which singular values are treated as zero
# (minimum-norm convention on the dropped directions).
_RANK_RTOL = 1e-12
# Relative accuracy of the boundary equation ||a(lambda)||^2 = radius^2.
_SECULAR_RTOL = 1e-10


def _solve_ball(F: np.ndarray, u: np.ndarray, radius_sq: float):
    """Minimize ||u - F a||^2 subject to ||a||^2 <= radius_sq.

    Returns (a, lagrange, active). Thin SVD plus, when the constraint binds,
    a Newton iteration on 1/||a(lambda)|| safeguarded by bisection; the
    secular function ||a(lambda)||^2 is strictly decreasing on (0, inf), so
    the bracket stays valid.
    """
    U, s, Vt = np.linalg.svd(F, full_matrices=False)
    tol = s[0] * _RANK_RTOL if s.size else 0.0
    keep = s > tol
    if not np.any(keep):
        return np.zeros(F.shape[1]), 0.0, False
    s = s[keep]
    beta = U[:, keep].T @ u
    c = s * beta                      # rotated right-hand side F^T u
    d = s * s                         # eigenvalues of F^T F on kept directions
    a0 = Vt[keep].T @ (beta / s)      # minimum-norm least-squares solution
    if float(a0 @ a0) <= radius_sq:
        return a0, 0.0, False

    c2 = c * c

    def norm_sq(lam):
        return float(np.sum(c2 / (d + lam) ** 2))

    # Bracket: phi(0) > r^2 and phi(hi) <= r^2 since phi(lam) <= ||c||^2/lam^2.
    lo = 0.0
    hi = math.sqrt(float(np.sum(c2)) / radius_sq)
    lam = min(hi, max(1e-16, 0.5 * hi))
    for _ in range(200):
        denom = d + lam
        phi = float(np.sum(c2 / denom ** 2))
        if abs(phi - radius_sq) <= _SECULAR_RTOL * radius_sq:
            break
        if phi > radius_sq:
            lo = lam
        else:
            hi = lam
        # Newton step on g(lam) = 1/sqrt(phi) - 1/sqrt(r^2); g is concave
        # increasing, so the iteration is monotone once inside the bracket.
        dphi = -2.0 * float(np.sum(c2 / denom ** 3))
        g = 1.0 / math.sqrt(phi) - 1.0 / math.sqrt(radius_sq)
        dg = -dphi / (2.0 * phi ** 1.5)
        step = lam - g / dg
        lam = step if lo < step < hi else 0.5 * (lo + hi)
    a = Vt[keep].T @ (c / (d + lam))
    return a, float(lam), True


@dataclass
class RidgeFit:
    """Fitted coefficient vector with the constraint metadata of its solve."""

    coeffs: np.ndarray
    basis: Optional[BasisSpec]
    L: float
    lagrange: float
    active: bool

    @property
    def m(self) -> int:
        return self.coeffs.size

    @property
    def constraint_radius_sq(self) -> float:
        return self.m * self.L

    def predict(self, x) -> np.ndarray:
        """Raw (untruncated) estimator values sum_l a_l phi_l(x)."""
        if self.basis is None:
            raise ValueError("fit carries no basis; attach one to evaluate")
        scalar = np.isscalar(x) or np.ndim(x) == 0
        out = self.basis.evaluate(x) @ self.coeffs
        return float(out[0]) if scalar else out

    def to_dict(self) -> dict:
        rec = {
            "family": self.basis.family if self.basis is not None else None,
            "interval": list(self.basis.interval) if (self.basis is not None and
                                                      self.basis.interval) else None,
            "m": self.m,
            "K": self.basis.K if isinstance(self.basis, BSplineBasis) else None,
            "M": self.basis.M if isinstance(self.basis, BSplineBasis) else None,
            "L": self.L,
            "coeffs": [float(v) for v in self.coeffs],
            "lagrange": self.lagrange,
            "active": self.active,
        }
        return rec

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, rec: dict) -> "RidgeFit":
        basis: Optional[BasisSpec] = None
        fam = rec.get("family")
        if fam == "bspline":
            a, b = rec["interval"]
            basis = BSplineBasis(a=a, b=b, K=rec["K"], M=rec["M"])
        elif fam == "fourier":
            a, b = rec["interval"]
            basis = FourierBasis(m=rec["m"], a=a, b=b)
        elif fam == "hermite":
            basis = HermiteBasis(m=rec["m"])
        return cls(coeffs=np.asarray(rec["coeffs"], dtype=float), basis=basis,
                   L=rec["L"], lagrange=rec["lagrange"], active=rec["active"])

    @classmethod
    def from_json(cls, text: str) -> "RidgeFit":
        return cls.from_dict(json.loads(text))


def fit_ridge(F: np.ndarray, u: np.ndarray, m: int, L: float,
              basis: Optional[BasisSpec] = None) -> RidgeFit:
    """Constrained least squares over the ball ||a||^2 <= m*L."""
    F = np.asarray(F, dtype=float)
    u = np.asarray(u, dtype=float)
    if F.ndim != 2 or u.ndim != 1 or F.shape[0] != u.size:
        raise DimensionMismatch(f"F is {F.shape}, u has length {u.size}")
    if F.shape[1] != m:
        raise DimensionMismatch(f"F has {F.shape[1]} columns but m = {m}")
    if L <= 0:
        raise ValueError("constraint level L must be positive")
    if not np.all(np.isfinite(F)) or not np.all(np.isfinite(u)):
        raise NonFiniteInput("design matrix or response contains non-finite values")
    coeffs, lam, active = _solve_ball(F, u, m * L)
    return RidgeFit(coeffs=coeffs, basis=basis, L=float(L), lagrange=lam, active=active)


@dataclass(frozen=True)
class EstimatorFn:
    """Evaluable estimator; `truncation` is the sqrt(L) cap when enabled."""

    fit: RidgeFit
    truncation: Optional[float] = None

    def __call__(self, x):
        raw = self.fit.predict(x)
        if self.truncation is None:
            return raw
        return np.minimum(raw, self.truncation)


def truncated_estimator(fit: RidgeFit) -> EstimatorFn:
    """The fitted function capped above at sqrt(L)."""
    return EstimatorFn(fit=fit, truncation=math.sqrt(fit.L))


def evaluate(est: EstimatorFn, x):
    """Estimator value at x, capped at sqrt(L) when truncation is enabled."""
    return est(x)
