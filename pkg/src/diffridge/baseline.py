"""Nadaraya-Watson kernel estimator of sigma^2 from a single path.

The literal mode reproduces the comparison formula verbatim, including its
asymmetric index ranges (numerator k <= n-1, denominator k <= n) and the
extra 1/n factor in the numerator; the corrected mode uses matching ranges
and the conventional (increment^2)/delta scaling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .sde import DiffusionPath

DENOMINATOR_FLOOR = 1e-300

NW_MODES = ("literal", "corrected")


class DegeneratePath(ValueError):
    """All observed states coincide; no bandwidth can be formed."""


@dataclass(frozen=True)
class KernelSpec:
    """Gaussian kernel with a fixed bandwidth or Scott's rule-of-thumb."""

    bandwidth: Optional[float] = None
    rule: str = "scott"

    def __post_init__(self):
        if self.bandwidth is not None and self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive")
        if self.bandwidth is None and self.rule != "scott":
            raise ValueError("only the Scott rule is supported")

    def resolve(self, path: DiffusionPath) -> float:
        return self.bandwidth if self.bandwidth is not None else scott_bandwidth(path)


def scott_bandwidth(path: DiffusionPath) -> float:
    """h = sd(states) * n^{-1/5} (one spatial dimension)."""
    if path.n < 2:
        raise ValueError("need n >= 2 for a bandwidth")
    sd = float(np.std(path.values, ddof=1))
    if sd == 0.0:
        raise DegeneratePath("constant path has zero standard deviation")
    return sd * path.n ** -0.2


def nw_estimate(path: DiffusionPath, x, spec: KernelSpec = KernelSpec(),
                mode: str = "literal"):
    """Kernel-weighted ratio estimator at x; returns (values, underflow).

    Underflow entries are reported as 0 and flagged when the kernel mass in
    the denominator drops below 1e-300 (x far outside the path's range).
    Scalar x yields (float, bool).
    """
    if mode not in NW_MODES:
        raise ValueError(f"mode must be one of {NW_MODES}")
    h = spec.resolve(path)
    scalar = np.isscalar(x) or np.ndim(x) == 0
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    v = path.values
    n = path.n
    inc_sq = np.diff(v) ** 2                      # (v[k+1] - v[k])^2, k = 0..n-1
    num_states = v[1:n]                           # X_{k/n}, k = 1..n-1
    num_inc = inc_sq[1:n]                         # paired increments
    if mode == "literal":
        den_states = v[1:n + 1]                   # X_{k/n}, k = 1..n
        num_scale = 1.0 / n
    else:
        den_states = num_states
        num_scale = float(n)
    num = np.empty(xs.size)
    den = np.empty(xs.size)
    # blockwise so the weight matrices stay small for long paths / dense grids
    block = max(1, int(4e6 / max(n, 1)))
    for lo in range(0, xs.size, block):
        xb = xs[lo:lo + block, None]
        wnum = np.exp(-0.5 * ((num_states[None, :] - xb) / h) ** 2)
        wden = np.exp(-0.5 * ((den_states[None, :] - xb) / h) ** 2)
        num[lo:lo + block] = wnum @ num_inc * num_scale
        den[lo:lo + block] = np.sum(wden, axis=1)
    underflow = den < DENOMINATOR_FLOOR
    out = np.zeros_like(num)
    ok = ~underflow
    out[ok] = num[ok] / den[ok]
    if scalar:
        return float(out[0]), bool(underflow[0])
    return out, underflow
