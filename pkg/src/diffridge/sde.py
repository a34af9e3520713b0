"""Diffusion models and path simulation.

The observation scheme is a unit time horizon sampled at k/n, k = 0..n,
so every path carries n+1 states and the step is delta = 1/n. Simulation
uses Euler-Maruyama on a refined grid of n*substeps steps and keeps every
substeps-th state; each path draws its Gaussian increments from its own
counter-based stream so that path j is reproducible independently of how
many other paths are generated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np


class NonFiniteState(RuntimeError):
    """A simulated state or coefficient value became NaN or +-inf.

    Signals an explosive model/parameter combination (e.g. a diffusion
    coefficient growing faster than linearly).
    """

    def __init__(self, message, path_index=None):
        super().__init__(message)
        self.path_index = path_index


class AssumptionViolation(ValueError):
    """A coefficient declared uniformly elliptic left its [sigma0, sigma1] box."""


@dataclass(frozen=True)
class Coefficient:
    """A scalar coefficient x -> value, either a vectorized function or a table.

    `bounds`, when set, declares that the coefficient satisfies the uniform
    ellipticity box sigma0 <= f(x) <= sigma1 with sigma0 > 0; the box is
    checked lazily on every evaluation over the queried points.
    """

    fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    grid: Optional[np.ndarray] = None
    values: Optional[np.ndarray] = None
    bounds: Optional[tuple[float, float]] = None

    def __post_init__(self):
        if (self.fn is None) == (self.grid is None):
            raise ValueError("exactly one of fn or (grid, values) must be given")
        if self.grid is not None:
            g = np.asarray(self.grid, dtype=float)
            v = np.asarray(self.values, dtype=float)
            if g.ndim != 1 or g.shape != v.shape or g.size < 2:
                raise ValueError("tabulated coefficient needs matching 1-D grid and values")
            if np.any(np.diff(g) <= 0):
                raise ValueError("tabulated grid must be strictly increasing")
            object.__setattr__(self, "grid", g)
            object.__setattr__(self, "values", v)
        if self.bounds is not None:
            lo, hi = self.bounds
            if not (0 < lo <= hi):
                raise ValueError("bounds must satisfy 0 < sigma0 <= sigma1")

    @classmethod
    def from_function(cls, fn, bounds=None):
        return cls(fn=fn, bounds=bounds)

    @classmethod
    def tabulated(cls, grid, values, bounds=None):
        return cls(grid=np.asarray(grid, float), values=np.asarray(values, float),
                   bounds=bounds)

    def _eval_unchecked(self, x: np.ndarray) -> np.ndarray:
        if self.fn is not None:
            out = np.asarray(self.fn(x), dtype=float)
            if out.shape != x.shape:
                out = np.broadcast_to(out, x.shape)
            return out
        return np.interp(x, self.grid, self.values)

    def __call__(self, x):
        scalar = np.isscalar(x) or np.ndim(x) == 0
        xa = np.atleast_1d(np.asarray(x, dtype=float))
        out = self._eval_unchecked(xa)
        finite_in = np.isfinite(xa)
        if not np.all(np.isfinite(out[finite_in])):
            raise NonFiniteState("coefficient evaluated to a non-finite value at a finite point")
        if self.bounds is not None:
            lo, hi = self.bounds
            vals = out[finite_in]
            if vals.size and (vals.min() < lo - 1e-12 or vals.max() > hi + 1e-12):
                raise AssumptionViolation(
                    f"coefficient left its declared box [{lo}, {hi}] "
                    f"(range seen: [{vals.min()}, {vals.max()}])")
        return float(out[0]) if scalar else out


@dataclass(frozen=True)
class ModelSpec:
    """Drift/diffusion pair with initial value; built-in models fix x0 = 0."""

    drift: Coefficient
    diffusion: Coefficient
    x0: float = 0.0
    label: str = ""


def _one_minus_x(x):
    return 1.0 - x


_BUILTINS: dict[str, Callable[[], ModelSpec]] = {
    # Monte-Carlo study models: drift b(x) = 1 - x throughout.
    "M1": lambda: ModelSpec(
        drift=Coefficient.from_function(_one_minus_x),
        diffusion=Coefficient.from_function(lambda x: np.ones_like(x), bounds=(1.0, 1.0)),
        label="Model 1 (Ornstein-Uhlenbeck)"),
    # sigma(x) = 1 - x^2 is not uniformly elliptic; simulated as-is. Paths
    # started at 0 stay inside (-1, 1), but pathological seeds of the Euler
    # scheme may overshoot and NonFiniteState can occur in principle.
    "M2": lambda: ModelSpec(
        drift=Coefficient.from_function(_one_minus_x),
        diffusion=Coefficient.from_function(lambda x: 1.0 - x * x),
        label="Model 2"),
    "M3": lambda: ModelSpec(
        drift=Coefficient.from_function(_one_minus_x),
        diffusion=Coefficient.from_function(
            lambda x: 1.0 / (3.0 + np.sin(2.0 * np.pi * x)) + np.cos(np.pi * x / 2.0) ** 2,
            bounds=(0.25, 1.5)),
        label="Model 3"),
    # Calibration models (same drift, uniformly elliptic diffusions).
    "C1": lambda: ModelSpec(
        drift=Coefficient.from_function(_one_minus_x),
        diffusion=Coefficient.from_function(lambda x: np.ones_like(x), bounds=(1.0, 1.0)),
        label="Calibration model 1"),
    "C2": lambda: ModelSpec(
        drift=Coefficient.from_function(_one_minus_x),
        diffusion=Coefficient.from_function(
            lambda x: 0.1 + 0.9 / np.sqrt(1.0 + x * x), bounds=(0.1, 1.0)),
        label="Calibration model 2"),
    "C3": lambda: ModelSpec(
        drift=Coefficient.from_function(_one_minus_x),
        diffusion=Coefficient.from_function(
            lambda x: 1.0 / 3.0 + np.sin(2.0 * np.pi * x) ** 2 / np.pi
            + 1.0 / (np.pi + x * x),
            bounds=(1.0 / 3.0, 1.0)),
        label="Calibration model 3"),
}

BUILTIN_MODEL_IDS = tuple(_BUILTINS)


def builtin_model(model_id: str) -> ModelSpec:
    """Return one of the six built-in models (M1-M3, C1-C3)."""
    key = str(model_id).upper()
    if key not in _BUILTINS:
        raise KeyError(f"unknown model id {model_id!r}; choose one of {BUILTIN_MODEL_IDS}")
    return _BUILTINS[key]()


def true_sigma_sq(model: ModelSpec) -> Callable[[np.ndarray], np.ndarray]:
    """The squared diffusion coefficient of a model, as a vectorized function."""

    def sq(x):
        v = model.diffusion._eval_unchecked(np.asarray(x, dtype=float))
        return v * v

    return sq


@dataclass(frozen=True)
class DiffusionPath:
    """One discretized trajectory (x_0, ..., x_n) on [0, 1] with step 1/n."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("a path needs at least two states (n >= 1)")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.size - 1

    @property
    def delta(self) -> float:
        return 1.0 / self.n

    def states(self) -> np.ndarray:
        """Observation states X_{k/n}, k = 0..n-1 (terminal point excluded)."""
        return self.values[:-1]

    def increments(self) -> np.ndarray:
        return np.diff(self.values)


@dataclass(frozen=True)
class PathSample:
    """N i.i.d. discretized paths sharing the same n; the dataset D_{N,n}.

    Stored as an (N, n+1) matrix; `paths` exposes row views as DiffusionPath.
    """

    values: np.ndarray
    seed: Optional[int] = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 2:
            raise ValueError("sample must be an (N, n+1) matrix with N >= 1, n >= 1")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_paths(cls, paths: Sequence[DiffusionPath], seed=None) -> "PathSample":
        ns = {p.n for p in paths}
        if len(ns) != 1:
            raise ValueError("all paths in a sample must share the same n")
        return cls(np.stack([p.values for p in paths]), seed=seed)

    @classmethod
    def from_values(cls, values, seed=None) -> "PathSample":
        return cls(np.asarray(values, dtype=float), seed=seed)

    @property
    def N(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1] - 1

    @property
    def delta(self) -> float:
        return 1.0 / self.n

    @property
    def paths(self) -> list[DiffusionPath]:
        return [DiffusionPath(row) for row in self.values]

    def states(self) -> np.ndarray:
        """(N, n) matrix of observation states X^j_{k/n}, k = 0..n-1."""
        return self.values[:, :-1]

    def states_flat(self) -> np.ndarray:
        """States flattened path-major: (j=0, k=0..n-1), (j=1, ...), ..."""
        return self.states().reshape(-1)

    def increments(self) -> np.ndarray:
        return np.diff(self.values, axis=1)


def path_stream_seed(master_seed: int, j: int) -> int:
    """64-bit stream seed for path j, derived from the master seed.

    Uses SeedSequence spawn keys, so the derivation is independent of how
    many or in which order paths are generated.
    """
    ss = np.random.SeedSequence(master_seed, spawn_key=(j,))
    return int(ss.generate_state(1, np.uint64)[0])


def _stream(stream_seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(stream_seed)))


def _integrate(model: ModelSpec, n: int, substeps: int, noise: np.ndarray) -> np.ndarray:
    """Euler-Maruyama over the refined grid; noise has shape (B, n*substeps).

    Rows evolve element-wise, so row j is bit-identical whether it is
    integrated alone or inside a batch.
    """
    batch = noise.shape[0]
    dt = 1.0 / (n * substeps)
    sqdt = math.sqrt(dt)
    out = np.empty((batch, n + 1))
    x = np.full(batch, float(model.x0))
    out[:, 0] = x
    drift = model.drift._eval_unchecked
    diff = model.diffusion._eval_unchecked
    step = 0
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n):
            for _ in range(substeps):
                x = x + drift(x) * dt + diff(x) * (sqdt * noise[:, step])
                step += 1
            out[:, k + 1] = x
    return out


def _first_bad_row(values: np.ndarray) -> int:
    bad = ~np.all(np.isfinite(values), axis=1)
    return int(np.nonzero(bad)[0][0])


def _check_declared_boxes(model: ModelSpec, values: np.ndarray) -> None:
    # Lazy Assumption-1 check over the realized states of the simulation.
    for coeff in (model.drift, model.diffusion):
        if coeff.bounds is not None:
            coeff(values.ravel())


def simulate_path(model: ModelSpec, n: int, substeps: int = 10,
                  stream_seed: int = 0) -> DiffusionPath:
    """Simulate one path; deterministic given (model, n, substeps, stream_seed)."""
    if n < 1 or substeps < 1:
        raise ValueError("n and substeps must be >= 1")
    noise = _stream(stream_seed).standard_normal((1, n * substeps))
    values = _integrate(model, n, substeps, noise)
    if not np.all(np.isfinite(values)):
        raise NonFiniteState("simulation produced a non-finite state", path_index=0)
    _check_declared_boxes(model, values)
    return DiffusionPath(values[0])


def simulate_sample(model: ModelSpec, N: int, n: int, substeps: int = 10,
                    master_seed: int = 0) -> PathSample:
    """Simulate N independent paths from per-path sub-streams of master_seed."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if n < 1 or substeps < 1:
        raise ValueError("n and substeps must be >= 1")
    total = n * substeps
    noise = np.empty((N, total))
    for j in range(N):
        noise[j] = _stream(path_stream_seed(master_seed, j)).standard_normal(total)
    values = _integrate(model, n, substeps, noise)
    if not np.all(np.isfinite(values)):
        j = _first_bad_row(values)
        raise NonFiniteState(f"simulation produced a non-finite state on path {j}",
                             path_index=j)
    _check_declared_boxes(model, values)
    return PathSample(values, seed=int(master_seed))
