"""Data-driven dimension selection and the kappa-calibration loop.

The adaptive dimension minimizes contrast + penalty over the candidate grid;
the oracle dimension minimizes the empirical squared distance to the true
sigma^2 measured on an independent evaluation sample. Ties break toward the
smaller dimension.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import bases, ridge
from .bases import BasisSpec, BSplineBasis, FourierBasis, HermiteBasis
from .ridge import RidgeFit, truncated_estimator
from .sde import ModelSpec, PathSample, simulate_sample, true_sigma_sq

PENALTY_FORMS = ("multi", "single", "appendix")


@dataclass(frozen=True)
class PenaltySpec:
    """Penalty pen(m) on the dimension m of the fitted space.

    multi:    kappa * m * log(N) / (N n)      (repeated paths)
    single:   kappa * m * log(n) / n          (one path)
    appendix: kappa * m * log(N)^2 / N^2      (calibration-appendix variant)

    For splines m = K + M.
    """

    kappa: float
    form: str = "multi"

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.form not in PENALTY_FORMS:
            raise ValueError(f"penalty form must be one of {PENALTY_FORMS}")

    def value(self, m: int, N: int, n: int) -> float:
        if self.form == "single":
            pen = self.kappa * m * math.log(n) / n
        elif self.form == "multi":
            pen = self.kappa * m * math.log(N) / (N * n)
        else:
            pen = self.kappa * m * math.log(N) ** 2 / N ** 2
        if pen <= 0:
            raise ValueError(
                f"penalty form {self.form!r} degenerates for N={N}, n={n}")
        return pen


def theory_strict_grid(N: int, n: int, family: str = "bspline", M: int = 3,
                       q_max: int = 5) -> list[int]:
    """Dimension grid capped at m <= sqrt(min(n, N)) / log(Nn).

    The default numeric grid is the plain {2^q} progression; this variant
    drops entries whose dimension exceeds the admissible-set bound. The
    smallest candidate is always kept so the grid stays nonempty.
    """
    cap = math.sqrt(min(N, n)) / math.log(N * n)
    full = bases.dimension_grid(family, q_max)
    dim = (lambda K: K + M) if family == "bspline" else (lambda K: K)
    kept = [K for K in full if dim(K) <= cap]
    return kept or full[:1]


def make_basis(family: str, size: int, interval: Optional[tuple[float, float]],
               M: int = 3) -> BasisSpec:
    """Basis of the given family; `size` is K for splines, m otherwise."""
    if family == "bspline":
        if interval is None:
            raise ValueError("spline basis needs a compact interval")
        return BSplineBasis(a=interval[0], b=interval[1], K=size, M=M)
    if family == "fourier":
        if interval is None:
            raise ValueError("Fourier basis needs a compact interval")
        return FourierBasis(m=size, a=interval[0], b=interval[1])
    if family == "hermite":
        if interval is not None:
            raise ValueError("Hermite basis lives on the real line")
        return HermiteBasis(m=size)
    raise ValueError(f"unknown basis family {family!r}")


@dataclass
class GridFit:
    """One candidate fit: K is the grid value (K for splines, m otherwise)."""

    K: int
    spec: BasisSpec
    fit: RidgeFit
    contrast: float


def fit_dimension_grid(sample: PathSample, grid: Sequence[int], basis_family: str,
                       interval: Optional[tuple[float, float]], L: float,
                       M: int = 3) -> list[GridFit]:
    """Fit every candidate dimension, reusing the response across the grid."""
    if not grid:
        raise ValueError("dimension grid is empty")
    u = ridge.build_response(sample)
    states = sample.states_flat()
    fits = []
    for K in sorted(grid):
        spec = make_basis(basis_family, K, interval, M=M)
        F = spec.evaluate(states)
        try:
            fit = ridge.fit_ridge(F, u, spec.m, L, basis=spec)
        except Exception as exc:
            raise RuntimeError(f"fit failed at grid value K={K}") from exc
        gamma = ridge.contrast(F @ fit.coeffs, u)
        fits.append(GridFit(K=K, spec=spec, fit=fit, contrast=gamma))
    return fits


@dataclass
class SelectionRow:
    K: int
    m: int
    contrast: float
    penalty: float
    objective: float
    chosen: bool


@dataclass
class SelectionResult:
    chosen_K: int
    per_K: list[SelectionRow]
    fit: RidgeFit

    def rows_csv(self) -> str:
        lines = ["K,m,contrast,penalty,objective,chosen"]
        for r in self.per_K:
            lines.append(f"{r.K},{r.m},{r.contrast!r},{r.penalty!r},"
                         f"{r.objective!r},{int(r.chosen)}")
        return "\n".join(lines) + "\n"


def choose_penalized(fits: Sequence[GridFit], pen: PenaltySpec, N: int,
                     n: int) -> SelectionResult:
    """Penalized-contrast minimizer over fitted candidates (ties -> smaller K)."""
    best = None
    rows = []
    for gf in fits:
        pval = pen.value(gf.spec.m, N, n)
        obj = gf.contrast + pval
        rows.append(SelectionRow(K=gf.K, m=gf.spec.m, contrast=gf.contrast,
                                 penalty=pval, objective=obj, chosen=False))
        if best is None or obj < best[0]:
            best = (obj, gf)
    for r in rows:
        r.chosen = r.K == best[1].K
    return SelectionResult(chosen_K=best[1].K, per_K=rows, fit=best[1].fit)


def select_dimension(sample: PathSample, grid: Sequence[int], basis_family: str,
                     interval: Optional[tuple[float, float]], L: float,
                     pen: PenaltySpec, M: int = 3) -> SelectionResult:
    """Fit every dimension in the grid and return the penalized minimizer."""
    fits = fit_dimension_grid(sample, grid, basis_family, interval, L, M=M)
    return choose_penalized(fits, pen, N=sample.N, n=sample.n)


def heldout_sq_distance(fit: RidgeFit, truth_sq: Callable, eval_states: np.ndarray,
                        truncate: bool = True) -> float:
    """Mean squared distance of the (truncated) estimator to truth_sq."""
    est = truncated_estimator(fit) if truncate else fit.predict
    pred = est(eval_states)
    d = pred - truth_sq(eval_states)
    return float(d @ d / d.size)


def choose_oracle(fits: Sequence[GridFit], truth_sq: Callable,
                  eval_sample: PathSample, truncate: bool = True):
    """(K*, fit, per-K losses): argmin of held-out distance (ties -> smaller K)."""
    states = eval_sample.states_flat()
    losses = []
    best = None
    for gf in fits:
        loss = heldout_sq_distance(gf.fit, truth_sq, states, truncate=truncate)
        losses.append((gf.K, loss))
        if best is None or loss < best[0]:
            best = (loss, gf)
    return best[1].K, best[1].fit, losses


def oracle_dimension(sample: PathSample, truth_sq: Callable,
                     eval_sample: PathSample, grid: Sequence[int],
                     basis_family: str, interval: Optional[tuple[float, float]],
                     L: float, M: int = 3, truncate: bool = True):
    """Benchmark dimension K* minimizing the true distance on eval_sample."""
    fits = fit_dimension_grid(sample, grid, basis_family, interval, L, M=M)
    K_star, fit, _ = choose_oracle(fits, truth_sq, eval_sample, truncate=truncate)
    return K_star, fit


def _seed_for(master_seed: int, *key: int) -> int:
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(key))
    return int(ss.generate_state(1, np.uint64)[0])


def calibrate_kappa(models: Sequence[ModelSpec], V: Sequence[float], reps: int,
                    N: int, n: int, N_prime: int, *,
                    grid: Optional[Sequence[int]] = None,
                    basis_family: str = "bspline",
                    interval: Optional[tuple[float, float]] = (-1.0, 1.0),
                    L: Optional[float] = None,
                    penalty_form: str = "multi",
                    M: int = 3, substeps: int = 10, master_seed: int = 0,
                    truncate: bool = True):
    """Grid-search the penalty constant kappa over V.

    For each repetition and model: simulate D_N and D_{N'}, fit the dimension
    grid once, then for every kappa select the adaptive dimension and record
    the held-out loss. Returns (kappa_star, curves) where curves maps model
    label -> {kappa: mean loss} and kappa_star minimizes the worst-case
    (max over models) mean loss, ties toward smaller kappa.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    V = sorted(float(v) for v in V)
    if not V:
        raise ValueError("V must be nonempty")
    if grid is None:
        grid = bases.dimension_grid(basis_family)
    if L is None:
        L = math.log(N * n) if N > 1 else math.log(n)

    losses = {m.label: {v: [] for v in V} for m in models}
    for idx, model in enumerate(models):
        truth = true_sigma_sq(model)
        for rep in range(reps):
            train = simulate_sample(model, N, n, substeps=substeps,
                                    master_seed=_seed_for(master_seed, idx, rep, 0))
            eval_ = simulate_sample(model, N_prime, n, substeps=substeps,
                                    master_seed=_seed_for(master_seed, idx, rep, 1))
            fits = fit_dimension_grid(train, grid, basis_family, interval, L, M=M)
            states = eval_.states_flat()
            held = [heldout_sq_distance(gf.fit, truth, states, truncate=truncate)
                    for gf in fits]
            for v in V:
                pen = PenaltySpec(kappa=v, form=penalty_form)
                sel = choose_penalized(fits, pen, N=N, n=n)
                k_idx = next(i for i, gf in enumerate(fits) if gf.K == sel.chosen_K)
                losses[model.label][v].append(held[k_idx])

    curves = {label: {v: float(np.mean(vals)) for v, vals in per_v.items()}
              for label, per_v in losses.items()}
    best_v, best_score = None, None
    for v in V:
        score = max(curves[label][v] for label in curves)
        if best_score is None or score < best_score:
            best_v, best_score = v, score
    return best_v, curves
