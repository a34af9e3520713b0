"""Empirical norms, Gram diagnostics, and the Monte-Carlo MISE harness.

A MISE experiment repeats: simulate a training sample D_{N,n} and an
independent evaluation sample D_{N',n}, build the estimator on the first,
and score the empirical squared distance to the true sigma^2 over the
states of the second. The reported MISE is the mean of those per-repetition
losses; the theoretical norm is never computed exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from . import bases, baseline, ridge, selection
from .bases import BasisSpec, BSplineBasis
from .sde import ModelSpec, PathSample, builtin_model, simulate_sample, true_sigma_sq
from .selection import (GridFit, PenaltySpec, choose_oracle, choose_penalized,
                        fit_dimension_grid, heldout_sq_distance, make_basis)

SINGULAR_EIG = 1e-14


def empirical_sq_norm(h: Callable, sample: PathSample) -> float:
    """||h||^2_{n,N} = (1/(Nn)) sum_j sum_{k<n} h(X^j_{k/n})^2."""
    vals = np.asarray(h(sample.states_flat()), dtype=float)
    return float(vals @ vals / vals.size)


def empirical_sq_distance(f: Callable, g: Callable, sample: PathSample) -> float:
    """||f - g||^2_{n,N} over the sample states."""
    states = sample.states_flat()
    d = np.asarray(f(states), dtype=float) - np.asarray(g(states), dtype=float)
    return float(d @ d / d.size)


def gram_matrix(spec: BasisSpec, sample: PathSample) -> np.ndarray:
    """Empirical Gram matrix (1/(Nn)) F^T F of the basis over the sample."""
    F = bases.design_matrix(spec, sample)
    return F.T @ F / F.shape[0]


@dataclass(frozen=True)
class GramDiagnostics:
    m: int
    min_eigenvalue: float
    op_norm_inverse: float
    L_of_m: float
    condition13_lhs: float
    condition13_bound: float
    satisfied: bool
    singular: bool


def sup_sum_sq(spec: BasisSpec, points: int = 0) -> float:
    """sup_x sum_l phi_l(x)^2 over a grid of the basis's natural range."""
    pts = points or 10 * spec.m
    if spec.interval is not None:
        grid = np.linspace(spec.interval[0], spec.interval[1], pts)
    else:
        half = math.sqrt(3.0 * (4.0 * spec.m + 3.0))
        grid = np.linspace(-half, half, pts)
    vals = spec.evaluate(grid)
    return float(np.max(np.sum(vals * vals, axis=1)))


def gram_diagnostics_from_matrix(spec: BasisSpec, gram: np.ndarray,
                                 N: int) -> GramDiagnostics:
    eigs = np.linalg.eigvalsh(gram)
    min_eig = float(eigs[0])
    singular = min_eig <= SINGULAR_EIG
    op_inv = math.inf if singular else 1.0 / min_eig
    l_m = sup_sum_sq(spec)
    lhs = l_m * max(op_inv, 1.0)
    bound = N / math.log(N) ** 2 if N >= 2 else math.inf
    return GramDiagnostics(m=spec.m, min_eigenvalue=min_eig, op_norm_inverse=op_inv,
                           L_of_m=l_m, condition13_lhs=lhs, condition13_bound=bound,
                           satisfied=not singular and lhs <= bound, singular=singular)


def gram_diagnostics(spec: BasisSpec, sample: PathSample) -> GramDiagnostics:
    """Minimum eigenvalue, sup of sum phi^2, and the N/log^2(N) condition."""
    return gram_diagnostics_from_matrix(spec, gram_matrix(spec, sample), sample.N)


INTERVAL_PRESETS = ("compact", "logn", "logN", "growing", "realline", "nwcomp")


@dataclass(frozen=True)
class Setting:
    """Resolved estimation setting: interval, constraint level, penalty form."""

    interval: Optional[tuple[float, float]]
    L: float
    penalty_form: str
    restrict_truth: bool


def resolve_setting(preset: str, N: int, n: int, basis: str = "bspline",
                    L: Optional[float] = None) -> Setting:
    """Wire the regime-appropriate interval and constraint level.

    compact  [-1, 1]            L = log(n) (N = 1) or log(Nn)
    logn     [-log n, log n]    L = log(n)^2      (single-path real line)
    logN     [-log N, log N]    L = log(N)^2      (repeated-path real line)
    growing  [-A_N, A_N]        L = log(N), A_N = log(N)^0.4
    realline Hermite on R       L = log(N)^2 (or log(n)^2 when N = 1)
    nwcomp   [-1e6, 1e6]        L = log(n)^2      (kernel-comparison surrogate)
    """
    form = "multi" if N > 1 else "single"
    if preset == "compact":
        interval = (-1.0, 1.0)
        L_def = math.log(n) if N == 1 else math.log(N * n)
    elif preset == "logn":
        if n < 2:
            raise ValueError("logn preset needs n >= 2")
        interval = (-math.log(n), math.log(n))
        L_def = math.log(n) ** 2
    elif preset == "logN":
        if N < 2:
            raise ValueError("logN preset needs N >= 2")
        interval = (-math.log(N), math.log(N))
        L_def = math.log(N) ** 2
    elif preset == "growing":
        if N < 2:
            raise ValueError("growing preset needs N >= 2")
        A = math.log(N) ** 0.4
        interval = (-A, A)
        L_def = math.log(N)
    elif preset == "realline":
        if basis != "hermite":
            raise ValueError("realline preset requires the Hermite basis")
        interval = None
        L_def = math.log(N) ** 2 if N > 1 else math.log(n) ** 2
    elif preset == "nwcomp":
        interval = (-1e6, 1e6)
        L_def = math.log(n) ** 2
    else:
        raise ValueError(f"unknown interval preset {preset!r}; "
                         f"choose one of {INTERVAL_PRESETS}")
    if basis == "hermite" and interval is not None:
        raise ValueError("Hermite basis only pairs with the realline preset")
    restrict = preset in ("compact", "growing")
    return Setting(interval=interval, L=float(L if L is not None else L_def),
                   penalty_form=form, restrict_truth=restrict)


def restricted_truth(model: ModelSpec, setting: Setting) -> Callable:
    """True sigma^2, restricted to the estimation interval when the preset says so."""
    truth = true_sigma_sq(model)
    if not setting.restrict_truth or setting.interval is None:
        return truth
    a, b = setting.interval

    def rt(x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= a) & (x <= b), truth(x), 0.0)

    return rt


ESTIMATOR_KINDS = ("adaptive", "oracle", "fixed", "nw", "truth")


@dataclass(frozen=True)
class ExperimentConfig:
    """One MISE experiment cell: model, setting, estimator kind and sizes."""

    model: str
    interval: str = "compact"
    basis: str = "bspline"
    estimator: str = "adaptive"
    N: int = 100
    n: int = 100
    N_eval: int = 100
    reps: int = 100
    seed: int = 0
    substeps: int = 10
    kappa: float = 4.0
    penalty: str = "auto"
    L: Optional[float] = None
    q_max: int = 5
    M: int = 3
    fixed_dim: Optional[int] = None
    nw_mode: str = "literal"
    truncate: bool = True
    n_jobs: int = 1


@dataclass
class MiseReport:
    """Aggregated Monte-Carlo losses for one experiment cell."""

    model: str
    interval: str
    estimator: str
    N: int
    n: int
    reps: int
    mean_mise: float
    sd_mise: float
    per_rep: np.ndarray
    sd_flagged: bool = False

    @classmethod
    def from_losses(cls, cfg: ExperimentConfig, estimator: str,
                    losses: Sequence[float]) -> "MiseReport":
        per_rep = np.asarray(losses, dtype=float)
        sd = float(np.std(per_rep, ddof=1)) if per_rep.size > 1 else 0.0
        return cls(model=cfg.model, interval=cfg.interval, estimator=estimator,
                   N=cfg.N, n=cfg.n, reps=per_rep.size,
                   mean_mise=float(np.mean(per_rep)), sd_mise=sd, per_rep=per_rep,
                   sd_flagged=per_rep.size == 1)

    def csv_row(self) -> str:
        return (f"{self.model},{self.interval},{self.estimator},{self.N},{self.n},"
                f"{self.mean_mise!r},{self.sd_mise!r}")


def _seed_for(master_seed: int, *key: int) -> int:
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(key))
    return int(ss.generate_state(1, np.uint64)[0])


def _grid_for(cfg: ExperimentConfig) -> list[int]:
    return bases.dimension_grid(cfg.basis, cfg.q_max)


def _penalty(cfg: ExperimentConfig, setting: Setting) -> PenaltySpec:
    form = setting.penalty_form if cfg.penalty == "auto" else cfg.penalty
    return PenaltySpec(kappa=cfg.kappa, form=form)


def _one_rep(cfg: ExperimentConfig, setting: Setting, kinds: Sequence[str],
             rep: int) -> dict[str, float]:
    model = builtin_model(cfg.model)
    train = simulate_sample(model, cfg.N, cfg.n, substeps=cfg.substeps,
                            master_seed=_seed_for(cfg.seed, rep, 0))
    eval_ = simulate_sample(model, cfg.N_eval, cfg.n, substeps=cfg.substeps,
                            master_seed=_seed_for(cfg.seed, rep, 1))
    truth = restricted_truth(model, setting)
    states = eval_.states_flat()
    losses: dict[str, float] = {}

    fit_kinds = [k for k in kinds if k in ("adaptive", "oracle", "fixed")]
    if fit_kinds:
        grid = _grid_for(cfg)
        if "fixed" in fit_kinds:
            if cfg.fixed_dim is None:
                raise ValueError("fixed estimator needs fixed_dim")
            grid = sorted(set(grid) | {cfg.fixed_dim})
        fits = fit_dimension_grid(train, grid, cfg.basis, setting.interval,
                                  setting.L, M=cfg.M)
        if "adaptive" in fit_kinds:
            sel = choose_penalized(fits, _penalty(cfg, setting), N=cfg.N, n=cfg.n)
            losses["adaptive"] = heldout_sq_distance(sel.fit, truth, states,
                                                     truncate=cfg.truncate)
        if "oracle" in fit_kinds:
            _, ofit, _ = choose_oracle(fits, truth, eval_, truncate=cfg.truncate)
            losses["oracle"] = heldout_sq_distance(ofit, truth, states,
                                                   truncate=cfg.truncate)
        if "fixed" in fit_kinds:
            gf = next(g for g in fits if g.K == cfg.fixed_dim)
            losses["fixed"] = heldout_sq_distance(gf.fit, truth, states,
                                                  truncate=cfg.truncate)
    if "nw" in kinds:
        if cfg.N != 1:
            raise ValueError("the kernel baseline is a single-path estimator (N = 1)")
        path = train.paths[0]
        pred, _ = baseline.nw_estimate(path, states, baseline.KernelSpec(),
                                       mode=cfg.nw_mode)
        d = pred - truth(states)
        losses["nw"] = float(d @ d / d.size)
    if "truth" in kinds:
        losses["truth"] = empirical_sq_distance(truth, truth, eval_)
    return losses


def _one_rep_safe(cfg: ExperimentConfig, setting: Setting, kinds: Sequence[str],
                  rep: int) -> dict[str, float]:
    try:
        return _one_rep(cfg, setting, kinds, rep)
    except Exception as exc:
        raise RuntimeError(f"repetition {rep} failed: {exc}") from exc


def _run_reps(cfg: ExperimentConfig, kinds: Sequence[str]) -> dict[str, np.ndarray]:
    setting = resolve_setting(cfg.interval, cfg.N, cfg.n, cfg.basis, L=cfg.L)
    if cfg.reps < 1:
        raise ValueError("reps must be >= 1")
    if cfg.n_jobs != 1:
        from joblib import Parallel, delayed
        results = Parallel(n_jobs=cfg.n_jobs)(
            delayed(_one_rep_safe)(cfg, setting, kinds, rep)
            for rep in range(cfg.reps))
    else:
        results = [_one_rep_safe(cfg, setting, kinds, rep)
                   for rep in range(cfg.reps)]
    return {k: np.array([r[k] for r in results]) for k in kinds}


def mise_experiment(cfg: ExperimentConfig) -> MiseReport:
    """Run the four-step Monte-Carlo protocol for one estimator kind."""
    if cfg.estimator not in ESTIMATOR_KINDS:
        raise ValueError(f"unknown estimator kind {cfg.estimator!r}")
    losses = _run_reps(cfg, [cfg.estimator])
    return MiseReport.from_losses(cfg, cfg.estimator, losses[cfg.estimator])


def mise_experiment_pair(cfg: ExperimentConfig) -> dict[str, MiseReport]:
    """Adaptive and oracle reports sharing the per-repetition fits."""
    losses = _run_reps(cfg, ["adaptive", "oracle"])
    return {k: MiseReport.from_losses(cfg, k, losses[k]) for k in losses}
