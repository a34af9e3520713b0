import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diffridge import (BSplineBasis, DimensionMismatch, EstimatorFn, NonFiniteInput,
                       PathSample, RidgeFit, build_response, builtin_model, contrast,
                       design_matrix, evaluate, fit_ridge, simulate_sample,
                       truncated_estimator)


def random_instance(rng, rows=None, m=None):
    m = m or rng.integers(1, 6)
    rows = rows or rng.integers(m, 30)
    F = rng.normal(size=(rows, m))
    if rng.random() < 0.2:  # occasional rank deficiency
        F[:, -1] = F[:, 0]
    u = rng.normal(scale=3.0, size=rows)
    L = float(rng.uniform(0.05, 2.0))
    return F, u, int(m), L


class TestResponse:
    def test_constant_path_zero_response(self):
        sample = PathSample.from_values(np.zeros((3, 11)))
        assert np.all(build_response(sample) == 0.0)

    def test_single_increment(self):
        sample = PathSample.from_values([[0.0, 0.1]])  # n = 1, delta = 1
        np.testing.assert_allclose(build_response(sample), [0.01])

    def test_ordering_matches_design_matrix(self):
        values = np.array([[0.0, 1.0, 3.0], [10.0, 10.5, 12.5]])
        sample = PathSample.from_values(values)
        u = build_response(sample)
        # path-major: path 0 increments (1, 2) then path 1 increments (0.5, 2)
        np.testing.assert_allclose(u, np.array([1.0, 4.0, 0.25, 4.0]) * 2.0)

    def test_mean_near_sigma_sq(self):
        sample = simulate_sample(builtin_model("M1"), N=100, n=100, master_seed=8)
        assert build_response(sample).mean() == pytest.approx(1.0, abs=0.05)


class TestContrast:
    def test_perfect_fit(self):
        u = np.array([1.0, 2.0, 3.0])
        assert contrast(u, u) == 0.0

    def test_mean_of_squares(self):
        assert contrast(np.zeros(2), np.ones(2)) == 1.0

    def test_mismatch(self):
        with pytest.raises(DimensionMismatch):
            contrast(np.zeros(2), np.zeros(3))


class TestFitRidge:
    def test_interior_solution(self):
        fit = fit_ridge(np.eye(2), np.array([0.5, 0.5]), 2, 2.0)  # mL = 4
        np.testing.assert_allclose(fit.coeffs, [0.5, 0.5])
        assert fit.lagrange == 0.0 and not fit.active

    def test_ball_projection(self):
        # orthonormal design: constrained solution is the radial projection
        fit = fit_ridge(np.eye(2), np.array([3.0, 4.0]), 2, 2.0)
        np.testing.assert_allclose(fit.coeffs, [1.2, 1.6], atol=1e-9)
        assert fit.active and fit.lagrange > 0
        assert fit.coeffs @ fit.coeffs == pytest.approx(4.0, rel=1e-9)

    def test_rank_deficient_min_norm(self):
        rng = np.random.default_rng(2)
        F = rng.normal(size=(12, 3))
        F[:, 2] = F[:, 0]  # duplicated column
        u = rng.normal(size=12)
        fit = fit_ridge(F, u, 3, 1e6)
        pinv_sol = np.linalg.pinv(F) @ u
        assert np.max(np.abs(fit.coeffs - pinv_sol)) < 1e-10
        resid_fit = np.linalg.norm(u - F @ fit.coeffs)
        resid_pinv = np.linalg.norm(u - F @ pinv_sol)
        assert abs(resid_fit - resid_pinv) < 1e-10

    def test_never_beaten_by_random_feasible(self):
        rng = np.random.default_rng(7)
        F, u, m, L = random_instance(rng, rows=15, m=3)
        fit = fit_ridge(F, u, m, L)
        best = contrast(F @ fit.coeffs, u)
        radius = math.sqrt(m * L)
        for _ in range(100):
            a = rng.normal(size=m)
            a *= rng.uniform(0, radius) / np.linalg.norm(a)
            assert best <= contrast(F @ a, u) + 1e-12

    def test_secular_norm_monotone(self):
        rng = np.random.default_rng(4)
        F = rng.normal(size=(20, 4))
        u = rng.normal(scale=5.0, size=20)
        _, s, Vt = np.linalg.svd(F, full_matrices=False)
        c = s * (np.linalg.svd(F, full_matrices=False)[0].T @ u)
        d = s * s
        lams = np.logspace(-4, 4, 40)
        norms = [np.sum(c ** 2 / (d + lam) ** 2) for lam in lams]
        assert np.all(np.diff(norms) < 0)

    def test_kkt_invariants_random(self):
        rng = np.random.default_rng(11)
        for _ in range(1000):
            F, u, m, L = random_instance(rng)
            fit = fit_ridge(F, u, m, L)
            nsq = float(fit.coeffs @ fit.coeffs)
            assert nsq <= m * L * (1 + 1e-8)
            assert fit.active == (fit.lagrange > 0)
            if fit.active:
                assert abs(nsq - m * L) <= 1e-6 * m * L
            else:
                r = np.linalg.norm(F.T @ F @ fit.coeffs - F.T @ u)
                assert r <= 1e-8 * (1.0 + np.linalg.norm(F.T @ u))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0.01, 10.0))
    def test_feasibility_property(self, salt, L):
        rng = np.random.default_rng(salt)
        F, u, m, _ = random_instance(rng)
        fit = fit_ridge(F, u, m, L)
        assert float(fit.coeffs @ fit.coeffs) <= m * L * (1 + 1e-8)

    def test_brute_force_grid_equivalence_small(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            m = int(rng.integers(1, 4))
            rows = int(rng.integers(m, 8))
            F = rng.normal(size=(rows, m))
            u = rng.normal(scale=2.0, size=rows)
            L = float(rng.uniform(0.05, 0.15))
            fit = fit_ridge(F, u, m, L)
            obj = contrast(F @ fit.coeffs, u)
            assert obj <= grid_search_ball(F, u, m * L) + 1e-6

    def test_errors(self):
        with pytest.raises(DimensionMismatch):
            fit_ridge(np.eye(2), np.zeros(3), 2, 1.0)
        with pytest.raises(DimensionMismatch):
            fit_ridge(np.eye(2), np.zeros(2), 3, 1.0)
        with pytest.raises(NonFiniteInput):
            fit_ridge(np.array([[np.nan, 0.0], [0.0, 1.0]]), np.zeros(2), 2, 1.0)
        with pytest.raises(ValueError):
            fit_ridge(np.eye(2), np.zeros(2), 2, 0.0)


def grid_search_ball(F, u, radius_sq, step=0.01):
    """Independent oracle: exhaustive grid over the feasible ball."""
    r = math.sqrt(radius_sq)
    ax = np.arange(-r, r + step, step)
    m = F.shape[1]
    grids = np.meshgrid(*([ax] * m), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    pts = pts[np.sum(pts * pts, axis=1) <= radius_sq]
    resid = u[None, :] - pts @ F.T
    return float(np.min(np.mean(resid * resid, axis=1)))


class TestEstimatorFn:
    def test_truncation_caps_above(self):
        from diffridge import FourierBasis
        fit = RidgeFit(coeffs=np.array([10.0]), basis=FourierBasis(m=1, a=-1.0, b=1.0),
                       L=4.0, lagrange=0.0, active=False)
        est = EstimatorFn(fit=fit, truncation=2.0)
        assert fit.predict(0.0) > 2.0
        assert evaluate(est, 0.0) == 2.0

    def test_below_cap_untouched(self):
        from diffridge import FourierBasis
        fit = RidgeFit(coeffs=np.array([1.5]), basis=FourierBasis(m=1, a=0.0, b=1.0),
                       L=4.0, lagrange=0.0, active=False)
        est = EstimatorFn(fit=fit, truncation=2.0)
        assert evaluate(est, 0.25) == pytest.approx(1.5)

    def test_partition_of_unity_reproduces_constants(self):
        basis = BSplineBasis(-1, 1, K=4, M=3)
        fit = RidgeFit(coeffs=np.full(basis.m, 0.7), basis=basis, L=9.0,
                       lagrange=0.0, active=False)
        xs = np.linspace(-1, 1, 33)
        np.testing.assert_allclose(fit.predict(xs), 0.7, atol=1e-12)

    def test_truncated_estimator_cap_is_sqrt_L(self):
        basis = BSplineBasis(-1, 1, K=1, M=1)
        fit = RidgeFit(coeffs=np.full(basis.m, 5.0), basis=basis, L=4.0,
                       lagrange=0.0, active=False)
        est = truncated_estimator(fit)
        assert est.truncation == 2.0
        assert np.all(est(np.linspace(-1, 1, 9)) <= 2.0)


class TestConstantRecovery:
    def test_model1_sup_error(self):
        # sigma^2 = 1 recovered uniformly on [-1, 1] once N*n >= 1e5
        sample = simulate_sample(builtin_model("M1"), N=1000, n=100, master_seed=21)
        basis = BSplineBasis(-1, 1, K=4, M=3)
        F = design_matrix(basis, sample)
        u = build_response(sample)
        fit = fit_ridge(F, u, basis.m, math.log(1000 * 100), basis=basis)
        xs = np.linspace(-1, 1, 101)
        assert np.max(np.abs(fit.predict(xs) - 1.0)) < 0.1


class TestSerialization:
    def test_round_trip(self):
        basis = BSplineBasis(-1, 1, K=2, M=3)
        fit = RidgeFit(coeffs=np.arange(1.0, 6.0), basis=basis, L=3.5,
                       lagrange=0.25, active=True)
        rec = json.loads(fit.to_json())
        assert rec["family"] == "bspline" and rec["K"] == 2 and rec["M"] == 3
        clone = RidgeFit.from_json(fit.to_json())
        xs = np.linspace(-1, 1, 17)
        np.testing.assert_allclose(clone.predict(xs), fit.predict(xs))
        assert clone.L == fit.L and clone.active == fit.active
