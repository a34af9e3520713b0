import math

import numpy as np
import pytest

from diffridge import DegeneratePath, KernelSpec, nw_estimate, scott_bandwidth
from diffridge.sde import DiffusionPath


def path_from(values):
    return DiffusionPath(np.asarray(values, dtype=float))


class TestScottBandwidth:
    def test_unit_sd_formula(self):
        rng = np.random.default_rng(0)
        vals = rng.normal(size=101)
        vals = (vals - vals.mean()) / vals.std(ddof=1)  # exact unit sample sd
        h = scott_bandwidth(path_from(vals))
        assert h == pytest.approx(100 ** -0.2, rel=1e-12)
        assert h == pytest.approx(0.39811, abs=1e-5)

    def test_scaling_law(self):
        rng = np.random.default_rng(1)
        base = rng.normal(size=64)
        small = path_from(base)
        big = path_from(np.concatenate([base] * 16 + [base[:1]])[: 16 * 63 + 1])
        ratio = scott_bandwidth(big) / scott_bandwidth(small)
        sd_ratio = (np.std(big.values, ddof=1) / np.std(small.values, ddof=1))
        assert ratio == pytest.approx(sd_ratio * 16 ** -0.2, rel=1e-9)

    def test_degenerate(self):
        with pytest.raises(DegeneratePath):
            scott_bandwidth(path_from(np.full(11, 2.0)))


class TestNwEstimate:
    def test_two_point_hand_computation(self):
        # n = 2: numerator has the single k = 1 term, denominator k = 1, 2
        v = np.array([0.0, 1.0, 1.5])
        path = path_from(v)
        h = 0.25
        x = 1.0
        val, flag = nw_estimate(path, x, KernelSpec(bandwidth=h), mode="literal")
        k1 = math.exp(-0.5 * ((v[1] - x) / h) ** 2)
        k2 = math.exp(-0.5 * ((v[2] - x) / h) ** 2)
        expected = (k1 * (v[2] - v[1]) ** 2 / 2) / (k1 + k2)
        assert not flag
        assert val == pytest.approx(expected, rel=1e-12)

    def test_corrected_mode_scaling(self):
        v = np.array([0.0, 1.0, 1.5])
        path = path_from(v)
        h = 0.25
        val, _ = nw_estimate(path, 1.0, KernelSpec(bandwidth=h), mode="corrected")
        k1 = math.exp(0.0)
        expected = (k1 * (v[2] - v[1]) ** 2 * 2) / k1
        assert val == pytest.approx(expected, rel=1e-12)

    def test_ratio_invariant_under_kernel_scaling(self):
        # scaling all weights by a positive constant cancels in the ratio;
        # equivalently the estimate is invariant under x-translation of the
        # whole configuration
        rng = np.random.default_rng(5)
        vals = np.cumsum(rng.normal(scale=0.1, size=51))
        path = path_from(vals)
        spec = KernelSpec(bandwidth=0.3)
        val1, _ = nw_estimate(path, 0.2, spec)
        val2, _ = nw_estimate(path_from(vals + 7.0), 7.2, spec)
        assert val1 == pytest.approx(val2, rel=1e-10)

    def test_underflow_far_from_data(self):
        rng = np.random.default_rng(6)
        vals = np.cumsum(rng.normal(scale=0.05, size=101))
        path = path_from(vals)
        h = scott_bandwidth(path)
        far = float(vals.max() + 40.0 * h + 40.0)
        val, flag = nw_estimate(path, far, KernelSpec())
        assert flag and val == 0.0
        near, nflag = nw_estimate(path, float(vals.mean()), KernelSpec())
        assert not nflag and near >= 0.0

    def test_vectorized_grid(self):
        rng = np.random.default_rng(7)
        vals = np.cumsum(rng.normal(scale=0.1, size=201))
        path = path_from(vals)
        xs = np.linspace(vals.min(), vals.max(), 21)
        out, flags = nw_estimate(path, xs, KernelSpec())
        assert out.shape == (21,) and flags.shape == (21,)
        assert np.all(out >= 0.0) and not flags.any()
        scalar_val, _ = nw_estimate(path, float(xs[3]), KernelSpec())
        assert scalar_val == pytest.approx(out[3], rel=1e-12)

    def test_literal_underscales_by_n_squared(self):
        # the literal formula carries increments^2/n, the corrected one
        # increments^2 * n: ratio ~ n^2 at interior points
        rng = np.random.default_rng(8)
        vals = np.cumsum(rng.normal(scale=0.02, size=501))
        path = path_from(vals)
        x = float(np.median(vals))
        lit, _ = nw_estimate(path, x, KernelSpec(), mode="literal")
        cor, _ = nw_estimate(path, x, KernelSpec(), mode="corrected")
        assert cor / max(lit, 1e-300) > 0.2 * path.n ** 2

    def test_bad_mode(self):
        with pytest.raises(ValueError):
            nw_estimate(path_from([0.0, 1.0, 2.0]), 0.0, KernelSpec(), mode="fast")

    def test_kernel_spec_validation(self):
        with pytest.raises(ValueError):
            KernelSpec(bandwidth=-1.0)
        with pytest.raises(ValueError):
            KernelSpec(rule="silverman")
