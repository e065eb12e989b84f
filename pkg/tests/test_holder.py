import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coneflow.coords import GridSpec
from coneflow.holder import (
    HolderSpec,
    ResolutionError,
    covered_annuli,
    cylinder_norm,
    global_holder_norm,
    holder_seminorm,
    parabolic_holder_norm,
    weighted_holder_norm,
)
from coneflow.surface import ScalarField, SpaceTimeField
from oracles import brute_holder_quotient


def chart_grid(k=8, w_max=2.0, per_unit=16, n_t=16):
    return GridSpec(-float(k), w_max, int(per_unit * (k + w_max)) + 1, n_t)


class TestSpec:
    @pytest.mark.parametrize("l,alpha", [(3, 0.5), (-1, 0.5), (1, 0.0), (1, 1.0)])
    def test_rejects(self, l, alpha):
        with pytest.raises(ValueError):
            HolderSpec(l, alpha)


class TestSeminorm:
    @settings(max_examples=20)
    @given(st.integers(0, 2**32 - 1), st.floats(0.05, 0.95), st.integers(2, 5))
    def test_matches_brute_force(self, seed, alpha, n_x):
        rng = np.random.default_rng(seed)
        n_t = 6
        F = rng.normal(size=(n_x, n_t))
        x = np.cumsum(rng.uniform(0.1, 0.5, n_x))
        h_t = 2 * math.pi / n_t
        got = holder_seminorm(F, x, h_t, alpha)
        assert got == pytest.approx(brute_holder_quotient(F, x, h_t, alpha), rel=1e-13)

    @settings(max_examples=20)
    @given(st.integers(0, 2**32 - 1), st.floats(-5, 5))
    def test_homogeneous_and_stride_lower_bound(self, seed, a):
        rng = np.random.default_rng(seed)
        F = rng.normal(size=(7, 8))
        x = np.linspace(0, 1, 7)
        h = 2 * math.pi / 8
        full = holder_seminorm(F, x, h, 0.4)
        assert holder_seminorm(a * F, x, h, 0.4) == pytest.approx(abs(a) * full, rel=1e-12, abs=1e-300)
        assert holder_seminorm(F, x, h, 0.4, stride=2) <= full

    def test_constant_is_zero(self):
        assert holder_seminorm(np.full((5, 8), 2.0), np.arange(5.0), 0.7, 0.5) == 0.0


class TestWeightedNorm:
    def test_constant(self):
        g = chart_grid()
        rep = weighted_holder_norm(ScalarField.constant(g, 3.5), HolderSpec(1, 0.5))
        assert rep.total == 3.5
        assert all(v == 3.5 for v in rep.values())
        assert [k for k, _ in rep.parts] == list(range(1, 8))
        assert not rep.unbounded

    def test_power_of_rho_scales_per_annulus(self):
        # rho^0.7 restricted to annulus k equals 2^{-0.7 k} s^0.7
        g = chart_grid(k=12, per_unit=32)
        f = ScalarField.from_function(g, lambda W, T: np.exp2(0.7 * W) + 0 * T)
        for l, tol in ((0, 1e-14), (1, 1e-3)):
            rep = weighted_holder_norm(f, HolderSpec(l, 0.5))
            ks = np.array([k for k, _ in rep.parts])
            scaled = rep.values() * np.exp2(0.7 * ks)
            assert np.ptp(scaled) / scaled.mean() < tol
            assert rep.saturating_k == 1

    def test_log_rho_flagged(self):
        g = chart_grid(k=10)
        f = ScalarField.from_function(g, lambda W, T: W * math.log(2) + 0 * T)
        rep = weighted_holder_norm(f, HolderSpec(0, 0.5))
        assert rep.unbounded
        assert rep.saturating_k == max(k for k, _ in rep.parts)

    def test_angular_mode_independent_of_k(self):
        g = chart_grid(k=10)
        f = ScalarField.from_function(g, lambda W, T: np.sin(T) + 0 * W)
        vals = weighted_holder_norm(f, HolderSpec(1, 0.3)).values()
        assert np.ptp(vals) < 1e-12
        assert not weighted_holder_norm(f, HolderSpec(1, 0.3)).unbounded

    def test_rotation_by_grid_step_is_exact(self):
        g = chart_grid()
        f = ScalarField.from_function(g, lambda W, T: np.cos(T + 0.3) * np.exp(W / 4) + W ** 2)
        rolled = ScalarField(g, np.roll(f.values, 5, axis=1))
        a = weighted_holder_norm(f, HolderSpec(2, 0.5)).values()
        b = weighted_holder_norm(rolled, HolderSpec(2, 0.5)).values()
        np.testing.assert_allclose(a, b, rtol=1e-14)

    def test_resolution_error(self):
        g = GridSpec(-6.0, 1.0, 22, 8)
        with pytest.raises(ResolutionError) as exc:
            weighted_holder_norm(ScalarField.constant(g, 1.0), HolderSpec(0, 0.5))
        assert exc.value.rows < 8

    def test_json(self):
        g = chart_grid(k=4)
        rep = global_holder_norm(ScalarField.constant(g, 1.0), HolderSpec(0, 0.5))
        d = rep.to_json()
        assert set(d) == {"total", "parts", "saturating_k", "slack", "unbounded", "band"}
        assert d["band"] == 1.0 and d["total"] == 1.0


class TestReportAxioms:
    @staticmethod
    def field(g, seed):
        rng = np.random.default_rng(seed)
        a, b, c = rng.normal(size=3)
        return ScalarField.from_function(
            g, lambda W, T: a * np.sin(T + b) * np.exp2(0.5 * W) + c * np.cos(2 * T))

    @settings(max_examples=10)
    @given(st.integers(0, 2**32 - 1), st.floats(-4, 4))
    def test_homogeneous(self, seed, lam):
        g = chart_grid(k=5)
        f = self.field(g, seed)
        spec = HolderSpec(0, 0.5)
        a = weighted_holder_norm(f * lam, spec).total
        assert a == pytest.approx(abs(lam) * weighted_holder_norm(f, spec).total,
                                  rel=1e-13, abs=1e-300)

    @settings(max_examples=10)
    @given(st.integers(0, 2**32 - 1), st.integers(0, 2**32 - 1))
    def test_triangle(self, s1, s2):
        g = chart_grid(k=5)
        f, h = self.field(g, s1), self.field(g, s2)
        spec = HolderSpec(0, 0.5)
        n = lambda x: weighted_holder_norm(x, spec).total  # noqa: E731
        assert n(f + h) <= n(f) + n(h) + 1e-12

    def test_refinement_within_slack(self):
        fn = lambda W, T: np.sin(3 * T) * np.exp2(0.6 * W) + np.cos(T)  # noqa: E731
        spec = HolderSpec(0, 0.5)
        coarse = weighted_holder_norm(ScalarField.from_function(chart_grid(k=5), fn), spec)
        fine = weighted_holder_norm(
            ScalarField.from_function(chart_grid(k=5, per_unit=32, n_t=32), fn), spec)
        assert fine.total >= coarse.total - coarse.slack
        assert coarse.slack > 0


class TestCylinderNorm:
    def test_linear_in_w(self):
        # F = w on a tube: sup|F| + sup|F_w| + [F_w]; F_w is exactly 1
        g = chart_grid(k=6)
        f = ScalarField.from_function(g, lambda W, T: W + 0 * T)
        v = cylinder_norm(f, HolderSpec(1, 0.5), k=3)
        assert v == pytest.approx(4.0 + 1.0 + 0.0, abs=1e-12)

    def test_range(self):
        g = chart_grid(k=6)
        f = ScalarField.constant(g, -2.0)
        assert cylinder_norm(f, HolderSpec(0, 0.5), w_range=(-2.0, 2.0)) == 2.0
        with pytest.raises(ValueError):
            cylinder_norm(f, HolderSpec(0, 0.5), w_range=(0.01, 0.02))

    def test_covered(self):
        assert covered_annuli(ScalarField.zeros(chart_grid(k=5, w_max=0.0))) == [1, 2, 3, 4]


class TestParabolic:
    def test_time_linear_field(self):
        # F = t: the quotient is attained by the two end times at zero spatial offset
        g = chart_grid(k=5, w_max=1.0, per_unit=8, n_t=8)
        T, alpha = 0.2, 0.5
        times = np.linspace(0, T, 5)
        fld = SpaceTimeField.from_function(g, times, lambda W, TH, t: t + 0 * W)
        rep = parabolic_holder_norm(fld, HolderSpec(0, alpha))
        for k, v in rep.parts:
            assert v == pytest.approx(T + T ** (1 - alpha / 2) * 2.0 ** (-k * alpha), rel=1e-12)
        assert rep.saturating_k == 1

    def test_steady_matches_spatial(self):
        g = chart_grid(k=5, w_max=1.0, per_unit=8, n_t=8)
        f = ScalarField.from_function(g, lambda W, T: np.sin(T) * np.exp2(W))
        st_ = SpaceTimeField.from_function(g, np.array([0.0, 0.1, 0.2]), lambda W, T, t: np.sin(T) * np.exp2(W))
        a = parabolic_holder_norm(st_, HolderSpec(0, 0.5)).values()
        b = weighted_holder_norm(f, HolderSpec(0, 0.5)).values()
        np.testing.assert_allclose(a, b, rtol=1e-13)

    def test_l_restricted(self):
        g = chart_grid(k=4, per_unit=8, n_t=8)
        st_ = SpaceTimeField.constant_in_time(ScalarField.zeros(g), 1.0)
        with pytest.raises(ValueError):
            parabolic_holder_norm(st_, HolderSpec(1, 0.5))
