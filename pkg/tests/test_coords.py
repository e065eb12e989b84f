import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coneflow.coords import (
    ConeChart,
    Divisor,
    DomainError,
    GridSpec,
    angle_distance,
    annulus_of,
    r_of_rho,
    rho_of_r,
    rho_of_w,
    w_of_rho,
)


def test_rho_of_r_examples():
    assert rho_of_r(1.0, 0.0) == 1.0
    assert rho_of_r(0.0, 2.5) == 0.0
    assert rho_of_r(2.0, 1.0) == 2.0


def test_rho_of_r_rejects_bad_order():
    with pytest.raises(DomainError):
        rho_of_r(1.0, -1.0)
    with pytest.raises(DomainError):
        r_of_rho(1.0, -2.0)


def test_w_of_rho_examples():
    assert w_of_rho(1.0) == 0.0
    assert w_of_rho(1 / 8) == -3.0
    # log2(0.3) via natural logs
    assert w_of_rho(0.3) == pytest.approx(math.log(0.3) / math.log(2.0), rel=1e-15)
    assert w_of_rho(0.3) == pytest.approx(-1.7369656, abs=1e-7)


@pytest.mark.parametrize("k", range(0, 60))
def test_w_of_dyadic_is_exact(k):
    assert w_of_rho(math.ldexp(1.0, -k)) == -k
    assert rho_of_w(-k) == math.ldexp(1.0, -k)


def test_w_of_rho_rejects_nonpositive():
    with pytest.raises(DomainError):
        w_of_rho(0.0)
    with pytest.raises(DomainError):
        w_of_rho(-1.0)


def test_annulus_examples():
    assert annulus_of(0.5) == [(1, 1.0)]
    assert annulus_of(0.7) == [(1, 1.4)]
    ks = sorted(k for k, _ in annulus_of(1.5 * 2.0 ** -10))
    assert ks == [9, 10]


def test_annulus_dyadic_point_in_single_annulus():
    for k in range(1, 40):
        out = annulus_of(math.ldexp(1.0, -k))
        assert out == [(k, 1.0)]


def test_annulus_outer_edge_and_domain():
    assert annulus_of(1.0) == []
    for bad in (0.0, -0.1, 1.5):
        with pytest.raises(DomainError):
            annulus_of(bad)


@given(
    st.floats(min_value=1e-6, max_value=50.0, allow_nan=False),
    st.floats(min_value=-0.99, max_value=5.0, allow_nan=False),
)
def test_round_trip(r, beta):
    back = r_of_rho(rho_of_r(r, beta), beta)
    assert abs(back - r) <= 8 * np.finfo(float).eps * r * max(1.0, 1.0 / (beta + 1.0))


def test_round_trip_thousand_samples():
    rng = np.random.default_rng(7)
    r = rng.uniform(1e-3, 10.0, 1000)
    beta = rng.uniform(-0.99, 5.0, 1000)
    back = np.array([r_of_rho(rho_of_r(a, b), b) for a, b in zip(r, beta)])
    rel = np.abs(back - r) / r
    # (beta+1)-th root amplifies the ulp error by 1/(beta+1)
    assert np.all(rel <= 8 * np.finfo(float).eps / np.minimum(beta + 1.0, 1.0))


@given(st.floats(min_value=1e-300, max_value=1.0, exclude_max=True))
def test_annulus_covering(rho):
    out = annulus_of(rho)
    assert 1 <= len(out) <= 2
    for k, s in out:
        assert k >= 1
        assert 0.5 < s < 2.0
        assert s == math.ldexp(rho, k)
    if len(out) == 2:
        assert abs(out[0][0] - out[1][0]) == 1


@given(st.lists(st.floats(min_value=1e-12, max_value=1e6), min_size=2, max_size=30, unique=True))
def test_w_monotone(values):
    rho = np.sort(np.array(values))
    w = w_of_rho(rho)
    assert np.all(np.diff(w) >= 0)
    # neighbours a few ulps apart may round to the same logarithm
    apart = rho[1:] / rho[:-1] > 1 + 1e-12
    assert np.all(np.diff(w)[apart] > 0)


def test_angle_distance_wraps():
    assert angle_distance(0.1, 2 * math.pi - 0.1) == pytest.approx(0.2)
    assert angle_distance(math.pi, 0.0) == pytest.approx(math.pi)


class TestDivisor:
    def test_valid(self):
        d = Divisor((("p", 1.0), ("q", -0.5)))
        assert d.betas == (1.0, -0.5)
        assert d.euler() == 2.5
        assert d.cone_angle("p") == pytest.approx(4 * math.pi)

    def test_rejects_duplicates_and_orders(self):
        with pytest.raises(ValueError):
            Divisor((("p", 1.0), ("p", 0.0)))
        with pytest.raises(DomainError):
            Divisor((("p", -1.0),))
        with pytest.raises(ValueError):
            Divisor((("a", 0.1), ("b", 0.2), ("c", 0.3)))


class TestChartAndGrid:
    def test_rho_cut_is_exact_power_of_two(self):
        for k in range(1, 30):
            ch = ConeChart(0.5, k)
            assert ch.rho_cut == 2.0 ** -k
            assert ch.sigma * (ch.beta + 1) == -1.0

    def test_chart_validation(self):
        with pytest.raises(ValueError):
            ConeChart(0.0, 0)
        with pytest.raises(DomainError):
            ConeChart(-1.5, 3)

    def test_grid(self):
        g = GridSpec.for_chart(ConeChart(0.0, 4), 2.0, 97, 16)
        assert g.w_min == -4.0
        assert g.h_w == pytest.approx(6.0 / 96)
        assert g.shape == (97, 16)
        assert g.index_of_w(-2.0) == 32
        with pytest.raises(ValueError):
            g.index_of_w(-2.01)
        sub = g.restrict(32)
        assert sub.w_min == -2.0 and sub.n_w == 65

    @pytest.mark.parametrize("args", [(-1, 1, 7, 8), (-1, 1, 8, 4), (0, 1, 8, 8), (-1, -2, 8, 8)])
    def test_grid_validation(self, args):
        with pytest.raises(ValueError):
            GridSpec(*args)
