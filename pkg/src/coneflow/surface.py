"""Sampled cone metrics on the ``(w, theta)`` cylinder.

A metric is ``g = exp(2u) g0`` with ``g0 = exp(2 wt) (d rho^2 + (beta+1)^2 rho^2 dtheta^2)``
and ``rho = 2**w``. In cylinder coordinates

    Delta_g = exp(-2u - 2wt) rho^-2 [ (ln 2)^-2 d_ww + (beta+1)^-2 d_thetatheta ],
    dA_g    = exp(2u + 2wt) (beta+1) rho^2 ln 2  dw dtheta.

Fields are stored row-major as ``values[i_w, i_theta]``; theta is periodic.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .coords import TWO_PI, ConeChart, Divisor, GridSpec

LN2 = math.log(2.0)


class ShapeError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ShapeError(f"values have shape {v.shape}, grid wants {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, grid: GridSpec) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def constant(cls, grid: GridSpec, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(value)))

    @classmethod
    def from_function(cls, grid: GridSpec, fn) -> "ScalarField":
        """Sample ``fn(W, THETA)`` on the grid."""
        W, TH = grid.mesh()
        return cls(grid, np.broadcast_to(fn(W, TH), grid.shape))

    @classmethod
    def radial(cls, grid: GridSpec, profile) -> "ScalarField":
        return cls(grid, np.repeat(np.asarray(profile, float)[:, None], grid.n_theta, axis=1))

    def _other(self, other):
        if isinstance(other, ScalarField):
            if other.grid != self.grid:
                raise ShapeError("fields live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return ScalarField(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - self._other(other))

    def __mul__(self, other):
        return ScalarField(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.grid, -self.values)

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def restrict(self, i0: int, i1: int | None = None) -> "ScalarField":
        return ScalarField(self.grid.restrict(i0, i1), self.values[i0:i1])

    # -- CSV: header ``w,theta,value``, w-major ---------------------------------

    def to_csv(self) -> str:
        W, TH = self.grid.mesh()
        buf = io.StringIO()
        buf.write("w,theta,value\n")
        for w, t, v in zip(W.ravel(), TH.ravel(), self.values.ravel()):
            buf.write(f"{w:.17g},{t:.17g},{v:.17g}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, grid: GridSpec | None = None) -> "ScalarField":
        lines = text.strip().splitlines()
        if len(lines) < 2 or lines[0].strip() != "w,theta,value":
            raise ValueError("field CSV needs a 'w,theta,value' header and at least one row")
        data = np.loadtxt(lines[1:], delimiter=",", ndmin=2)
        if data.shape[1] != 3:
            raise ValueError("field CSV rows must have three columns")
        w, th, v = data[:, 0], data[:, 1], data[:, 2]
        ws = np.unique(w)
        n_theta = len(v) // len(ws)
        if grid is None:
            grid = GridSpec(float(ws[0]), float(ws[-1]), len(ws), n_theta)
        if len(v) != grid.n_w * grid.n_theta:
            raise ShapeError("CSV rows do not match the grid")
        return cls(grid, v.reshape(grid.shape))


@dataclass(frozen=True, eq=False)
class ConeMetric:
    """``g = exp(2 conformal) g0`` on one cone chart.

    ``base_curvature`` optionally supplies the Gauss curvature of ``g0``;
    otherwise it is computed from ``background`` by the discrete Laplacian.
    ``euler`` is ``chi(S) + sum(beta_i)`` for the modelled sphere.
    """

    chart: ConeChart
    background: ScalarField
    conformal: ScalarField
    euler: float
    base_curvature: ScalarField | None = None

    def __post_init__(self):
        if self.background.grid != self.conformal.grid:
            raise ShapeError("background and conformal factor must share a grid")
        if self.base_curvature is not None and self.base_curvature.grid != self.grid:
            raise ShapeError("base curvature lives on a different grid")

    @property
    def grid(self) -> GridSpec:
        return self.background.grid

    @property
    def beta(self) -> float:
        return self.chart.beta

    def with_conformal(self, u: ScalarField) -> "ConeMetric":
        return ConeMetric(self.chart, self.background, u, self.euler, self.base_curvature)

    def base(self) -> "ConeMetric":
        """The background metric ``g0`` (conformal factor reset to zero)."""
        return self.with_conformal(ScalarField.zeros(self.grid))

    def restrict(self, i0: int, i1: int | None = None) -> "ConeMetric":
        K0 = None if self.base_curvature is None else self.base_curvature.restrict(i0, i1)
        return ConeMetric(self.chart, self.background.restrict(i0, i1),
                          self.conformal.restrict(i0, i1), self.euler, K0)

    def conformal_weight(self) -> np.ndarray:
        """``exp(2u + 2wt) rho^2`` on the grid."""
        rho2 = np.exp2(2.0 * self.grid.w)[:, None]
        return np.exp(2.0 * (self.conformal.values + self.background.values)) * rho2

    def to_json(self) -> dict:
        g = self.grid
        out = {
            "beta": self.chart.beta, "k_max": self.chart.k_max, "w_max": g.w_max,
            "n_w": g.n_w, "n_theta": g.n_theta, "euler": self.euler,
            "background": self.background.to_csv(), "conformal": self.conformal.to_csv(),
        }
        if self.base_curvature is not None:
            out["base_curvature"] = self.base_curvature.to_csv()
        return out

    @classmethod
    def from_json(cls, data: dict | str) -> "ConeMetric":
        if isinstance(data, str):
            data = json.loads(data)
        chart = ConeChart(float(data["beta"]), int(data["k_max"]))
        grid = GridSpec.for_chart(chart, float(data["w_max"]), int(data["n_w"]), int(data["n_theta"]))
        bg = ScalarField.from_csv(data["background"], grid)
        u = ScalarField.from_csv(data["conformal"], grid)
        K0 = ScalarField.from_csv(data["base_curvature"], grid) if "base_curvature" in data else None
        return cls(chart, bg, u, float(data["euler"]), K0)


@dataclass(frozen=True)
class SurfaceModel:
    """Sphere with at most two cone points, realised as one truncated cylinder.

    The chart's cone point sits at ``w -> -inf``; the other pole (a second
    cone point, or a smooth pole of order 0) sits at ``w -> +inf``.
    """

    divisor: Divisor
    charts: tuple[ConeChart, ...]

    def __post_init__(self):
        if not 1 <= len(self.charts) <= 2:
            raise ValueError("a surface model has one or two ends")
        if len(self.charts) != max(len(self.divisor.entries), 1) and len(self.divisor.entries) != 2:
            raise ValueError("number of ends must match the divisor (smooth poles included)")

    @property
    def euler(self) -> float:
        return self.divisor.euler()


# -- difference operators ---------------------------------------------------


def _d2_w(v: np.ndarray, h: float) -> np.ndarray:
    """Second ``w`` derivative, centered inside, one-sided 2nd order at the ends.

    Written in first differences so constants give exactly zero.
    """
    d = np.diff(v, axis=0)
    out = np.empty_like(v)
    out[1:-1] = (d[1:] - d[:-1]) / h ** 2
    # 2 v0 - 5 v1 + 4 v2 - v3
    out[0] = (-2.0 * d[0] + 3.0 * d[1] - d[2]) / h ** 2
    out[-1] = (2.0 * d[-1] - 3.0 * d[-2] + d[-3]) / h ** 2
    return out


def _d2_theta(v: np.ndarray, h: float) -> np.ndarray:
    d = np.roll(v, -1, axis=1) - v
    return (d - np.roll(d, 1, axis=1)) / h ** 2


def d_w(v: np.ndarray, h: float) -> np.ndarray:
    """First ``w`` derivative, centered inside, one-sided 2nd order at the ends."""
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - v[:-2]) / (2.0 * h)
    out[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
    out[-1] = (3.0 * v[-1] - 4.0 * v[-2] + v[-3]) / (2.0 * h)
    return out


def d_theta(v: np.ndarray, h: float) -> np.ndarray:
    return (np.roll(v, -1, axis=1) - np.roll(v, 1, axis=1)) / (2.0 * h)


def cylinder_operator(grid: GridSpec, beta: float, v: np.ndarray) -> np.ndarray:
    """``(ln 2)^-2 d_ww v + (beta+1)^-2 d_thetatheta v``."""
    return _d2_w(v, grid.h_w) / LN2 ** 2 + _d2_theta(v, grid.h_theta) / (beta + 1.0) ** 2


def flat_cone_laplacian(grid: GridSpec, beta: float, v: np.ndarray) -> np.ndarray:
    return cylinder_operator(grid, beta, v) / np.exp2(2.0 * grid.w)[:, None]


def cone_laplacian(metric: ConeMetric, field: ScalarField) -> ScalarField:
    """Laplace-Beltrami operator of ``metric`` applied to ``field``."""
    if field.grid != metric.grid:
        raise ShapeError("field and metric live on different grids")
    g = metric.grid
    lap = cylinder_operator(g, metric.beta, field.values)
    return ScalarField(g, lap / metric.conformal_weight())


def base_curvature(metric: ConeMetric) -> ScalarField:
    """Gauss curvature ``K0`` of the background metric ``g0``."""
    if metric.base_curvature is not None:
        return metric.base_curvature
    g = metric.grid
    wt = metric.background.values
    lap = flat_cone_laplacian(g, metric.beta, wt)
    return ScalarField(g, -np.exp(-2.0 * wt) * lap)


def gauss_curvature(metric: ConeMetric) -> ScalarField:
    """``K = exp(-2u) (-Delta_{g0} u + K0)``."""
    g0 = metric.base()
    u = metric.conformal
    lap0 = cone_laplacian(g0, u).values
    K0 = base_curvature(metric).values
    return ScalarField(metric.grid, np.exp(-2.0 * u.values) * (-lap0 + K0))


def scalar_curvature(metric: ConeMetric) -> ScalarField:
    return 2.0 * gauss_curvature(metric)


def trapezoid_weights(grid: GridSpec) -> np.ndarray:
    """Quadrature weights in ``(w, theta)``: trapezoid in ``w``, rectangle in ``theta``."""
    q = np.full(grid.n_w, grid.h_w)
    q[0] = q[-1] = grid.h_w / 2.0
    return np.repeat((q * grid.h_theta)[:, None], grid.n_theta, axis=1)


def area_density(metric: ConeMetric) -> np.ndarray:
    """Discrete area element per grid node (quadrature weight included)."""
    return metric.conformal_weight() * (metric.beta + 1.0) * LN2 * trapezoid_weights(metric.grid)


def integrate(metric: ConeMetric, field: ScalarField | float) -> float:
    """``int field dA_g`` over the truncated surface, summed w-major with ``fsum``."""
    if isinstance(field, ScalarField):
        if field.grid != metric.grid:
            raise ShapeError("field and metric live on different grids")
        vals = field.values
    else:
        vals = np.full(metric.grid.shape, float(field))
    return math.fsum((vals * area_density(metric)).ravel())


def volume(metric: ConeMetric) -> float:
    return integrate(metric, 1.0)


def gauss_bonnet_defect(metric: ConeMetric) -> float:
    """``int K dA - 2 pi chi~`` over the truncated grid."""
    return integrate(metric, gauss_curvature(metric)) - TWO_PI * metric.euler


# -- symmetric Neumann operator used by the time steppers ----------------------


def neumann_stiffness_parts(grid: GridSpec, beta: float) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """``(S_w, S_theta)``: the two directional pieces of :func:`neumann_stiffness`."""
    n_w, n_t = grid.shape
    n = n_w * n_t
    hw, ht = grid.h_w, grid.h_theta
    cw = 1.0 / (LN2 ** 2 * hw ** 2)
    ct = 1.0 / ((beta + 1.0) ** 2 * ht ** 2)
    q = np.full(n_w, hw * ht)
    q[0] = q[-1] = hw * ht / 2.0
    idx = np.arange(n).reshape(n_w, n_t)

    def edges(a, b, e):
        rows = np.concatenate([a, b, a, b])
        cols = np.concatenate([a, b, b, a])
        vals = np.concatenate([e, e, -e, -e])
        return sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()

    # w-edges between rows i and i+1; the ghost reflection gives the
    # boundary rows half a cell times twice the coupling, i.e. one full edge
    a, b = idx[:-1].ravel(), idx[1:].ravel()
    S_w = edges(a, b, np.full(a.size, hw * ht * cw))
    # theta-edges, periodic
    a, b = idx.ravel(), np.roll(idx, -1, axis=1).ravel()
    S_t = edges(a, b, np.repeat(q * ct, n_t))
    return S_w, S_t


def neumann_stiffness(grid: GridSpec, beta: float) -> sp.csr_matrix:
    """Symmetric matrix ``S`` with ``-S u = Q * P_N u``.

    ``P_N`` is :func:`cylinder_operator` with ghost-point reflection (zero
    normal derivative) at both ``w`` ends and ``Q`` the trapezoid weights.
    Hence ``sum(Q * P_N u) == 0`` for every ``u``: the discrete divergence
    theorem holds exactly.
    """
    S_w, S_t = neumann_stiffness_parts(grid, beta)
    return (S_w + S_t).tocsr()


def neumann_laplacian(metric: ConeMetric, field: ScalarField) -> ScalarField:
    """Laplacian with the zero-flux ghost-point closure at both ``w`` ends."""
    g = metric.grid
    S = neumann_stiffness(g, metric.beta)
    Q = trapezoid_weights(g)
    P = -(S @ field.values.ravel()).reshape(g.shape) / Q
    return ScalarField(g, P / metric.conformal_weight())


def dirichlet_energy(metric: ConeMetric, field: ScalarField) -> float:
    """``int |grad u|^2 dA``; conformally invariant, so only ``beta`` and the grid enter.

    Edge-based, matching :func:`neumann_stiffness`: ``(beta+1) ln2 * u^T S u``.
    """
    if field.grid != metric.grid:
        raise ShapeError("field and metric live on different grids")
    g = metric.grid
    u = field.values
    cw = 1.0 / (LN2 ** 2 * g.h_w ** 2)
    ct = 1.0 / ((metric.beta + 1.0) ** 2 * g.h_theta ** 2)
    q = np.full(g.n_w, g.h_w * g.h_theta)
    q[0] = q[-1] = g.h_w * g.h_theta / 2.0
    ew = g.h_w * g.h_theta * cw
    e_w = ew * (u[1:] - u[:-1]) ** 2
    e_t = (q * ct)[:, None] * (np.roll(u, -1, axis=1) - u) ** 2
    return (metric.beta + 1.0) * LN2 * (math.fsum(e_w.ravel()) + math.fsum(e_t.ravel()))


# -- model metrics ----------------------------------------------------------


def round_sphere(grid: GridSpec, k_max: int | None = None) -> ConeMetric:
    """Unit round sphere as a beta=0 chart: ``wt = log(4 / (1 + 4 rho^2))``, ``K0 = 1``.

    This is the exact background; ``base_curvature`` is left to the discrete
    operator so curvature checks exercise it.
    """
    k_max = int(round(-grid.w_min)) if k_max is None else k_max
    rho2 = np.exp2(2.0 * grid.w)
    wt = np.log(4.0 / (1.0 + 4.0 * rho2))
    return ConeMetric(ConeChart(0.0, k_max), ScalarField.radial(grid, wt),
                      ScalarField.zeros(grid), euler=2.0)


def spherical_football(grid: GridSpec, beta: float, k_max: int | None = None) -> ConeMetric:
    """Constant curvature 1 metric with two cone points of order ``beta``.

    It is the unit sphere with its angle scaled by ``beta + 1``:
    ``wt = log(4 / (1 + 4 rho^2))`` in the chart of order ``beta``.
    """
    k_max = int(round(-grid.w_min)) if k_max is None else k_max
    rho2 = np.exp2(2.0 * grid.w)
    wt = np.log(4.0 / (1.0 + 4.0 * rho2))
    return ConeMetric(ConeChart(beta, k_max), ScalarField.radial(grid, wt),
                      ScalarField.zeros(grid), euler=2.0 + 2.0 * beta)


def flat_cylinder(grid: GridSpec, beta: float = 0.0, k_max: int | None = None) -> ConeMetric:
    """``g0 = ln(2)^2 dw^2 + (beta+1)^2 dtheta^2``: background ``wt = -w ln 2``."""
    k_max = int(round(-grid.w_min)) if k_max is None else k_max
    return ConeMetric(ConeChart(beta, k_max), ScalarField.radial(grid, -grid.w * LN2),
                      ScalarField.zeros(grid), euler=0.0,
                      base_curvature=ScalarField.zeros(grid))


def flat_cone(grid: GridSpec, beta: float, k_max: int | None = None) -> ConeMetric:
    k_max = int(round(-grid.w_min)) if k_max is None else k_max
    return ConeMetric(ConeChart(beta, k_max), ScalarField.zeros(grid),
                      ScalarField.zeros(grid), euler=1.0 + beta,
                      base_curvature=ScalarField.zeros(grid))


@dataclass(frozen=True, eq=False)
class SpaceTimeField:
    """Frames of one grid at increasing times starting from 0."""

    times: np.ndarray
    frames: tuple[ScalarField, ...]

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        frames = tuple(self.frames)
        if len(t) != len(frames) or len(t) == 0:
            raise ShapeError("need one frame per time")
        if t[0] != 0.0 or np.any(np.diff(t) <= 0):
            raise ValueError("times must start at 0 and increase")
        g = frames[0].grid
        if any(f.grid != g for f in frames):
            raise ShapeError("all frames must share one grid")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "frames", frames)

    @property
    def grid(self) -> GridSpec:
        return self.frames[0].grid

    @classmethod
    def constant_in_time(cls, field: ScalarField, T: float) -> "SpaceTimeField":
        return cls(np.array([0.0, float(T)]), (field, field))

    @classmethod
    def from_function(cls, grid: GridSpec, times, fn) -> "SpaceTimeField":
        """Sample ``fn(W, THETA, t)`` at each time."""
        return cls(np.asarray(times, float),
                   tuple(ScalarField.from_function(grid, lambda W, TH, t=t: fn(W, TH, t))
                         for t in times))

    def values(self) -> np.ndarray:
        """Array of shape ``(n_t, n_w, n_theta)``."""
        return np.stack([f.values for f in self.frames])

    def at(self, t: float) -> np.ndarray:
        """Linear interpolation in time; constant beyond the last frame."""
        times = self.times
        if t <= times[0]:
            return self.frames[0].values
        if t >= times[-1]:
            return self.frames[-1].values
        i = int(np.searchsorted(times, t, side="right")) - 1
        lam = (t - times[i]) / (times[i + 1] - times[i])
        if lam == 0.0:
            return self.frames[i].values
        return (1.0 - lam) * self.frames[i].values + lam * self.frames[i + 1].values

    def final(self) -> ScalarField:
        return self.frames[-1]
