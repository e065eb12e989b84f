"""Rotationally symmetric gradient shrinking solitons on the tear drop and football.

A metric ``g = exp(2u(r)) (dr**2 + r**2 dtheta**2)`` on the plane is a
gradient soliton with radial conformal Killing field ``c r d/dr`` when

    u'' + (1/r + c r exp(2u)) u' + (1 + c) exp(2u) = 0,   u(0) = u'(0) = 0.

With ``A = r u'`` and ``B = r exp(2u)`` this becomes

    A' = -B (c A + c + 1),     B' = B (2 A + 1) / r,

and ``A`` decreases to a limit ``A_c``; the metric closes up at ``r = inf``
with a cone point of order ``beta = -A_c - 2``.

Integration runs in ``z = log r`` on the state ``(g, log B, u)`` where
``g = A`` for ``c < 1`` and ``g = log(A + (c+1)/c)`` for ``c >= 1``. The
second form keeps the strict floor ``A > -(c+1)/c`` visible in double
precision even when ``A`` sits within ``exp(-c)`` of it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BPoly
from scipy.optimize import brentq

from .coords import TWO_PI, ConeChart, GridSpec
from .rk import dopri5

R_START = 1e-4
R_MAX = 1e6
EPS_B = 1e-12
# below this c the plain A state loses nothing to the floor (c+1)/c
GAP_C = 1.0
SERIES_RATIO_MAX = 1e-8
MONOTONE_SLACK = 1e-10


class SolitonError(RuntimeError):
    pass


class SeriesPrecisionError(SolitonError):
    pass


class BracketError(SolitonError):
    pass


def series_coefficients(c: float) -> tuple[float, float, float]:
    """Coefficients ``a2, a4, a6`` of ``u = a2 r^2 + a4 r^4 + a6 r^6 + ...``."""
    a2 = -(1.0 + c) / 4.0
    a4 = -a2 * (1.0 + 2.0 * c) / 8.0
    a6 = -(a4 + a2 * a2) * (3.0 * c + 1.0) / 18.0
    return a2, a4, a6


def series_start(c: float, r_start: float = R_START) -> tuple[float, float, float, float]:
    """Launch values ``(u, u', A, B)`` at ``r_start`` from the power series at 0.

    Two series terms are used; the third bounds the truncation error, which
    must stay below ``1e-8`` relative to ``|u|``.
    """
    if not 0.0 < r_start <= 1e-3:
        raise ValueError("r_start must lie in (0, 1e-3]")
    a2, a4, a6 = series_coefficients(c)
    r2 = r_start * r_start
    u = a2 * r2 + a4 * r2 * r2
    du = 2.0 * a2 * r_start + 4.0 * a4 * r2 * r_start
    if u != 0.0 and abs(a6 * r2 ** 3) > SERIES_RATIO_MAX * abs(u):
        raise SeriesPrecisionError(
            f"series not converged at r_start={r_start} for c={c}; use a smaller r_start"
        )
    return u, du, r_start * du, r_start * math.exp(2.0 * u)


def default_r_start(c: float) -> float:
    # the series variable is (1 + c) r^2
    return min(R_START, 1e-3 / math.sqrt(1.0 + max(c, 0.0)))


@dataclass
class SolitonProfile:
    """One trajectory of the soliton ODE for a given ``c``.

    ``r, u, A, B`` are the accepted integrator nodes. ``A_limit`` includes
    the tail beyond ``r_stop``; ``uncertainty`` bounds that tail. For
    ``c >= 1``, ``log_gap`` is ``log(A_limit + (c+1)/c)`` and ``A_gap`` is
    ``log(A + (c+1)/c)`` at every node.
    """

    c: float
    r: np.ndarray
    u: np.ndarray
    A: np.ndarray
    B: np.ndarray
    A_limit: float
    uncertainty: float
    reliable: bool
    r_stop: float
    stop_reason: str
    area: float
    tol: float
    log_gap: float | None = None
    A_gap: np.ndarray | None = field(default=None, repr=False)

    @property
    def beta(self) -> float:
        """Cone order at ``r = inf``."""
        return -self.A_limit - 2.0

    def dA(self) -> np.ndarray:
        """``A'(r)`` from the right-hand side of the ODE."""
        return -self.B * self.killing_factor()

    def killing_factor(self) -> np.ndarray:
        """``c A + c + 1`` at every node, computed without cancellation for ``c > 0``."""
        if self.c > 0 and self.A_gap is not None:
            return self.c * np.exp(self.A_gap)
        return self.c * self.A + self.c + 1.0

    def _z_derivatives(self):
        """``(u_z, u_zz, A_z, A_zz)`` at the nodes, ``z = log r``, straight from the ODE."""
        rB = self.r * self.B
        kf = self.killing_factor()
        A_z = -rB * kf
        A_zz = A_z * (2.0 * self.A + 2.0) - rB * self.c * A_z
        return self.A, A_z, A_z, A_zz

    def _quintic(self, values, d1, d2):
        y = np.stack([values, d1, d2], axis=1)
        return BPoly.from_derivatives(np.log(self.r), y)

    def u_of(self, r) -> np.ndarray:
        """Interpolate ``u`` at radii inside ``[r[0], r_stop]``; series below ``r[0]``.

        Quintic Hermite in ``log r`` through ``u`` and its first two
        derivatives, all of which the ODE state supplies exactly.
        """
        r = np.asarray(r, dtype=float)
        lo, hi = self.r[0], self.r[-1]
        if np.any(r > hi * (1 + 1e-12)):
            raise ValueError(f"radius beyond the profile end r_stop={hi:g}")
        z = np.clip(np.log(np.maximum(r, lo)), math.log(lo), math.log(hi))
        u_z, u_zz, _, _ = self._z_derivatives()
        out = np.asarray(self._quintic(self.u, u_z, u_zz)(z), dtype=float)
        small = r < lo
        if np.any(small):
            a2, a4, a6 = series_coefficients(self.c)
            rs2 = r[small] ** 2
            out[small] = rs2 * (a2 + rs2 * (a4 + rs2 * a6))
        return out

    def metric_ratio(self) -> np.ndarray:
        """``B exp(-2u) / r``, identically 1 on an exact solution."""
        return np.exp(np.log(self.B) - 2.0 * self.u - np.log(self.r))

    def K(self) -> np.ndarray:
        """Gauss curvature ``-exp(-2u) A'(r) / r`` at the nodes."""
        return self.killing_factor() * self.metric_ratio()

    def to_rows(self):
        return zip(self.r, self.u, self.A, self.B)


def _closed_form_minus_one(r_max: float, r_start: float) -> SolitonProfile:
    r = np.geomspace(r_start, r_max, 200)
    zeros = np.zeros_like(r)
    return SolitonProfile(
        c=-1.0, r=r, u=zeros, A=zeros.copy(), B=r.copy(), A_limit=0.0,
        uncertainty=0.0, reliable=True, r_stop=float(r_max), stop_reason="r_max_hit",
        area=math.inf, tol=0.0,
    )


def _floor(c: float) -> float | None:
    """``(c+1)/c`` when the log-gap state is used, else ``None``."""
    return (c + 1.0) / c if c >= GAP_C else None


def _rhs(c: float):
    floor = _floor(c)

    def fun(z, y):
        g, lnB, _u = y
        rB = math.exp(z + lnB)
        if floor is not None:
            A = math.exp(g) - floor
            dg = -c * rB
        else:
            A = g
            dg = -rB * (c * A + c + 1.0)
        return np.array([dg, 2.0 * A + 1.0, A])

    return fun


def _tail(c: float, A_s: float, gap_s: float | None, b_s: float, tol: float):
    """Integrate from the stopping point to ``r = inf`` along the reduced system.

    In ``z = log r`` with ``b = r B`` the system is autonomous:
    ``dA/dz = -b (cA + c + 1)``, ``db/dz = 2 b (A + 1)``. Past the point
    where ``A < -1``, ``b`` decreases monotonically to 0, so ``b`` serves
    as the independent variable. Returns ``(dA, d_log_gap, int_B_dr)``.
    """
    if b_s == 0.0:
        return 0.0, 0.0, 0.0
    floor = _floor(c)

    def fun(b, y):
        if floor is not None:
            A = math.exp(y[0]) - floor
            dg = -c / (2.0 * (A + 1.0))
        else:
            A = y[0]
            dg = -(c * A + c + 1.0) / (2.0 * (A + 1.0))
        return np.array([dg, 1.0 / (2.0 * (A + 1.0))])

    g0 = gap_s if floor is not None else A_s
    steps, _ = dopri5(fun, b_s, [g0, 0.0], 0.0, rtol=tol, atol=tol * 1e-3)
    g1, area_part = steps[-1].y
    # the second component runs from b_s down to 0, so the integral of B dr is its value
    if floor is not None:
        return math.exp(g1) - math.exp(g0), g1 - g0, area_part
    return g1 - g0, 0.0, area_part


def integrate_profile(
    c: float,
    r_max: float = R_MAX,
    eps_B: float = EPS_B,
    tol: float = 1e-10,
    r_start: float | None = None,
) -> SolitonProfile:
    """Integrate the soliton ODE for parameter ``c`` from the series launch.

    Stops once ``r B < eps_B`` and ``r |A'| < 1e-12`` or at ``r_max``. The
    limit ``A_limit`` adds the exact remaining tail of ``A`` beyond the stop
    (see :func:`_tail`); ``area = 2 pi int B dr`` gets the same tail.
    """
    if not 1e-13 <= tol <= 1e-6:
        raise ValueError("tol must lie in [1e-13, 1e-6]")
    if c == -1.0:
        return _closed_form_minus_one(r_max, r_start or R_START)
    if not c > -1.0:
        raise ValueError(f"c must exceed -1, got {c}")
    r_start = default_r_start(c) if r_start is None else r_start
    if r_max <= r_start:
        raise ValueError("r_max must exceed r_start")
    u0, _du0, A0, B0 = series_start(c, r_start)
    floor = _floor(c)
    g0 = math.log(A0 + floor) if floor is not None else A0
    z0 = math.log(r_start)
    y0 = [g0, math.log(B0), u0]

    def stop(step):
        rB = math.exp(step.t + step.y[1])
        return rB < eps_B and rB * abs(_killing(c, step.y[0], floor)) < 1e-12

    steps, reason = dopri5(_rhs(c), z0, y0, math.log(r_max), rtol=tol, atol=tol, stop=stop)
    z = np.array([s.t for s in steps])
    Y = np.array([s.y for s in steps])
    r = np.exp(z)
    if floor is not None:
        gap = Y[:, 0]
        A = np.exp(gap) - floor
    else:
        gap = None
        A = Y[:, 0]
    B = np.exp(Y[:, 1])
    u = Y[:, 2]
    # int B dr = int r B dz on the accepted nodes (trapezoid on a smooth integrand
    # is too coarse at this tolerance; use the Hermite form with d(rB)/dz = 2 rB (A+1))
    rB = r * B
    drB = 2.0 * rB * (A + 1.0)
    dz = np.diff(z)
    int_B = float(np.sum(dz * (rB[:-1] + rB[1:]) / 2.0 + dz ** 2 * (drB[:-1] - drB[1:]) / 12.0))
    stop_reason = {"t_end": "r_max_hit", "event": "B_below_eps"}.get(reason, reason)
    A_s = float(A[-1])
    b_s = float(rB[-1])
    log_gap = float(gap[-1]) if gap is not None else None
    reliable = stop_reason != "step_underflow"
    if not reliable:
        A_limit, uncertainty = A_s, math.inf
    elif A_s < -1.0:
        dA, dgap, tail_B = _tail(c, A_s, log_gap, b_s, tol)
        A_limit = A_s + dA if floor is None else math.exp(log_gap + dgap) - floor
        if log_gap is not None:
            log_gap += dgap
        int_B += tail_B
        # power-law bound kappa * int B with B ~ r^(2A+1) past r_stop
        p = 2.0 * A_s + 1.0
        kappa = abs(_killing(c, Y[-1, 0], floor))
        uncertainty = kappa * b_s / (-(p + 1.0))
        reliable = p < -1.05
    else:
        A_limit, uncertainty, reliable = A_s, math.inf, False
    return SolitonProfile(
        c=float(c), r=r, u=u, A=A, B=B, A_limit=float(A_limit),
        uncertainty=float(uncertainty), reliable=reliable, r_stop=float(r[-1]),
        stop_reason=stop_reason, area=TWO_PI * int_B, tol=tol, log_gap=log_gap,
        A_gap=gap,
    )


def _killing(c, g, floor):
    if floor is not None:
        return c * math.exp(g)
    return c * g + c + 1.0


def limit_coefficient(profile: SolitonProfile) -> tuple[float, float]:
    """``(A_c, uncertainty)``; the uncertainty is ``inf`` when the tail is unusable."""
    if profile.stop_reason == "step_underflow":
        raise SolitonError("profile ended in step underflow; A_c is unreliable")
    return profile.A_limit, profile.uncertainty


# -- shooting -----------------------------------------------------------------


@dataclass
class ShootResult:
    c: float
    profile: SolitonProfile
    residual: float
    evaluations: int


def shoot_for_beta(beta: float, tol_beta: float = 1e-8, tol: float = 1e-11,
                   r_max: float = R_MAX) -> ShootResult:
    """Find ``c`` with ``A_c = -(beta + 2)``.

    Brackets start at ``(-0.5, 1)``; the lower end moves halfway toward -1
    and the upper end doubles until the sign of ``A_c + beta + 2`` differs.
    Brent's method then refines ``c``.
    """
    if not beta > -1.0:
        raise ValueError(f"beta must exceed -1, got {beta}")
    target = -(beta + 2.0)
    cache: dict[float, SolitonProfile] = {}

    def F(c):
        if c not in cache:
            cache[c] = integrate_profile(c, r_max=r_max, tol=tol)
        return cache[c].A_limit - target

    lo, hi = -0.5, 1.0
    f_lo, f_hi = F(lo), F(hi)
    while f_lo > 0:
        lo, hi, f_hi = (lo - 1.0) / 2.0, lo, f_lo
        if lo + 1.0 < 1e-6:
            raise BracketError(f"no bracket for beta={beta}: c reached {lo}")
        f_lo = F(lo)
    while f_hi < 0:
        lo, f_lo, hi = hi, f_hi, 2.0 * hi
        if hi > 1e6:
            raise BracketError(f"no bracket for beta={beta}: c reached {hi}")
        f_hi = F(hi)
    if f_lo == 0.0:
        c = lo
    elif f_hi == 0.0:
        c = hi
    else:
        c = brentq(F, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200)
    residual = F(c)
    if abs(residual) > tol_beta:
        raise SolitonError(
            f"shooting stalled at c={c}: |A_c + beta + 2| = {abs(residual):.3e} > {tol_beta:.1e}"
        )
    return ShootResult(c=float(c), profile=cache[c], residual=float(residual),
                       evaluations=len(cache))


# -- diagnostics --------------------------------------------------------------


def soliton_residual(profile: SolitonProfile, c: float | None = None) -> float:
    """Sup of ``|R - 2 - (2c + 2cA)|`` over the nodes.

    ``R = -2 exp(-2u) (u'' + u'/r)`` with ``u'' = (A' r - A) / r^2`` and
    ``A'`` from the ODE, so no differencing enters. Substituting gives
    ``u'' + u'/r = A'/r``; that form avoids cancelling two terms of size
    ``A / r^2`` that ``exp(-2u)`` would then amplify.
    """
    c = profile.c if c is None else c
    R = 2.0 * profile.killing_factor() * profile.metric_ratio()
    return float(np.max(np.abs(R - 2.0 - (2.0 * c + 2.0 * c * profile.A))))


def curvature_min(profile: SolitonProfile) -> float:
    return float(np.min(profile.K()))


def check_profile_invariants(profile: SolitonProfile) -> dict[str, bool]:
    """Structural facts every profile with ``c > -1`` must satisfy."""
    c = profile.c
    A, B = profile.A, profile.B
    out = {
        "A_non_increasing": bool(np.all(np.diff(A) <= MONOTONE_SLACK)),
        "B_non_negative": bool(np.all(B >= 0)),
        "B_consistent": bool(np.max(np.abs(B / (profile.r * np.exp(2 * profile.u)) - 1.0)) < 1e-8),
    }
    if profile.A_gap is not None:
        out["above_floor"] = bool(np.all(np.isfinite(profile.A_gap))
                                  and profile.log_gap is not None and math.isfinite(profile.log_gap))
    elif c > 0:
        out["above_floor"] = bool(np.all(c * A + c + 1.0 > 0))
    return out


# -- football -----------------------------------------------------------------


@dataclass
class FootballMetric:
    """Two-cone-point soliton obtained by rescaling the angle of a tear drop."""

    beta1: float
    beta2: float
    lam: float
    c: float
    base: SolitonProfile
    angular_factor: float

    @property
    def angles(self) -> tuple[float, float]:
        """Cone angles at the ``r = inf`` pole and at ``r = 0``."""
        far = TWO_PI * (-self.base.A_limit - 1.0) * self.angular_factor
        return far, TWO_PI * self.angular_factor

    @property
    def area(self) -> float:
        return self.angular_factor * self.base.area

    def to_json(self) -> dict:
        return {
            "beta1": self.beta1, "beta2": self.beta2, "lambda": self.lam, "c": self.c,
            "angular_factor": self.angular_factor, "angles": list(self.angles),
            "area": self.area,
        }


def construct_football(beta1: float, beta2: float, tol_beta: float = 1e-8,
                       tol: float = 1e-11) -> FootballMetric:
    if not (beta1 > -1.0 and beta2 > -1.0):
        raise ValueError("cone orders must exceed -1")
    lam = (beta1 + 1.0) / (beta2 + 1.0) - 1.0
    shot = shoot_for_beta(lam, tol_beta=tol_beta, tol=tol)
    return FootballMetric(beta1=float(beta1), beta2=float(beta2), lam=lam, c=shot.c,
                          base=shot.profile, angular_factor=beta2 + 1.0)


# -- bridge to the surface module ---------------------------------------------


def export_as_cone_metric(source, grid: GridSpec, k_max: int | None = None):
    """Sample a tear drop or football on a cone chart at its ``r = inf`` pole.

    With ``lam`` the profile's cone order and ``a`` the angular factor the
    chart radius is ``rho = r**-(lam+1)`` (cone order ``beta = a (lam+1) - 1``)
    and the background factor is ``w~ = u + log r - log((lam+1) rho)``, so that
    ``exp(2 w~) (d rho^2 + (beta+1)^2 rho^2 dtheta^2)`` is the soliton metric.
    The exact profile curvature is attached as the base curvature.
    """
    from .surface import ConeMetric, ScalarField

    if isinstance(source, FootballMetric):
        profile, a = source.base, source.angular_factor
        euler = 2.0 + source.beta1 + source.beta2
    else:
        profile, a = source, 1.0
        euler = 2.0 + profile.beta
    lam = profile.beta
    beta = a * (lam + 1.0) - 1.0
    k_max = int(round(-grid.w_min)) if k_max is None else k_max
    chart = ConeChart(beta, k_max)
    w = grid.w
    ln_rho = w * math.log(2.0)
    ln_r = -ln_rho / (lam + 1.0)
    r = np.exp(ln_r)
    if r.max() > profile.r_stop * (1 + 1e-12):
        raise ValueError(
            f"profile ends at r={profile.r_stop:g} but the grid needs r={r.max():g}"
        )
    u = profile.u_of(r)
    wt = u + ln_r - math.log(lam + 1.0) - ln_rho
    K = _profile_K_at(profile, r)
    n_t = grid.n_theta
    background = ScalarField(grid, np.repeat(wt[:, None], n_t, axis=1))
    K0 = ScalarField(grid, np.repeat(K[:, None], n_t, axis=1))
    return ConeMetric(chart, background, ScalarField.zeros(grid), euler=euler, base_curvature=K0)


def _profile_K_at(profile: SolitonProfile, r: np.ndarray) -> np.ndarray:
    # K = (cA + c + 1) exp(-2u) B / r = cA + c + 1 on the exact solution
    if profile.c == -1.0:
        return np.zeros_like(r)
    z = np.log(np.maximum(r, profile.r[0]))
    _, _, A_z, A_zz = profile._z_derivatives()
    if profile.c > 0 and profile.A_gap is not None:
        # gap = log(A + (c+1)/c) has gap_z = A_z / (A + (c+1)/c) = -c r B
        rB = profile.r * profile.B
        g_z = -profile.c * rB
        g_zz = g_z * (2.0 * profile.A + 2.0)
        K = profile.c * np.exp(profile._quintic(profile.A_gap, g_z, g_zz)(z))
    else:
        A = profile._quintic(profile.A, A_z, A_zz)(z)
        K = profile.c * A + profile.c + 1.0
    small = r < profile.r[0]
    if np.any(small):
        a2, a4, a6 = series_coefficients(profile.c)
        rs2 = r[small] ** 2
        A = rs2 * (2 * a2 + rs2 * (4 * a4 + rs2 * 6 * a6))
        K[small] = profile.c * A + profile.c + 1.0
    return K


# -- sweeps -------------------------------------------------------------------


def sweep_values(n: int = 50, c_min: float = -0.99, c_max: float = 100.0) -> np.ndarray:
    """Sweep points evenly spaced in ``log(c + 1)``."""
    return np.geomspace(c_min + 1.0, c_max + 1.0, n) - 1.0


def sweep_row(c: float, tol: float = 1e-10) -> dict:
    p = integrate_profile(float(c), tol=tol)
    return {
        "c": p.c, "A_c": p.A_limit, "uncertainty": p.uncertainty, "beta": p.beta,
        "area": p.area, "minK": curvature_min(p),
    }
