"""Weighted Hölder norms on cone charts.

Each dyadic annulus ``Omega_k`` is rescaled to ``s = 2**k rho`` in ``(1/2, 2)``
and the ordinary ``C^{l,alpha}`` norm of ``F_k(s, theta)`` is estimated from
the samples:

    sum_{|g| <= l} sup |D^g F_k|  +  sum_{|g| = l} [D^g F_k]_alpha

Derivatives come from centered differences on the full grid; Hölder quotients
are taken over every pair of nodes in the patch (optionally strided). The
estimate is a sampled lower bound; ``slack`` quotes how much a finer grid may
raise it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .surface import LN2, ScalarField, SpaceTimeField, _d2_theta, _d2_w, d_theta, d_w

MIN_ROWS = 8


class ResolutionError(ValueError):
    def __init__(self, k: int, rows: int):
        super().__init__(f"annulus k={k} has {rows} radial samples, need at least {MIN_ROWS}")
        self.k = k
        self.rows = rows


@dataclass(frozen=True)
class HolderSpec:
    l: int
    alpha: float

    def __post_init__(self):
        if self.l not in (0, 1, 2):
            raise ValueError("l must be 0, 1 or 2")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie strictly inside (0, 1)")


@dataclass
class NormReport:
    parts: list[tuple[int, float]]
    total: float
    saturating_k: int | None
    slack: float = 0.0
    band: float | None = None
    unbounded: bool = False
    details: dict = field(default_factory=dict, repr=False)

    def values(self) -> np.ndarray:
        return np.array([v for _, v in self.parts])

    def to_json(self) -> dict:
        out = {
            "total": self.total,
            "parts": [{"k": k, "value": v} for k, v in self.parts],
            "saturating_k": self.saturating_k,
            "slack": self.slack,
            "unbounded": self.unbounded,
        }
        if self.band is not None:
            out["band"] = self.band
        return out


def _growth_flag(values: list[float]) -> bool:
    """True when the deepest parts keep growing without geometric decay of increments."""
    if len(values) < 3:
        return False
    d1 = values[-2] - values[-3]
    d2 = values[-1] - values[-2]
    return d1 > 0 and d2 > 0 and d2 >= 0.5 * d1


# -- derivatives -----------------------------------------------------------


def _derivatives(v: np.ndarray, h_w: float, h_t: float, l: int, s: np.ndarray | None):
    """Derivative fields grouped by order.

    With ``s`` given, ``w``-derivatives are converted to ``s``-derivatives
    through ``ds/dw = s ln 2``; otherwise the cylinder variables are used.
    """
    out = [[v]]
    if l == 0:
        return out
    fw = d_w(v, h_w)
    ft = d_theta(v, h_t)
    jac = None if s is None else (s * LN2)[:, None]
    fs = fw if jac is None else fw / jac
    out.append([fs, ft])
    if l == 1:
        return out
    fww = _d2_w(v, h_w)
    fwt = d_theta(fw, h_t)
    ftt = _d2_theta(v, h_t)
    if jac is None:
        out.append([fww, fwt, ftt])
    else:
        fss = (fww - LN2 * fw) / jac ** 2
        out.append([fss, fwt / jac, ftt])
    return out


# -- Hölder quotient over all pairs --------------------------------------------


def holder_seminorm(F: np.ndarray, x: np.ndarray, h_t: float, alpha: float, stride: int = 1) -> float:
    """``sup |F(X) - F(Y)| / |X - Y|^alpha`` over node pairs of a ``(x, theta)`` patch.

    ``x`` is the (possibly non-uniform) radial coordinate of the rows; theta
    is periodic with spacing ``h_t`` and wrap-around distance.
    """
    n_x, n_t = F.shape
    dj = np.arange(n_t)
    cols = (np.arange(n_t)[None, :] + dj[:, None]) % n_t  # (shift, j)
    dth = np.minimum(dj, n_t - dj) * h_t
    best = 0.0
    for di in range(0, n_x, stride):
        a = F[: n_x - di]
        b = F[di:][:, cols]  # (rows, shift, j)
        dx = (x[di:] - x[: n_x - di])[:, None]
        dist = np.sqrt(dx ** 2 + dth[None, :] ** 2)
        shifts = slice(None, None, stride) if di else slice(1, n_t // 2 + 1, stride)
        diff = np.abs(b[:, shifts, :] - a[:, None, :])
        d = dist[:, shifts][:, :, None]
        if diff.size == 0:
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.where(d > 0, diff / d ** alpha, 0.0)
        best = max(best, float(q.max()))
    return best


def _patch_norm(groups, x, h_t, spec: HolderSpec, stride: int):
    sup = sum(float(np.max(np.abs(g))) for grp in groups for g in grp)
    top = groups[spec.l]
    semis = [holder_seminorm(g, x, h_t, spec.alpha, stride) for g in top]
    h = max(float(np.max(np.diff(x))), h_t) * stride
    slack = sum(semis) * (h / 2.0) ** spec.alpha
    return sup + sum(semis), slack


def _tube_rows(field: ScalarField, k: int) -> slice:
    """Rows with ``-k-1 <= w <= -k+1``; raises if the tube leaves the grid."""
    g = field.grid
    lo, hi = -k - 1.0, -k + 1.0
    eps = 1e-9 * g.h_w
    if lo < g.w_min - eps or hi > g.w_max + eps:
        raise ValueError(f"tube k={k} is not covered by the grid")
    w = g.w
    i0 = int(np.searchsorted(w, lo - eps))
    i1 = int(np.searchsorted(w, hi + eps))
    if i1 - i0 < MIN_ROWS:
        raise ResolutionError(k, i1 - i0)
    return slice(i0, i1)


def covered_annuli(field: ScalarField) -> list[int]:
    g = field.grid
    eps = 1e-9 * g.h_w
    return [k for k in range(1, int(math.floor(-g.w_min + eps)))
            if -k + 1.0 <= g.w_max + eps]


def _annulus_value(field: ScalarField, k: int, spec: HolderSpec, stride: int, rescale: bool):
    g = field.grid
    rows = _tube_rows(field, k)
    s_full = np.exp2(g.w + k) if rescale else None
    groups = _derivatives(field.values, g.h_w, g.h_theta, spec.l, s_full)
    groups = [[a[rows] for a in grp] for grp in groups]
    x = np.exp2(g.w[rows] + k) if rescale else g.w[rows]
    return _patch_norm(groups, x, g.h_theta, spec, stride)


def cylinder_norm(field: ScalarField, spec: HolderSpec, k: int | None = None,
                  w_range: tuple[float, float] | None = None, stride: int = 1) -> float:
    """``C^{l,alpha}`` estimate in the ``(w, theta)`` variables.

    Either on the tube ``(-k-1, -k+1)`` or on an explicit ``w_range``.
    """
    g = field.grid
    if k is not None:
        return _annulus_value(field, k, spec, stride, rescale=False)[0]
    lo, hi = w_range if w_range is not None else (g.w_min, g.w_max)
    eps = 1e-9 * g.h_w
    rows = slice(int(np.searchsorted(g.w, lo - eps)), int(np.searchsorted(g.w, hi + eps)))
    groups = _derivatives(field.values, g.h_w, g.h_theta, spec.l, None)
    groups = [[a[rows] for a in grp] for grp in groups]
    if groups[0][0].shape[0] < 2:
        raise ValueError(f"range {lo}..{hi} holds fewer than two grid rows")
    return _patch_norm(groups, g.w[rows], g.h_theta, spec, stride)[0]


def weighted_holder_norm(field: ScalarField, spec: HolderSpec, stride: int = 1) -> NormReport:
    """Per-annulus norms of the rescaled pieces ``F_k(s, theta)``; total is their sup."""
    parts, slack = [], 0.0
    for k in covered_annuli(field):
        v, sl = _annulus_value(field, k, spec, stride, rescale=True)
        parts.append((k, v))
        slack = max(slack, sl)
    if not parts:
        raise ValueError("grid covers no complete annulus")
    vals = [v for _, v in parts]
    i = int(np.argmax(vals))
    return NormReport(parts, float(vals[i]), parts[i][0], slack, unbounded=_growth_flag(vals))


def global_holder_norm(field: ScalarField, spec: HolderSpec, stride: int = 1,
                       band: tuple[float, float] | None = None) -> NormReport:
    """Chart norm combined with the smooth band ``w in [-2, w_max]``: the max of the two."""
    rep = weighted_holder_norm(field, spec, stride)
    band = (-2.0, field.grid.w_max) if band is None else band
    b = cylinder_norm(field, spec, w_range=band, stride=stride)
    rep.band = b
    rep.total = max(rep.total, b)
    return rep


# -- parabolic version ----------------------------------------------------------


def _parabolic_patch(V: np.ndarray, x: np.ndarray, h_t: float, tt: np.ndarray,
                     alpha: float, stride: int) -> float:
    """Quotient sup with distance ``max(|X - Y|, sqrt|t - t'|)``; ``V`` is ``(n_t, n_x, n_theta)``."""
    best = 0.0
    n_time = V.shape[0]
    for a in range(n_time):
        for b in range(a, n_time):
            dt = math.sqrt(tt[b] - tt[a])
            if a == b:
                best = max(best, holder_seminorm(V[a], x, h_t, alpha, stride))
                continue
            best = max(best, _cross_quotient(V[a], V[b], x, h_t, alpha, dt, stride))
    return best


def _cross_quotient(Fa, Fb, x, h_t, alpha, dt, stride):
    n_x, n_t = Fa.shape
    dj = np.arange(n_t)
    cols = (np.arange(n_t)[None, :] + dj[:, None]) % n_t
    dth = np.minimum(dj, n_t - dj) * h_t
    best = 0.0
    for di in range(-(n_x - 1), n_x, stride):
        if di >= 0:
            a, b, dx = Fa[: n_x - di], Fb[di:], x[di:] - x[: n_x - di]
        else:
            a, b, dx = Fa[-di:], Fb[: n_x + di], x[: n_x + di] - x[-di:]
        bb = b[:, cols]
        dist = np.maximum(np.sqrt(dx[:, None] ** 2 + dth[None, :] ** 2), dt)
        diff = np.abs(bb - a[:, None, :])
        best = max(best, float(np.max(diff / dist[:, :, None] ** alpha)))
    return best


def parabolic_holder_norm(field: SpaceTimeField, spec: HolderSpec, stride: int = 1) -> NormReport:
    """Space-time ``C^{0,alpha}`` per annulus after ``s = 2^k rho``, ``t~ = 2^{2k} t``."""
    if spec.l != 0:
        raise ValueError("the parabolic estimator supports l = 0 only")
    g = field.grid
    V = field.values()
    parts, slack = [], 0.0
    for k in covered_annuli(field.frames[0]):
        rows = _tube_rows(field.frames[0], k)
        x = np.exp2(g.w[rows] + k)
        tt = field.times * 4.0 ** k
        Vk = V[:, rows]
        semi = _parabolic_patch(Vk, x, g.h_theta, tt, spec.alpha, stride)
        parts.append((k, float(np.max(np.abs(Vk))) + semi))
        h = max(float(np.max(np.diff(x))), g.h_theta)
        if len(tt) > 1:
            h = max(h, math.sqrt(float(np.max(np.diff(tt)))))
        slack = max(slack, semi * (h * stride / 2.0) ** spec.alpha)
    if not parts:
        raise ValueError("grid covers no complete annulus")
    vals = [v for _, v in parts]
    i = int(np.argmax(vals))
    return NormReport(parts, float(vals[i]), parts[i][0], slack, unbounded=_growth_flag(vals))

