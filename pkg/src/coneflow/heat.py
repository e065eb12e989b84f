"""Linear parabolic problems ``u_t = a Delta u + f`` on truncated cone surfaces.

The surface ``S_k`` keeps the rows ``w >= -k`` of the metric's grid and puts
a zero-flux (ghost-point) condition on each end circle. Time stepping is
backward Euler. Every step solves

    (Q / (a lam)) u + dt S u = (Q / (a lam)) (u_prev + dt f)

where ``S`` is the symmetric Neumann stiffness, ``Q`` the trapezoid weights
and ``lam = exp(-2u - 2wt) rho^-2``. The system is symmetric positive
definite and is handed to conjugate gradients. Nodes with ``a = 0`` decouple
(``u = u_prev + dt f``) and are eliminated first.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, cg, splu

from .surface import (
    ConeMetric,
    ScalarField,
    ShapeError,
    SpaceTimeField,
    dirichlet_energy,
    neumann_stiffness,
    neumann_stiffness_parts,
    trapezoid_weights,
)

CG_RTOL = 1e-10
CG_MAXITER = 5000


class SolverError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (relative residual {residual:.3e})")
        self.residual = residual


class NonConvergenceWarning(UserWarning):
    pass


def _as_spacetime(value, grid, T) -> SpaceTimeField:
    if isinstance(value, SpaceTimeField):
        return value
    if isinstance(value, ScalarField):
        return SpaceTimeField.constant_in_time(value, T)
    return SpaceTimeField.constant_in_time(ScalarField.constant(grid, float(value)), T)


@dataclass(frozen=True, eq=False)
class HeatProblem:
    """``u_t = a Delta_g u + f`` with ``g`` the metric including its conformal factor.

    ``a`` and ``f`` may be given as numbers, fields (constant in time) or
    space-time fields (linearly interpolated in time).
    """

    metric: ConeMetric
    a: SpaceTimeField
    f: SpaceTimeField
    u0: ScalarField
    T: float
    dt: float

    def __post_init__(self):
        g = self.metric.grid
        object.__setattr__(self, "a", _as_spacetime(self.a, g, self.T))
        object.__setattr__(self, "f", _as_spacetime(self.f, g, self.T))
        u0 = self.u0
        if not isinstance(u0, ScalarField):
            u0 = ScalarField.constant(g, float(u0))
        object.__setattr__(self, "u0", u0)
        if not (self.T > 0 and self.dt > 0):
            raise ValueError("T and dt must be positive")
        for name in ("a", "f"):
            if getattr(self, name).grid != g:
                raise ShapeError(f"{name} lives on a different grid than the metric")
        if u0.grid != g:
            raise ShapeError("u0 lives on a different grid than the metric")
        if np.any(self.a.values() < 0):
            raise ValueError("the coefficient a must be non-negative")

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.T / self.dt)))

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.n_steps + 1)

    def restrict(self, i0: int) -> "HeatProblem":
        def cut(st: SpaceTimeField) -> SpaceTimeField:
            return SpaceTimeField(st.times, tuple(fr.restrict(i0) for fr in st.frames))

        return HeatProblem(self.metric.restrict(i0), cut(self.a), cut(self.f),
                           self.u0.restrict(i0), self.T, self.dt)

    # -- JSON ---------------------------------------------------------------

    def to_json(self) -> dict:
        def st(x: SpaceTimeField):
            return {"times": list(map(float, x.times)), "frames": [fr.to_csv() for fr in x.frames]}

        return {"metric": self.metric.to_json(), "a": st(self.a), "f": st(self.f),
                "u0": self.u0.to_csv(), "T": self.T, "dt": self.dt}

    @classmethod
    def from_json(cls, data: dict | str) -> "HeatProblem":
        if isinstance(data, str):
            data = json.loads(data)
        metric = ConeMetric.from_json(data["metric"])
        grid = metric.grid

        def field_or_number(x):
            return ScalarField.from_csv(x, grid) if isinstance(x, str) else float(x)

        def st(x):
            if isinstance(x, dict):
                return SpaceTimeField(np.asarray(x["times"], float),
                                      tuple(ScalarField.from_csv(c, grid) for c in x["frames"]))
            return field_or_number(x)

        return cls(metric, st(data["a"]), st(data["f"]), field_or_number(data["u0"]),
                   float(data["T"]), float(data["dt"]))


class BackwardEuler:
    """Assembles and solves one backward-Euler step on a fixed metric."""

    def __init__(self, metric: ConeMetric, preconditioner: str = "line"):
        if preconditioner not in ("line", "jacobi"):
            raise ValueError("preconditioner must be 'line' or 'jacobi'")
        self.preconditioner = preconditioner
        self.grid = metric.grid
        S_w, S_t = neumann_stiffness_parts(self.grid, metric.beta)
        self.S_w = S_w
        self.S = (S_w + S_t).tocsr()
        self.Q = trapezoid_weights(self.grid).ravel()
        self.lam = (1.0 / metric.conformal_weight()).ravel()
        self.iterations: list[int] = []

    def step(self, u_prev: np.ndarray, a: np.ndarray, f: np.ndarray, dt: float) -> np.ndarray:
        rhs = (u_prev + dt * f).ravel()
        a = a.ravel()
        free = a > 0
        if not np.any(free):
            self.iterations.append(0)
            return rhs.reshape(self.grid.shape)
        out = rhs.copy()
        D = self.Q[free] / (a[free] * self.lam[free])
        S_ff = self.S[free][:, free]
        A = (sp.diags(D) + dt * S_ff).tocsr()
        b = D * rhs[free]
        if not np.all(free):
            b -= dt * (self.S[free][:, ~free] @ rhs[~free])
        if self.preconditioner == "line":
            # exact solve of the w-direction part, one tridiagonal line per angle
            lu = splu((sp.diags(D) + dt * self.S_w[free][:, free]).tocsc())
            M = LinearOperator(A.shape, matvec=lu.solve, dtype=float)
        else:
            M = sp.diags(1.0 / A.diagonal())
        count = [0]

        def tick(_):
            count[0] += 1

        x, info = cg(A, b, x0=rhs[free], rtol=CG_RTOL, atol=0.0, maxiter=CG_MAXITER,
                     M=M, callback=tick)
        bnorm = np.linalg.norm(b)
        res = np.linalg.norm(A @ x - b) / bnorm if bnorm > 0 else 0.0
        if info != 0:
            raise SolverError(f"conjugate gradients stopped after {count[0]} iterations", res)
        self.iterations.append(count[0])
        out[free] = x
        return out.reshape(self.grid.shape)


def march(problem: HeatProblem, stepper: BackwardEuler) -> SpaceTimeField:
    times = problem.times()
    u = problem.u0.values
    frames = [problem.u0]
    for n in range(1, len(times)):
        t, dt = times[n], times[n] - times[n - 1]
        u = stepper.step(u, problem.a.at(t), problem.f.at(t), dt)
        frames.append(ScalarField(problem.u0.grid, u))
    return SpaceTimeField(times, tuple(frames))


def solve_truncated(problem: HeatProblem, k: int | None = None,
                    preconditioner: str = "line") -> SpaceTimeField:
    """Backward-Euler solution on ``S_k``: rows ``w >= -k`` with zero flux on both ends."""
    g = problem.metric.grid
    if k is None:
        k = problem.metric.chart.k_max
    if k > problem.metric.chart.k_max:
        raise ValueError(f"k={k} exceeds the chart's k_max={problem.metric.chart.k_max}")
    i0 = g.index_of_w(-float(k))
    sub = problem.restrict(i0) if i0 else problem
    return march(sub, BackwardEuler(sub.metric, preconditioner))


@dataclass
class TruncationStudy:
    levels: list[int]
    band: tuple[float, float]
    solutions: list[SpaceTimeField]
    sup_gaps: list[float]
    converged: bool = True
    warnings: list[str] = field(default_factory=list)


def _band_values(sol: SpaceTimeField, band: tuple[float, float]) -> np.ndarray:
    g = sol.grid
    eps = 1e-9 * g.h_w
    i0 = int(np.searchsorted(g.w, band[0] - eps))
    i1 = int(np.searchsorted(g.w, band[1] + eps))
    return sol.values()[:, i0:i1]


def solve_singular(problem: HeatProblem, k_schedule, band: tuple[float, float] | None = None):
    """Solve on ``S_k`` for each ``k`` and compare the results on a common band.

    Returns the deepest solution and the :class:`TruncationStudy`. Gaps are
    sup-norm differences over the band and all frame times.
    """
    levels = [int(k) for k in k_schedule]
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError("k_schedule must be strictly increasing")
    band = (-float(levels[0]), problem.metric.grid.w_max) if band is None else band
    sols = [solve_truncated(problem, k) for k in levels]
    gaps = [float(np.max(np.abs(_band_values(b, band) - _band_values(a, band))))
            for a, b in zip(sols, sols[1:])]
    study = TruncationStudy(levels, band, sols, gaps)
    if len(gaps) >= 2 and gaps[-1] > gaps[-2]:
        msg = f"truncation gaps increase: {gaps[-2]:.3e} -> {gaps[-1]:.3e}"
        study.converged = False
        study.warnings.append(msg)
        warnings.warn(msg, NonConvergenceWarning, stacklevel=2)
    return sols[-1], study


# -- checks -----------------------------------------------------------------------


@dataclass
class CheckReport:
    passed: bool
    margin: float
    detail: dict = field(default_factory=dict)


def check_max_principle(solution: SpaceTimeField, C1: float, C2: float,
                        tol: float = 1e-9) -> CheckReport:
    """Smallest ``C1 + C2 t - max|u(., t)|`` over the frames; passes when it is at least ``-tol``."""
    sups = np.max(np.abs(solution.values()), axis=(1, 2))
    room = C1 + C2 * solution.times - sups
    margin = float(np.min(room))
    return CheckReport(margin >= -tol, margin, {"sup": sups, "room": room})


def energy(metric: ConeMetric, field_: ScalarField) -> float:
    """Dirichlet energy ``int |grad u|^2 dA``, edge-based on the Neumann stencil."""
    return dirichlet_energy(metric, field_)


def check_energy_growth(problem: HeatProblem, solution: SpaceTimeField,
                        tol: float = 1e-8) -> CheckReport:
    """``E(u(t)) <= (e^t - 1) max_s E(f(s))`` at every frame, for ``u(0) = 0``."""
    if np.any(problem.u0.values != 0.0):
        raise ValueError("the energy bound assumes zero initial data")
    metric = problem.metric
    g = solution.grid
    if g != metric.grid:
        i0 = metric.grid.index_of_w(g.w_min)
        metric = metric.restrict(i0)
        f_frames = [fr.restrict(i0) for fr in problem.f.frames]
    else:
        f_frames = list(problem.f.frames)
    e_f = max(energy(metric, fr) for fr in f_frames)
    e_u = np.array([energy(metric, fr) for fr in solution.frames])
    bound = np.expm1(solution.times) * e_f
    slack = bound + tol - e_u
    return CheckReport(bool(np.all(slack >= 0)), float(np.min(slack)),
                       {"energy": e_u, "bound": bound, "energy_f": e_f})


def neumann_flux(metric: ConeMetric, u: ScalarField) -> float:
    """Net flux ``int Delta_N u dA`` through the two end circles.

    With the ghost-point closure the symmetric stencil telescopes, so this
    vanishes up to rounding for every ``u``.
    """
    S = neumann_stiffness(metric.grid, metric.beta)
    terms = -(S @ u.values.ravel()) * (metric.beta + 1.0) * math.log(2.0)
    return math.fsum(terms)


# -- output ----------------------------------------------------------------------


def write_frames(solution: SpaceTimeField, directory, pattern: str = "frame_%06d.csv") -> Path:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    for i, fr in enumerate(solution.frames):
        (out / (pattern % i)).write_text(fr.to_csv())
    lines = ["index,t"] + [f"{i},{t:.17g}" for i, t in enumerate(solution.times)]
    (out / "times.csv").write_text("\n".join(lines) + "\n")
    return out
