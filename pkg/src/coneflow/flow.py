"""Normalized Ricci flow in conformal gauge.

For ``g(t) = exp(2u) g0`` the flow reads

    u_t = exp(-2u) Delta_0 u + r/2 - exp(-2u) K0.

Each window ``[t, t + dt]`` is advanced by freezing ``v`` in the
coefficients, solving the linear problem with one backward-Euler step and
feeding the result back in as the new ``v`` until the update stalls.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .heat import BackwardEuler, HeatProblem, march
from .surface import (
    LN2,
    ConeMetric,
    ScalarField,
    ShapeError,
    SpaceTimeField,
    base_curvature,
    d_theta,
    d_w,
    gauss_curvature,
    integrate,
    volume,
)

LEDGER_COLUMNS = ("t", "volume", "gb_integral", "boundary_flux", "sup_u", "picard_iters")


class FlowError(RuntimeError):
    """A window failed (Picard stall or sup-norm guard); ``trajectory`` holds the run so far."""

    def __init__(self, message: str, residual: float, trajectory=None):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual
        self.trajectory = trajectory


@dataclass(frozen=True, eq=False)
class FlowProblem:
    g0: ConeMetric
    T: float
    dt: float
    K0: ScalarField | None = None
    r_const: float | None = None  # None: average scalar curvature of g0
    picard_tol: float = 1e-10
    picard_max: int = 50
    sup_guard: float = 10.0
    volume_drift_bound: float = 1e-3

    def __post_init__(self):
        if np.any(self.g0.conformal.values != 0.0):
            raise ValueError("g0 must carry a zero conformal factor")
        K0 = base_curvature(self.g0) if self.K0 is None else self.K0
        if K0.grid != self.g0.grid:
            raise ShapeError("K0 lives on a different grid than g0")
        object.__setattr__(self, "K0", K0)
        if not (self.T > 0 and self.dt > 0):
            raise ValueError("T and dt must be positive")
        if self.picard_max < 1 or not self.picard_tol > 0:
            raise ValueError("need picard_max >= 1 and picard_tol > 0")

    @property
    def auto_r(self) -> bool:
        return self.r_const is None

    @property
    def r(self) -> float:
        """``r`` of the flow; by default ``2 int K0 dA0 / Vol(g0)`` on the grid."""
        if self.r_const is not None:
            return float(self.r_const)
        return 2.0 * integrate(self.g0, self.K0) / volume(self.g0)

    @property
    def base(self) -> ConeMetric:
        """``g0`` with ``K0`` attached, so curvature ledgers use the same ``K0``."""
        g = self.g0
        return ConeMetric(g.chart, g.background, g.conformal, g.euler, self.K0)

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.T / self.dt)))

    def to_json(self) -> dict:
        return {
            "g0": self.g0.to_json(), "K0": self.K0.to_csv(), "r_const": self.r_const,
            "T": self.T, "dt": self.dt, "picard_tol": self.picard_tol,
            "picard_max": self.picard_max, "sup_guard": self.sup_guard,
            "volume_drift_bound": self.volume_drift_bound,
        }

    @classmethod
    def from_json(cls, data: dict | str) -> "FlowProblem":
        if isinstance(data, str):
            data = json.loads(data)
        g0 = ConeMetric.from_json(data["g0"])
        K0 = data.get("K0")
        K0 = None if K0 is None else ScalarField.from_csv(K0, g0.grid)
        opt = {k: data[k] for k in ("r_const", "picard_tol", "picard_max", "sup_guard",
                                    "volume_drift_bound") if k in data}
        return cls(g0, float(data["T"]), float(data["dt"]), K0=K0, **opt)


@dataclass
class FlowTrajectory:
    u: SpaceTimeField
    ledger: dict[str, np.ndarray]
    flags: list[str] = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return self.u.times

    def rows(self):
        cols = [self.ledger[c] for c in LEDGER_COLUMNS]
        for vals in zip(*cols):
            yield vals

    def ledger_csv(self) -> str:
        lines = [",".join(LEDGER_COLUMNS)]
        for t, vol, gb, flux, sup, it in self.rows():
            lines.append(f"{t:.17g},{vol:.17g},{gb:.17g},{flux:.17g},{sup:.17g},{int(it)}")
        return "\n".join(lines) + "\n"

    def write(self, directory) -> Path:
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        for i, fr in enumerate(self.u.frames):
            (out / f"u_{i:06d}.csv").write_text(fr.to_csv())
        (out / "ledger.csv").write_text(self.ledger_csv())
        return out


def boundary_flux(metric: ConeMetric, u: ScalarField) -> tuple[float, float]:
    """Flux of ``|grad u|`` through the innermost grid circle.

    Returns ``(line integral of |grad_g u|_g ds, max of |rho u_rho| + |u_theta|)``.
    Both are conformally invariant, so only ``beta`` and the grid enter.
    """
    if u.grid != metric.grid:
        raise ShapeError("field and metric live on different grids")
    g = metric.grid
    b1 = metric.beta + 1.0
    u_w = d_w(u.values, g.h_w)[0]
    u_t = d_theta(u.values, g.h_theta)[0]
    density = np.sqrt((u_w / LN2) ** 2 + (u_t / b1) ** 2) * b1
    line = math.fsum(density * g.h_theta)
    circle_max = float(np.max(np.abs(u_w) / LN2 + np.abs(u_t)))
    return line, circle_max


def _window_problem(problem: FlowProblem, v_end: np.ndarray, u_start: np.ndarray,
                    r: float) -> HeatProblem:
    g = problem.g0.grid
    a = np.exp(-2.0 * v_end)
    f = 0.5 * r - a * problem.K0.values
    return HeatProblem(problem.g0, ScalarField(g, a), ScalarField(g, f),
                       ScalarField(g, u_start), problem.dt, problem.dt)


def picard_map(problem: FlowProblem, v: SpaceTimeField, u_start: ScalarField | None = None,
               stepper: BackwardEuler | None = None, r: float | None = None) -> SpaceTimeField:
    """One application of the frozen-coefficient map on a window of length ``dt``.

    Solves ``u_t = exp(-2v) Delta_0 u + r/2 - exp(-2v) K0`` from ``u_start``
    (default ``v`` at the window start) with one backward-Euler step, the
    coefficients taken from ``v`` at the window end.
    """
    r = problem.r if r is None else r
    u0 = v.frames[0] if u_start is None else u_start
    stepper = BackwardEuler(problem.g0) if stepper is None else stepper
    hp = _window_problem(problem, v.at(problem.dt), u0.values, r)
    return march(hp, stepper)


def run_flow(problem: FlowProblem, stepper: BackwardEuler | None = None) -> FlowTrajectory:
    """Advance window by window; ledger volume, Gauss-Bonnet integral, flux and sup."""
    g = problem.g0.grid
    base = problem.base
    stepper = BackwardEuler(problem.g0) if stepper is None else stepper
    r = problem.r
    dt = problem.T / problem.n_steps
    times = np.linspace(0.0, problem.T, problem.n_steps + 1)
    if not math.isclose(dt, problem.dt, rel_tol=1e-9):
        problem = FlowProblem(problem.g0, problem.T, dt, K0=problem.K0, r_const=problem.r_const,
                              picard_tol=problem.picard_tol, picard_max=problem.picard_max,
                              sup_guard=problem.sup_guard,
                              volume_drift_bound=problem.volume_drift_bound)

    ledger = {c: [] for c in LEDGER_COLUMNS}
    frames: list[ScalarField] = []
    flags: list[str] = []

    def record(t, u: ScalarField, iters: int):
        m = base.with_conformal(u)
        K = gauss_curvature(m)
        ledger["t"].append(t)
        ledger["volume"].append(volume(m))
        ledger["gb_integral"].append(integrate(m, K))
        ledger["boundary_flux"].append(boundary_flux(m, u)[0])
        ledger["sup_u"].append(u.sup())
        ledger["picard_iters"].append(iters)
        frames.append(u)

    def partial():
        n = len(frames)
        return FlowTrajectory(SpaceTimeField(times[:n], tuple(frames)),
                              {c: np.asarray(v) for c, v in ledger.items()}, flags)

    u = ScalarField.zeros(g)
    record(0.0, u, 0)
    V0 = ledger["volume"][0]
    for n in range(1, len(times)):
        v = u.values
        residual = math.inf
        for it in range(1, problem.picard_max + 1):
            hp = _window_problem(problem, v, u.values, r)
            new = march(hp, stepper).final().values
            residual = float(np.max(np.abs(new - v)))
            v = new
            if residual < problem.picard_tol:
                break
        else:
            raise FlowError(f"Picard iteration stalled in window {n} (t={times[n]:g})",
                            residual, partial())
        u = ScalarField(g, v)
        if u.sup() > problem.sup_guard:
            raise FlowError(f"sup|u| exceeded the guard {problem.sup_guard:g} at t={times[n]:g}",
                            u.sup(), partial())
        record(float(times[n]), u, it)
        drift = abs(ledger["volume"][-1] - V0) / V0
        if drift > problem.volume_drift_bound and not any(f.startswith("volume") for f in flags):
            flags.append(f"volume drift {drift:.3e} exceeds {problem.volume_drift_bound:g} "
                         f"at t={times[n]:g}")
    return partial()


def contraction_ratio(problem: FlowProblem, u_start: ScalarField, v1: ScalarField,
                      v2: ScalarField, stepper: BackwardEuler | None = None) -> float:
    """``|Psi(v1) - Psi(v2)|_inf / |v1 - v2|_inf`` on one window."""
    stepper = BackwardEuler(problem.g0) if stepper is None else stepper
    r = problem.r

    def psi(v: ScalarField) -> np.ndarray:
        st = SpaceTimeField(np.array([0.0, problem.dt]), (u_start, v))
        return picard_map(problem, st, u_start, stepper, r).final().values

    den = float(np.max(np.abs(v1.values - v2.values)))
    return float(np.max(np.abs(psi(v1) - psi(v2)))) / den


def volume_limit(problem: FlowProblem) -> float:
    """``V* = (2/r) int K0 dA0``, the fixed point of the volume equation ``V' = r V - 2 int K0``."""
    return 2.0 * integrate(problem.g0, problem.K0) / problem.r
