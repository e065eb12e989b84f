"""Command-line front end: ``coneflow <command> [flags]``.

Exit status is 0 on success, 1 when a computation fails and 2 on usage
errors. Every command prints one summary line to standard output.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

COMMANDS = ("soliton", "soliton-solve", "sweep", "football", "flow", "heat", "holder-norm")


@dataclass
class RunConfig:
    command: str
    params: dict = field(default_factory=dict)
    out: str | None = None


def _g(x: float) -> str:
    return f"{x:.17g}"


def _positive(name):
    def conv(text):
        v = float(text)
        if not v > 0:
            raise argparse.ArgumentTypeError(f"{name} must be positive")
        return v
    return conv


def _levels(text):
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError("levels must be comma-separated integers")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="coneflow", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, metavar="command")

    s = sub.add_parser("soliton", help="integrate one soliton profile for a given c")
    s.add_argument("--c", type=float, required=True)
    s.add_argument("--rmax", type=_positive("rmax"), default=1e6)
    s.add_argument("--eps-b", type=_positive("eps-b"), default=1e-12)
    s.add_argument("--tol", type=float, default=1e-10)
    s.add_argument("--out")

    s = sub.add_parser("soliton-solve", help="shoot for the c that gives cone order beta")
    s.add_argument("--beta", type=float, required=True)
    s.add_argument("--tol-beta", type=_positive("tol-beta"), default=1e-8)
    s.add_argument("--tol", type=float, default=1e-11)
    s.add_argument("--out")

    s = sub.add_parser("sweep", help="A_c and diagnostics over a range of c")
    s.add_argument("--n", type=int, default=50)
    s.add_argument("--c-min", type=float, default=-0.99)
    s.add_argument("--c-max", type=float, default=100.0)
    s.add_argument("--tol", type=float, default=1e-10)
    s.add_argument("--out")

    s = sub.add_parser("football", help="two cone points by angular rescaling")
    s.add_argument("--beta1", type=float, required=True)
    s.add_argument("--beta2", type=float, required=True)
    s.add_argument("--tol-beta", type=_positive("tol-beta"), default=1e-8)
    s.add_argument("--out")

    s = sub.add_parser("flow", help="normalized Ricci flow from a JSON config")
    s.add_argument("--config", required=True)
    s.add_argument("--out")

    s = sub.add_parser("heat", help="linear heat problem from a JSON config")
    s.add_argument("--config", required=True)
    s.add_argument("--levels", type=_levels, help="comma-separated truncation levels")
    s.add_argument("--out")

    s = sub.add_parser("holder-norm", help="weighted Hölder norm of a field CSV")
    s.add_argument("--field", required=True)
    s.add_argument("--l", type=int, choices=(0, 1, 2), default=0)
    s.add_argument("--alpha", type=float, default=0.5)
    s.add_argument("--stride", type=int, default=1)
    s.add_argument("--global", dest="global_", action="store_true",
                   help="also measure the smooth band w in [-2, w_max]")
    s.add_argument("--out")
    return p


def parse_args(argv) -> RunConfig:
    """Parse and validate; usage errors exit with status 2."""
    parser = build_parser()
    ns = parser.parse_args(argv)
    params = {k: v for k, v in vars(ns).items() if k not in ("command", "out")}
    cmd = ns.command
    if cmd == "soliton" and not ns.c > -1.0:
        parser.error("c must exceed -1")
    if cmd == "soliton-solve" and not ns.beta > -1.0:
        parser.error("beta must exceed -1")
    if cmd == "football" and not (ns.beta1 > -1.0 and ns.beta2 > -1.0):
        parser.error("beta1 and beta2 must exceed -1")
    if cmd == "sweep":
        if ns.n < 2:
            parser.error("n must be at least 2")
        if not (-1.0 < ns.c_min < ns.c_max):
            parser.error("need -1 < c-min < c-max")
    if "tol" in params and not 1e-13 <= ns.tol <= 1e-6:
        parser.error("tol must lie in [1e-13, 1e-6]")
    if cmd == "holder-norm":
        if not 0.0 < ns.alpha < 1.0:
            parser.error("alpha must lie in (0, 1)")
        if ns.stride < 1:
            parser.error("stride must be at least 1")
    if cmd == "heat" and ns.levels is not None:
        if len(ns.levels) < 2 or any(b <= a for a, b in zip(ns.levels, ns.levels[1:])):
            parser.error("levels must be at least two increasing integers")
    return RunConfig(cmd, params, ns.out)


# -- commands -------------------------------------------------------------------


def _summary(A_c: float, unc: float, area: float) -> str:
    beta = round(-A_c - 2.0, 6) + 0.0  # no "-0.000000"
    return f"A_c={A_c:.6f} ±{unc:.1e} beta={beta:.6f} area={area:.5f}"


def _profile_csv(profile) -> str:
    lines = ["r,u,A,B"] + [f"{_g(r)},{_g(u)},{_g(a)},{_g(b)}" for r, u, a, b in profile.to_rows()]
    return "\n".join(lines) + "\n"


def _write(path, text: str):
    if path:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)


def _cmd_soliton(cfg: RunConfig) -> str:
    from .soliton import integrate_profile

    p = cfg.params
    prof = integrate_profile(p["c"], r_max=p["rmax"], eps_B=p["eps_b"], tol=p["tol"])
    _write(cfg.out, _profile_csv(prof))
    line = _summary(prof.A_limit, prof.uncertainty, prof.area)
    return line if prof.reliable else line + " (tail unreliable)"


def _cmd_soliton_solve(cfg: RunConfig) -> str:
    from .soliton import shoot_for_beta

    p = cfg.params
    shot = shoot_for_beta(p["beta"], tol_beta=p["tol_beta"], tol=p["tol"])
    _write(cfg.out, _profile_csv(shot.profile))
    return f"c={_g(shot.c)} " + _summary(shot.profile.A_limit, shot.profile.uncertainty,
                                         shot.profile.area)


def threads() -> int:
    """Worker cap from ``CONEFLOW_THREADS``, defaulting to the core count."""
    env = os.environ.get("CONEFLOW_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"CONEFLOW_THREADS must be an integer, got {env!r}")
        return max(1, n)
    return os.cpu_count() or 1


def _cmd_sweep(cfg: RunConfig) -> str:
    from .soliton import sweep_row, sweep_values

    p = cfg.params
    cs = [float(c) for c in sweep_values(p["n"], p["c_min"], p["c_max"])]
    tols = [p["tol"]] * len(cs)
    n_workers = min(threads(), len(cs))
    if n_workers > 1:
        with ProcessPoolExecutor(n_workers) as ex:
            rows = list(ex.map(sweep_row, cs, tols))
    else:
        rows = [sweep_row(c, t) for c, t in zip(cs, tols)]
    cols = ("c", "A_c", "uncertainty", "beta", "area", "minK")
    lines = [",".join(cols)] + [",".join(_g(r[k]) for k in cols) for r in rows]
    _write(cfg.out, "\n".join(lines) + "\n")
    A = np.array([r["A_c"] for r in rows])
    return (f"n={len(rows)} A_c in [{A.min():.6f}, {A.max():.6f}] "
            f"minK={min(r['minK'] for r in rows):.3e}")


def _cmd_football(cfg: RunConfig) -> str:
    from .soliton import construct_football

    p = cfg.params
    fb = construct_football(p["beta1"], p["beta2"], tol_beta=p["tol_beta"])
    _write(cfg.out, json.dumps(fb.to_json(), indent=2) + "\n")
    a1, a2 = fb.angles
    return (f"lambda={fb.lam:.6f} c={fb.c:.9f} angles={a1:.6f},{a2:.6f} area={fb.area:.5f}")


def _load_json(path) -> dict:
    return json.loads(Path(path).read_text())


def _cmd_flow(cfg: RunConfig) -> str:
    from .configs import flow_problem_from_config
    from .flow import run_flow

    problem = flow_problem_from_config(_load_json(cfg.params["config"]))
    traj = run_flow(problem)
    if cfg.out:
        traj.write(cfg.out)
    L = traj.ledger
    vol = abs(L["volume"][-1] - L["volume"][0]) / L["volume"][0]
    gb = float(np.max(np.abs(L["gb_integral"] - L["gb_integral"][0])))
    line = (f"steps={len(L['t']) - 1} volume_drift={vol:.3e} gb_change={gb:.3e} "
            f"sup_u={float(np.max(L['sup_u'])):.3e}")
    for flag in traj.flags:
        line += f" [{flag}]"
    return line


def _cmd_heat(cfg: RunConfig) -> str:
    from .configs import heat_problem_from_config
    from .heat import check_max_principle, solve_singular, solve_truncated, write_frames

    data = _load_json(cfg.params["config"])
    problem = heat_problem_from_config(data)
    levels = cfg.params.get("levels") or data.get("levels")
    if levels:
        sol, study = solve_singular(problem, levels)
        extra = " sup_gaps=" + ",".join(f"{x:.3e}" for x in study.sup_gaps)
    else:
        sol = solve_truncated(problem, data.get("k"))
        extra = ""
    if cfg.out:
        write_frames(sol, cfg.out)
    C1 = float(np.max(np.abs(problem.u0.values)))
    C2 = float(np.max(np.abs(problem.f.values())))
    mp = check_max_principle(sol, C1, C2)
    return (f"steps={len(sol.times) - 1} sup_u={float(np.max(np.abs(sol.values()))):.6e} "
            f"max_principle_margin={mp.margin:.3e}" + extra)


def _cmd_holder(cfg: RunConfig) -> str:
    from .holder import HolderSpec, global_holder_norm, weighted_holder_norm
    from .surface import ScalarField

    p = cfg.params
    fld = ScalarField.from_csv(Path(p["field"]).read_text())
    spec = HolderSpec(p["l"], p["alpha"])
    fn = global_holder_norm if p["global_"] else weighted_holder_norm
    rep = fn(fld, spec, stride=p["stride"])
    _write(cfg.out, json.dumps(rep.to_json(), indent=2) + "\n")
    return f"total={rep.total:.6e} saturating_k={rep.saturating_k} slack={rep.slack:.1e}"


_DISPATCH = {
    "soliton": _cmd_soliton,
    "soliton-solve": _cmd_soliton_solve,
    "sweep": _cmd_sweep,
    "football": _cmd_football,
    "flow": _cmd_flow,
    "heat": _cmd_heat,
    "holder-norm": _cmd_holder,
}


def run(cfg: RunConfig) -> int:
    try:
        line = _DISPATCH[cfg.command](cfg)
    except Exception as exc:  # mapped to exit status 1
        print(f"coneflow {cfg.command}: error: {exc}", file=sys.stderr)
        return 1
    print(line)
    return 0


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
