"""Compact JSON configs for the ``heat`` and ``flow`` commands.

A metric is either a full serialized :class:`~coneflow.surface.ConeMetric`
(it has a ``background`` key) or a recipe::

    {"model": "round_sphere" | "football" | "flat_cylinder" | "flat_cone",
     "beta": 1.0, "k_max": 8, "w_max": 2.0, "n_w": 161, "n_theta": 16}

    {"soliton": {"c": 0.0} | {"beta": 1.0} | {"beta1": 1.0, "beta2": 0.0},
     "k_max": 8, "w_max": 8.0, "n_w": 256, "n_theta": 16}

A field is a number, a field CSV string, ``{"bump": {"center", "width",
"height", "angular"}}`` (a Gaussian in ``w`` times ``1 + angular cos theta``)
or ``{"mode": m, "amplitude": A}`` for ``A sin(m theta)``.
"""

from __future__ import annotations

import numpy as np

from .coords import ConeChart, GridSpec
from .flow import FlowProblem
from .heat import HeatProblem
from .surface import (
    ConeMetric,
    ScalarField,
    flat_cone,
    flat_cylinder,
    round_sphere,
    spherical_football,
)

_MODELS = {
    "round_sphere": lambda g, beta: round_sphere(g),
    "football": spherical_football,
    "flat_cylinder": flat_cylinder,
    "flat_cone": flat_cone,
}


def grid_from_config(d: dict) -> GridSpec:
    chart = ConeChart(float(d.get("beta", 0.0)), int(d["k_max"]))
    return GridSpec.for_chart(chart, float(d["w_max"]), int(d["n_w"]), int(d.get("n_theta", 16)))


def metric_from_config(d: dict) -> ConeMetric:
    if "background" in d:
        return ConeMetric.from_json(d)
    grid = grid_from_config(d)
    if "soliton" in d:
        from .soliton import (construct_football, export_as_cone_metric, integrate_profile,
                              shoot_for_beta)

        s = d["soliton"]
        if "c" in s:
            source = integrate_profile(float(s["c"]))
        elif "beta1" in s:
            source = construct_football(float(s["beta1"]), float(s["beta2"]))
        else:
            source = shoot_for_beta(float(s["beta"])).profile
        return export_as_cone_metric(source, grid)
    model = d.get("model")
    if model not in _MODELS:
        raise ValueError(f"unknown metric model {model!r}; choose from {sorted(_MODELS)}")
    return _MODELS[model](grid, float(d.get("beta", 0.0)))


def field_from_config(value, grid: GridSpec) -> ScalarField:
    if isinstance(value, (int, float)):
        return ScalarField.constant(grid, float(value))
    if isinstance(value, str):
        return ScalarField.from_csv(value, grid)
    if "bump" in value:
        b = value["bump"]
        c, wd = float(b["center"]), float(b.get("width", 0.25))
        h, ang = float(b.get("height", 1.0)), float(b.get("angular", 0.0))
        return ScalarField.from_function(
            grid, lambda W, T: h * np.exp(-((W - c) / wd) ** 2) * (1.0 + ang * np.cos(T)))
    if "mode" in value:
        m, A = int(value["mode"]), float(value.get("amplitude", 1.0))
        return ScalarField.from_function(grid, lambda W, T: A * np.sin(m * T) + 0.0 * W)
    raise ValueError(f"cannot build a field from {value!r}")


def heat_problem_from_config(d: dict) -> HeatProblem:
    if "metric" in d and "background" in d["metric"] and isinstance(d.get("a"), dict) \
            and "frames" in d["a"]:
        return HeatProblem.from_json(d)
    metric = metric_from_config(d["metric"])
    g = metric.grid
    return HeatProblem(metric, field_from_config(d.get("a", 1.0), g),
                       field_from_config(d.get("f", 0.0), g),
                       field_from_config(d.get("u0", 0.0), g),
                       float(d["T"]), float(d["dt"]))


def flow_problem_from_config(d: dict) -> FlowProblem:
    if "g0" in d:
        return FlowProblem.from_json(d)
    metric = metric_from_config(d["metric"])
    K0 = d.get("K0")
    K0 = None if K0 is None else field_from_config(K0, metric.grid)
    opt = {k: d[k] for k in ("r_const", "picard_tol", "picard_max", "sup_guard",
                             "volume_drift_bound") if k in d}
    return FlowProblem(metric, float(d["T"]), float(d["dt"]), K0=K0, **opt)
