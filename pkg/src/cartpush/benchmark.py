"""Canned scenario suites recreating the tracking, identification,
compliance and smoothness experiments at desk scale."""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dynamics import CartParams
from .estimation import NoiseConfig
from .metrics import acceleration_norms, compute_metrics, lateral_velocity, time_to_within
from .pusher import BallbotParams
from .simulation import CommandProfile, ControllerConfig, Disturbance, Scenario, run_scenario
from .traces import write_trace

SUITES = ("tracking", "identification", "compliance", "smoothness")
LOADS = (11.8, 79.4)

# pass thresholds
T90_MAX = 3.0
STEADY_REL_MAX = 0.05
NONHOLONOMIC_MAX = 1e-9
MASS_TOL = 0.10
MASS_CONVERGE_BY = 30.0


@dataclass(frozen=True)
class Case:
    suite: str
    scenario: Scenario
    cart: CartParams


def _label(m):
    return f"{m:g}kg".replace(".", "p")


def suite_cases(suite, seed=0):
    if suite not in SUITES:
        raise KeyError(suite)
    cases = []
    if suite == "tracking":
        for i, m in enumerate(LOADS):
            cases.append(Case(suite, Scenario(
                CommandProfile(((0.0, 0.0, 0.0), (1.0, 0.2, 0.0))),
                duration=21.0, seed=seed + i, name=f"linear_{_label(m)}"), CartParams.for_load(m)))
            cases.append(Case(suite, Scenario(
                CommandProfile(((0.0, 0.0, 0.0), (1.0, 0.2, 0.0), (21.0, 0.2, 0.15))),
                duration=41.0, seed=seed + 10 + i, name=f"angular_{_label(m)}"), CartParams.for_load(m)))
    elif suite == "identification":
        for i, m in enumerate(LOADS):
            cases.append(Case(suite, Scenario(
                CommandProfile(((0.0, 0.15, 0.0),), v_sine=(0.1, 0.2), w_sine=(0.2, 0.13)),
                duration=45.0, seed=seed + 20 + i, name=f"excite_{_label(m)}"), CartParams.for_load(m)))
    elif suite == "compliance":
        cases.append(Case(suite, Scenario(
            CommandProfile(((0.0, 0.0, 0.0), (1.0, 0.1, 0.0))),
            disturbances=(Disturbance(8.0, 1.0, 0.0, 25.0, 0.0, "base"),),
            duration=14.0, coupling="spring", seed=seed + 30, name="lateral_push_base"),
            CartParams.for_load(34.6)))
    else:
        cases.append(Case(suite, Scenario(
            CommandProfile(
                ((0.0, 0.0, 0.0), (1.0, 0.3, 0.0), (8.0, 0.3, 0.2), (14.0, 0.3, -0.2),
                 (20.0, 0.3, 0.0), (26.0, 0.0, 0.0)),
                accel_limit=(0.2, 0.3)),
            duration=32.0, seed=seed + 40, name="slalom"), CartParams.for_load(34.6)))
    return cases


def _row(case, criterion, value, threshold, passed):
    return {
        "suite": case.suite,
        "scenario": case.scenario.name,
        "criterion": criterion,
        "value": float(value) if value is not None else None,
        "threshold": threshold,
        "passed": bool(passed),
    }


def evaluate(case, trace, metrics):
    """Pass/fail rows for one finished case."""
    rows = []
    lat = float(lateral_velocity(trace).max())
    rows.append(_row(case, "nonholonomic_lateral_velocity", lat, f"< {NONHOLONOMIC_MAX:g} m/s", lat < NONHOLONOMIC_MAX))
    if case.suite == "tracking":
        for hold in metrics["holds"]:
            for axis in ("v", "omega"):
                step = hold.get(f"{axis}_step")
                if step is None:
                    continue
                t90 = step["t90"]
                rows.append(_row(case, f"{axis}_t90@{hold['t_start']:g}s", t90, f"<= {T90_MAX:g} s",
                                 math.isfinite(t90) and t90 <= T90_MAX))
                ss = hold[f"{axis}_steady_error_rel"]
                rows.append(_row(case, f"{axis}_steady_error@{hold['t_start']:g}s", ss,
                                 f"< {STEADY_REL_MAX:g}", ss < STEADY_REL_MAX))
    elif case.suite == "identification":
        c = trace.columns
        t_in = time_to_within(c["t"], c["m_hat"], case.cart.m_w, MASS_TOL)
        rows.append(_row(case, "mass_within_10pct_from", t_in, f"<= {MASS_CONVERGE_BY:g} s",
                         math.isfinite(t_in) and t_in <= MASS_CONVERGE_BY))
        err = abs(c["m_hat"][-1] - case.cart.m_w) / case.cart.m_w
        rows.append(_row(case, "final_mass_error_rel", err, f"< {MASS_TOL:g}", err < MASS_TOL))
    elif case.suite == "compliance":
        for d in metrics["disturbances"]:
            cart, base = d["cart"]["lateral_velocity"], d["base"]["lateral_velocity"]
            rows.append(_row(case, "peak_lateral_cart_vs_base", cart / base if base else math.inf,
                             "< 1", cart < base))
        bound, peak = force_bound(trace, case)
        rows.append(_row(case, "handle_force_over_bound", peak - bound, "<= 0", peak <= bound + 1e-9))
    return rows


def force_bound(trace, case, controller=None):
    """``(bound, peak)``: the impedance-law force bound and the largest per-arm force."""
    arm = (controller or ControllerConfig()).arm
    c = trace.columns
    e = np.maximum(np.hypot(c["eL_x"], c["eL_y"]), np.hypot(c["eR_x"], c["eR_y"]))
    edot = np.maximum(c["edotL_norm"], c["edotR_norm"])
    bound = max(arm.K_d) * e.max() + max(arm.B_d) * edot.max()
    peak = max(np.hypot(c["fL_x"], c["fL_y"]).max(), np.hypot(c["fR_x"], c["fR_y"]).max())
    return float(bound), float(peak)


def run_case(case, out_dir=None):
    trace = run_scenario(case.scenario, case.cart, BallbotParams(), NoiseConfig(), ControllerConfig())
    metrics = compute_metrics(trace)
    if case.suite == "smoothness":
        # command profile's own acceleration as a reference for the ratio
        ref = acceleration_norms(trace["t"], trace["v_cmd"], trace["w_cmd"])
        metrics["command_acceleration_norm"] = ref
        metrics["acceleration_ratio"] = {
            k: metrics["acceleration_norm"][k] / ref[k] if ref[k] else math.nan for k in ref
        }
    rows = evaluate(case, trace, metrics)
    if out_dir is not None:
        d = os.path.join(out_dir, case.scenario.name)
        os.makedirs(d, exist_ok=True)
        write_trace(trace, os.path.join(d, "trace.csv"))
        with open(os.path.join(d, "metrics.json"), "w", encoding="utf-8") as fh:
            json.dump(metrics, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")
    return rows, metrics


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(type(o).__name__)


def _run_case_star(args):
    return run_case(*args)


def run_suite(suite, out_dir=None, workers=1, seed=0):
    """Run every case of ``suite``; returns ``(rows, metrics_by_scenario)``."""
    cases = suite_cases(suite, seed)
    jobs = [(c, out_dir) for c in cases]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_case_star, jobs))
    else:
        results = [run_case(*j) for j in jobs]
    rows = [r for res, _ in results for r in res]
    metrics = {c.scenario.name: m for c, (_, m) in zip(cases, results)}
    return rows, metrics


def format_table(rows):
    head = ("scenario", "criterion", "value", "threshold", "result")
    body = [
        (r["scenario"], r["criterion"], "nan" if r["value"] is None else f"{r['value']:.6g}",
         r["threshold"], "PASS" if r["passed"] else "FAIL")
        for r in rows
    ]
    widths = [max(len(str(x)) for x in col) for col in zip(head, *body)]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    lines = [fmt.format(*head), fmt.format(*("-" * w for w in widths))]
    lines += [fmt.format(*b) for b in body]
    return "\n".join(lines)
