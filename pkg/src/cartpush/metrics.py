"""Performance metrics computed from a :class:`~cartpush.simulation.SimTrace`."""

from __future__ import annotations

import math

import numpy as np

from .errors import InsufficientDataError

SETTLE_AFTER_DISTURBANCE = 2.0
STEADY_FRACTION = 0.2


def _crossing_time(t, y, t0, level, rising):
    mask = t >= t0
    hit = (y >= level) if rising else (y <= level)
    idx = np.flatnonzero(mask & hit)
    return float(t[idx[0]]) if idx.size else math.nan


def step_response(t, y, t_step, y0, y1, t_end=None):
    """Rise metrics for a step from ``y0`` to ``y1`` at ``t_step``.

    Returns ``t10``/``t90`` measured from the step instant, ``rise_time``
    (10 to 90 percent) and the peak overshoot fraction within the hold.
    """
    delta = y1 - y0
    rising = delta > 0
    t_end = t[-1] if t_end is None else t_end
    hold = (t >= t_step) & (t <= t_end)
    c10 = _crossing_time(t[hold], y[hold], t_step, y0 + 0.1 * delta, rising)
    c90 = _crossing_time(t[hold], y[hold], t_step, y0 + 0.9 * delta, rising)
    peak = np.max(y[hold]) if rising else np.min(y[hold])
    return {
        "t10": c10 - t_step,
        "t90": c90 - t_step,
        "rise_time": c90 - c10,
        "overshoot": float((peak - y1) / delta) if hold.any() else math.nan,
    }


def acceleration_norms(t, v, omega):
    """Mean absolute forward, centripetal and yaw accelerations."""
    dt = np.diff(t)
    a_x = np.diff(v) / dt
    alpha = np.diff(omega) / dt
    a_y = v * omega
    return {
        "a_x": float(np.mean(np.abs(a_x))),
        "a_y": float(np.mean(np.abs(a_y))),
        "alpha_z": float(np.mean(np.abs(alpha))),
    }


def _holds(scn, t_end):
    steps = scn.commands.steps
    out = []
    for i, (ts, v, w) in enumerate(steps):
        end = steps[i + 1][0] if i + 1 < len(steps) else t_end
        prev = steps[i - 1][1:] if i > 0 else (scn.initial_state[3], scn.initial_state[4])
        out.append((ts, min(end, t_end), (v, w), prev))
    return out


def disturbance_deviation(trace, dist, settle=SETTLE_AFTER_DISTURBANCE):
    """Peak lateral/longitudinal deviation of cart and base around one disturbance.

    Axes are fixed to the cart heading at onset. Velocity deviations are taken
    relative to the onset value; position deviations relative to constant-velocity
    extrapolation from onset.
    """
    c = trace.columns
    t = c["t"]
    i0 = int(np.searchsorted(t, dist.t))
    i0 = min(max(i0, 0), len(t) - 1)
    th0 = c["theta"][i0]
    lon = np.array([math.cos(th0), math.sin(th0)])
    lat = np.array([-math.sin(th0), math.cos(th0)])
    win = (t >= dist.t) & (t <= dist.t + dist.duration + settle)
    tw = t[win] - t[i0]

    def peaks(px, py, vx, vy):
        res = {}
        for axis, u in (("lateral", lat), ("longitudinal", lon)):
            vel = vx * u[0] + vy * u[1]
            pos = px * u[0] + py * u[1]
            dv = vel[win] - vel[i0]
            dp = pos[win] - (pos[i0] + vel[i0] * tw)
            res[f"{axis}_velocity"] = float(np.max(np.abs(dv))) if dv.size else 0.0
            res[f"{axis}_position"] = float(np.max(np.abs(dp))) if dp.size else 0.0
        return res

    v = c["v_x"]
    cart = peaks(c["x"], c["y"], v * np.cos(c["theta"]), v * np.sin(c["theta"]))
    out = {"t": dist.t, "target": dist.target, "cart": cart}
    if trace.scenario is not None and trace.scenario.coupling == "spring":
        out["base"] = peaks(c["base_x"], c["base_y"], c["base_vx"], c["base_vy"])
    else:
        out["base"] = None
    return out


def compute_metrics(trace):
    """Summary record of a run.

    Raises :class:`InsufficientDataError` if the trace ends before the first
    command hold completes.
    """
    scn = trace.scenario
    c = trace.columns
    t = c["t"]
    if len(t) < 2 or scn is None:
        raise InsufficientDataError("trace needs at least two rows and its scenario")
    holds = _holds(scn, t[-1])
    cmd_steps = scn.commands.steps
    first_end = cmd_steps[1][0] if len(cmd_steps) > 1 else scn.duration
    if t[-1] + 0.5 * trace.dt < min(first_end, scn.duration):
        raise InsufficientDataError("trace shorter than one command hold")

    sine_axes = (scn.commands.v_sine[0] != 0, scn.commands.w_sine[0] != 0)
    steps = []
    for ts, te, cmd, prev in holds:
        if te <= ts:
            continue
        entry = {"t_start": ts, "t_end": te, "command": list(cmd)}
        tail = (t >= te - STEADY_FRACTION * (te - ts)) & (t <= te)
        for axis, col, idx in (("v", "v_x", 0), ("omega", "omega", 1)):
            if sine_axes[idx]:
                continue
            y = c[col]
            if tail.any():
                err = float(np.mean(y[tail]) - cmd[idx])
                entry[f"{axis}_steady_error"] = err
                entry[f"{axis}_steady_error_rel"] = abs(err) / abs(cmd[idx]) if cmd[idx] != 0 else math.nan
            if cmd[idx] != prev[idx]:
                entry[f"{axis}_step"] = step_response(t, y, ts, prev[idx], cmd[idx], te)
        steps.append(entry)

    out = {
        "duration": float(t[-1]),
        "n_steps": int(len(t)),
        "holds": steps,
        "acceleration_norm": acceleration_norms(t, c["v_x"], c["omega"]),
        "disturbances": [disturbance_deviation(trace, d) for d in scn.disturbances],
        "max_lateral_velocity": float(lateral_velocity(trace).max(initial=0.0)),
        "degenerate_updates": int(np.sum(c["degenerate"])),
        "lean_clamped_steps": int(np.sum(c["lean_clamped"])),
        "final_estimate": {
            k: float(c[k][-1]) for k in ("m_hat", "px_hat", "py_hat", "I_hat", "sigma_hat")
        },
    }
    if scn.coupling == "spring":
        out["ee_mismatch"] = {
            "x": float(np.max(np.abs(c["eL_x"] - c["eR_x"]))),
            "y": float(np.max(np.abs(c["eL_y"] - c["eR_y"]))),
        }
        out["max_arm_error"] = float(np.max(np.hypot(c["eL_x"], c["eL_y"])))
    return out


def lateral_velocity(trace):
    """Per-step lateral world velocity reconstructed from consecutive poses.

    Uses the heading at the start of each step, which is the heading the
    integrator moves along.
    """
    c = trace.columns
    x0 = np.concatenate([[trace.initial_state.x], c["x"][:-1]])
    y0 = np.concatenate([[trace.initial_state.y], c["y"][:-1]])
    th0 = np.concatenate([[trace.initial_state.theta], c["theta"][:-1]])
    dt = np.diff(np.concatenate([[c["t"][0] - trace.dt], c["t"]]))
    dx = c["x"] - x0
    dy = c["y"] - y0
    return np.abs(-np.sin(th0) * dx + np.cos(th0) * dy) / dt


def time_to_within(t, est, truth, tol):
    """First time after which ``|est - truth| / truth`` stays within ``tol``; nan if never."""
    bad = np.abs(est - truth) > tol * abs(truth)
    if not bad.any():
        return float(t[0])
    last = np.flatnonzero(bad)[-1]
    return float(t[last + 1]) if last + 1 < len(t) else math.nan
