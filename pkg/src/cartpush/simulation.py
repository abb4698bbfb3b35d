"""Closed-loop pushing simulation.

One run couples the estimator, the pushing-pose optimizer, a second-order
lean tracker standing in for the balancing controller, a pusher-to-cart
coupling and the true cart dynamics. Two couplings are available:

``quasi_static``
    Lean angles map straight to equal handle forces.
``spring``
    The pusher base is a planar point mass driven by the lean force and any
    disturbance; each arm is a translational spring-damper between the base
    and its handle.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import dynamics
from .dynamics import CartParams, CartState, HandleForces, PlanarWrench
from .estimation import CartEkf, NoiseConfig, WrenchFilter
from .pusher import BallbotParams, lean_to_force, plan_push

COUPLING_MODES = ("quasi_static", "spring")
DISTURBANCE_TARGETS = ("base", "cart")


@dataclass(frozen=True)
class ArmModel:
    """Translational impedance of each arm. Rotational stiffness is always zero.

    ``M_d`` documents the desired inertia only; the plant supplies inertia.
    """

    K_d: tuple = (400.0, 400.0)
    B_d: tuple = (200.0, 200.0)
    M_d: tuple = (5.0, 5.0)

    def __post_init__(self):
        for name in ("K_d", "B_d", "M_d"):
            vals = tuple(float(v) for v in getattr(self, name))
            if len(vals) != 2 or min(vals) < 0:
                raise ValueError(f"{name} needs two non-negative values")
            object.__setattr__(self, name, vals)

    @property
    def rotational_stiffness(self):
        return 0.0


def arm_force(arm, e_x, e_x_dot):
    """Spring-damper force ``K e + B e_dot`` per axis."""
    return np.asarray(arm.K_d) * np.asarray(e_x, float) + np.asarray(arm.B_d) * np.asarray(e_x_dot, float)


@dataclass
class LeanTracker:
    """Critically damped (by default) second-order tracking of lean commands."""

    omega_n: float = 6.0
    zeta: float = 1.0
    phi: np.ndarray = field(default_factory=lambda: np.zeros(2))
    phi_dot: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        if not (self.omega_n > 0 and self.zeta > 0):
            raise ValueError("omega_n and zeta must be positive")
        self.phi = np.array(self.phi, float)
        self.phi_dot = np.array(self.phi_dot, float)


def lean_step(tracker, phi_cmd, dt):
    """Advance the tracker one semi-implicit Euler step and return the new lean."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    wn = tracker.omega_n
    acc = wn * wn * (np.asarray(phi_cmd, float) - tracker.phi) - 2.0 * tracker.zeta * wn * tracker.phi_dot
    tracker.phi_dot = tracker.phi_dot + dt * acc
    tracker.phi = tracker.phi + dt * tracker.phi_dot
    return tracker.phi.copy()


@dataclass(frozen=True)
class Disturbance:
    """Constant push applied over ``[t, t + duration)``.

    ``fx, fy`` are world-frame forces; ``tz`` a yaw torque (cart target only).
    """

    t: float
    duration: float
    fx: float = 0.0
    fy: float = 0.0
    tz: float = 0.0
    target: str = "base"

    def __post_init__(self):
        if self.target not in DISTURBANCE_TARGETS:
            raise ValueError(f"disturbance target must be one of {DISTURBANCE_TARGETS}")
        if not self.duration > 0:
            raise ValueError("disturbance duration must be positive")

    def active(self, t):
        return self.t <= t < self.t + self.duration


@dataclass(frozen=True)
class CommandProfile:
    """Piecewise-constant ``(t_start, v, omega)`` holds plus optional sinusoids.

    ``v_sine``/``w_sine`` are ``(amplitude, frequency_hz)``. A positive
    ``accel_limit`` ``(m/s^2, rad/s^2)`` rate-limits the step part.
    """

    steps: tuple = ((0.0, 0.0, 0.0),)
    v_sine: tuple = (0.0, 0.0)
    w_sine: tuple = (0.0, 0.0)
    accel_limit: tuple = (0.0, 0.0)

    def __post_init__(self):
        steps = tuple(tuple(float(v) for v in s) for s in self.steps)
        if not steps or any(len(s) != 3 for s in steps):
            raise ValueError("steps need (t, v, omega) triples")
        if any(b[0] <= a[0] for a, b in zip(steps, steps[1:])):
            raise ValueError("step times must be strictly increasing")
        object.__setattr__(self, "steps", steps)
        for name in ("v_sine", "w_sine", "accel_limit"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))

    def hold(self, t):
        """Step-part command at ``t`` (before rate limiting)."""
        v = w = 0.0
        for ts, sv, sw in self.steps:
            if t >= ts:
                v, w = sv, sw
            else:
                break
        return v, w

    def sine(self, t):
        av, fv = self.v_sine
        aw, fw = self.w_sine
        return av * math.sin(2 * math.pi * fv * t), aw * math.sin(2 * math.pi * fw * t)


@dataclass(frozen=True)
class ControllerConfig:
    """Outer-loop settings.

    The optimizer target is the steady-state wrench for the commanded twist
    plus ``M_hat (diag(k_v, k_omega) e + diag(ki_v, ki_omega) int e)`` with
    ``e = twist_cmd - twist_hat``. The integral freezes while the lean is
    saturated.
    """

    k_v: float = 1.0
    k_omega: float = 1.0
    ki_v: float = 0.2
    ki_omega: float = 0.2
    control_rate: float = 100.0
    use_steering: bool = True
    use_estimates: bool = True
    eps_v: float = 0.02
    lean_omega_n: float = 6.0
    lean_zeta: float = 1.0
    base_mass: float = 100.0
    arm: ArmModel = field(default_factory=ArmModel)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class Scenario:
    commands: CommandProfile = field(default_factory=CommandProfile)
    disturbances: tuple = ()
    duration: float = 10.0
    dt: float = 0.001
    coupling: str = "quasi_static"
    seed: int = 0
    initial_state: tuple = (0.0, 0.0, 0.0, 0.0, 0.0)
    name: str = "scenario"

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        if self.coupling not in COUPLING_MODES:
            raise ValueError(f"coupling must be one of {COUPLING_MODES}")
        for d in self.disturbances:
            if not 0 <= d.t <= self.duration:
                raise ValueError(f"disturbance at t={d.t} outside scenario duration")
        object.__setattr__(self, "disturbances", tuple(self.disturbances))
        object.__setattr__(self, "initial_state", tuple(float(v) for v in self.initial_state))

    @property
    def n_steps(self):
        return int(round(self.duration / self.dt))


TRACE_COLUMNS = (
    "t", "v_cmd", "w_cmd", "x", "y", "theta", "v_x", "omega",
    "phi_x_cmd", "phi_y_cmd", "phi_x", "phi_y", "beta",
    "fL_x", "fL_y", "fR_x", "fR_y", "f_p", "tau",
    "m_hat", "px_hat", "py_hat", "I_hat", "sigma_hat", "disturbed",
)
EXTRA_COLUMNS = (
    "base_x", "base_y", "base_vx", "base_vy",
    "eL_x", "eL_y", "eR_x", "eR_y", "edotL_norm", "edotR_norm", "degenerate", "lean_clamped",
)


@dataclass
class SimTrace:
    """Column-oriented record of a run; row ``k`` is the state after step ``k``.

    ``f_p``/``tau`` hold the wrench applied through the handles during that
    step. ``initial_state`` is the cart state before the first step.
    """

    columns: dict
    scenario: Scenario = None
    initial_state: CartState = CartState()

    def __len__(self):
        return len(self.columns["t"])

    def __getitem__(self, name):
        return self.columns[name]

    @property
    def dt(self):
        t = self.columns["t"]
        return float(t[1] - t[0]) if len(t) > 1 else (self.scenario.dt if self.scenario else float("nan"))

    def array(self, names=TRACE_COLUMNS):
        return np.column_stack([self.columns[n] for n in names])


def _rot(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s], [s, c]])


def run_scenario(scn, cp, bp=None, noise=None, controller=None):
    """Simulate ``scn`` against the true cart ``cp`` and return a :class:`SimTrace`."""
    bp = bp or BallbotParams()
    noise = noise or NoiseConfig()
    ctl = controller or ControllerConfig()
    dt = scn.dt
    decim = max(1, int(round(1.0 / (ctl.control_rate * dt))))
    ekf_decim = max(1, int(round(1.0 / (noise.update_rate * dt))))
    rng = np.random.Generator(np.random.Philox(key=scn.seed))

    state = CartState(*scn.initial_state)
    ekf = CartEkf(noise=noise, template=CartParams(l_w=cp.l_w, l_h=cp.l_h, d=cp.d, g=cp.g,
                                                   matrix_variant=cp.matrix_variant))
    ekf.reset_pose(state[:3], state[3:])
    wfilt = WrenchFilter(noise.window)
    tracker = LeanTracker(ctl.lean_omega_n, ctl.lean_zeta)
    arm = ctl.arm

    # arm springs are anchored at the handle midpoint so spring error and
    # handle force share one lever arm about the rear axle
    nominal = np.array([cp.d, 0.0])
    R0 = _rot(state.theta)
    base_p = np.array([state.x, state.y]) + R0 @ nominal
    base_v = np.array([state.v_x * math.cos(state.theta), state.v_x * math.sin(state.theta)])
    handles = cp.handle_positions()
    prev_anchor_v = None

    cmd_v = cmd_w = 0.0
    lim_v, lim_w = scn.commands.accel_limit
    plan = None
    lean_cmd = np.zeros(2)
    rec = {n: [] for n in TRACE_COLUMNS + EXTRA_COLUMNS}
    ctrl_params = ekf.params if ctl.use_estimates else cp
    degenerate = False
    wfilt_last = PlanarWrench(0.0, 0.0)
    err_int = np.zeros(2)

    for k in range(scn.n_steps):
        t = k * dt
        if k % ekf_decim == 0 and k > 0:
            z = np.array(state, float)
            z[:3] += rng.standard_normal(3) * (noise.meas_pos_std, noise.meas_pos_std, noise.meas_theta_std)
            z[3:] += rng.standard_normal(2) * (noise.meas_v_std, noise.meas_omega_std)
            ekf.step(wfilt_last, z[:3], z[3:], ekf_decim * dt)
            degenerate = ekf.degenerate
            if ctl.use_estimates:
                ctrl_params = ekf.params
        if k % decim == 0:
            hv, hw = scn.commands.hold(t)
            ctl_dt = decim * dt
            if lim_v > 0:
                hv = cmd_v + min(max(hv - cmd_v, -lim_v * ctl_dt), lim_v * ctl_dt)
            if lim_w > 0:
                hw = cmd_w + min(max(hw - cmd_w, -lim_w * ctl_dt), lim_w * ctl_dt)
            cmd_v, cmd_w = hv, hw
            sv, sw = scn.commands.sine(t)
            v_des, w_des = cmd_v + sv, cmd_w + sw
            if k == 0:
                twist_hat = np.array([state.v_x, state.omega])
            else:
                twist_hat = ekf.state.twist
            err = np.array([v_des, w_des]) - twist_hat
            if plan is None or not plan.lean.clamped:
                err_int = err_int + ctl_dt * err
            M_hat = dynamics.mass_matrix(ctrl_params)
            fb = M_hat @ (np.array([ctl.k_v, ctl.k_omega]) * err + np.array([ctl.ki_v, ctl.ki_omega]) * err_int)
            plan = plan_push(bp, ctrl_params, v_des, w_des, fb, ctl.use_steering, ctl.eps_v)
            lean_cmd = np.array([plan.lean.phi_x, plan.lean.phi_y])

        phi = lean_step(tracker, lean_cmd, dt)
        beta = plan.steering.beta
        f_arm_body = lean_to_force(bp, phi[0], phi[1])
        Rc = _rot(state.theta)
        Rcb = _rot(beta)

        dist_base = np.zeros(2)
        dist_cart = np.zeros(3)
        active = False
        for d in scn.disturbances:
            if d.active(t):
                active = True
                if d.target == "base":
                    dist_base += (d.fx, d.fy)
                else:
                    dist_cart += (d.fx, d.fy, d.tz)

        if scn.coupling == "quasi_static":
            F = Rcb @ f_arm_body + 0.5 * (Rc.T @ dist_base)
            F_L = F_R = F
            eL = eR = np.zeros(2)
            edot_n = 0.0
        else:
            cart_p = np.array([state.x, state.y])
            cart_v = np.array([state.v_x * Rc[0, 0], state.v_x * Rc[1, 0]])
            anchor = cart_p + Rc @ nominal
            # velocity of the nominal base point rigidly attached to the cart
            rn = Rc @ nominal
            anchor_v = cart_v + state.omega * np.array([-rn[1], rn[0]])
            # world-frame error, mapped to the arm (pusher) frame for the gains
            Rb = Rc @ Rcb
            e = Rb.T @ (base_p - anchor)
            edot = Rb.T @ (base_v - anchor_v)
            f_each_b = arm_force(arm, e, edot)
            f_each_w = Rb @ f_each_b
            drive = Rb @ (2.0 * f_arm_body)
            # the balancing controller carries the pusher's own mass along with
            # the cart; lean force and disturbances act on the relative motion
            anchor_acc = np.zeros(2) if prev_anchor_v is None else (anchor_v - prev_anchor_v) / dt
            prev_anchor_v = anchor_v
            base_acc = anchor_acc + (drive + dist_base - 2.0 * f_each_w) / ctl.base_mass
            base_v = base_v + dt * base_acc
            base_p = base_p + dt * base_v
            F_L = F_R = Rc.T @ f_each_w
            eL = eR = e
            edot_n = float(np.hypot(*edot))

        hf = HandleForces(tuple(F_L), tuple(F_R), handles[0], handles[1])
        w_handle = dynamics.handle_wrench(hf)
        noisy = (
            w_handle.f_p + noise.wrench_force_std * rng.standard_normal(),
            w_handle.tau + noise.wrench_torque_std * rng.standard_normal(),
        )
        wfilt_last = wfilt.push(noisy)

        heading = np.array([Rc[0, 0], Rc[1, 0]])
        applied = PlanarWrench(
            w_handle.f_p + float(heading @ dist_cart[:2]), w_handle.tau + dist_cart[2]
        )
        state = dynamics.step(cp, state, applied, dt)

        est = ekf.params
        row = (
            (k + 1) * dt, v_des, w_des, *state,
            lean_cmd[0], lean_cmd[1], phi[0], phi[1], beta,
            F_L[0], F_L[1], F_R[0], F_R[1], w_handle.f_p, w_handle.tau,
            est.m_w, est.p_x, est.p_y, est.I_w, est.sigma, float(active),
            base_p[0], base_p[1], base_v[0], base_v[1],
            eL[0], eL[1], eR[0], eR[1], edot_n, edot_n, float(degenerate), float(plan.lean.clamped),
        )
        for name, val in zip(TRACE_COLUMNS + EXTRA_COLUMNS, row):
            rec[name].append(float(val))

    columns = {n: np.asarray(v, float) for n, v in rec.items()}
    return SimTrace(columns, scn, CartState(*scn.initial_state))
