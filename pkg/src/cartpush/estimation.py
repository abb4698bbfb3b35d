"""Online identification of cart parameters with an extended Kalman filter.

The filter state is ``[x, y, theta, v_x, omega, phi_1..phi_5]`` where ``phi``
is the linear-in-parameters vector ``(m, m p_x, m p_y, I + m |p|^2, sigma)``.
Parameters are modelled as constant; the handle wrench enters as a control
input after a moving-average filter, and pose plus twist are measured
directly.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from sklearn.base import BaseEstimator

from . import dynamics
from ._validation import check_trace_array
from .dynamics import CartParams, CartState, PlanarWrench, check_param_vector
from .errors import EstimatorDegenerateError, InsufficientDataError, NumericalDegeneracyError

PHI0 = (60.0, 0.0, 0.0, 30.0, 0.001)
N_STATE = 10
N_MEAS = 5
THETA = 2


@dataclass(frozen=True)
class NoiseConfig:
    """Filter noise and rate settings.

    ``param_process_std`` is a random-walk std per sqrt(second) on ``phi``;
    ``param_init_std`` sets the initial parameter uncertainty around ``phi0``.
    """

    pose_process_std: float = 1e-4
    twist_process_std: float = 1e-3
    param_process_std: tuple = (0.06, 0.006, 0.006, 0.03, 0.001)
    meas_pos_std: float = 0.005
    meas_theta_std: float = 0.005
    meas_v_std: float = 0.01
    meas_omega_std: float = 0.01
    wrench_force_std: float = 0.5
    wrench_torque_std: float = 0.2
    window: int = 10
    update_rate: float = 100.0
    phi0: tuple = PHI0
    param_init_std: tuple = (30.0, 2.0, 2.0, 20.0, 1.0)
    m_min: float = 1.0

    def __post_init__(self):
        for name in ("param_process_std", "phi0", "param_init_std"):
            vals = tuple(float(v) for v in getattr(self, name))
            if len(vals) != 5:
                raise ValueError(f"{name} needs 5 values")
            object.__setattr__(self, name, vals)
        stds = (
            self.pose_process_std,
            self.twist_process_std,
            self.meas_pos_std,
            self.meas_theta_std,
            self.meas_v_std,
            self.meas_omega_std,
            self.wrench_force_std,
            self.wrench_torque_std,
            *self.param_process_std,
            *self.param_init_std,
        )
        if any(not (math.isfinite(s) and s >= 0) for s in stds):
            raise ValueError("noise standard deviations must be finite and non-negative")
        if int(self.window) != self.window or self.window < 1:
            raise ValueError("window must be a positive integer")
        object.__setattr__(self, "window", int(self.window))
        if not self.update_rate > 0:
            raise ValueError("update_rate must be positive")

    @classmethod
    def noiseless(cls, **overrides):
        """Zero sensor noise (filter covariances stay at their defaults)."""
        kw = dict(meas_pos_std=0.0, meas_theta_std=0.0, meas_v_std=0.0, meas_omega_std=0.0,
                  wrench_force_std=0.0, wrench_torque_std=0.0)
        kw.update(overrides)
        return cls(**kw)

    def process_cov(self):
        return np.diag(
            np.square([self.pose_process_std] * 3 + [self.twist_process_std] * 2 + list(self.param_process_std))
        )

    def meas_cov(self, floor=1e-6):
        # the filter never uses an exactly-zero measurement covariance
        stds = [self.meas_pos_std, self.meas_pos_std, self.meas_theta_std, self.meas_v_std, self.meas_omega_std]
        return np.diag(np.square(np.maximum(stds, floor)))

    def initial_cov(self):
        return np.diag(np.square([1e-3] * 3 + [1e-2] * 2 + list(self.param_init_std)))

    def to_dict(self):
        return asdict(self)


class EkfState(NamedTuple):
    x: np.ndarray
    P: np.ndarray
    innovation: Optional[np.ndarray] = None

    @property
    def pose(self):
        return self.x[:3]

    @property
    def twist(self):
        return self.x[3:5]

    @property
    def phi(self):
        return self.x[5:]


def initial_state(pose=(0.0, 0.0, 0.0), twist=(0.0, 0.0), noise=None):
    noise = noise or NoiseConfig()
    x = np.concatenate([np.asarray(pose, float), np.asarray(twist, float), noise.phi0])
    return EkfState(x, noise.initial_cov())


class WrenchFilter:
    """Moving average over the last ``window`` wrench samples."""

    def __init__(self, window=10):
        if window < 1:
            raise ValueError("window must be >= 1")
        self.window = int(window)
        self.buffer = deque(maxlen=self.window)

    def push(self, sample):
        self.buffer.append((float(sample[0]), float(sample[1])))
        n = len(self.buffer)
        return PlanarWrench(sum(s[0] for s in self.buffer) / n, sum(s[1] for s in self.buffer) / n)

    def __len__(self):
        return len(self.buffer)


def filter_wrench(filt, sample):
    return filt.push(sample)


def extract_params(phi, template=None, m_min=1.0):
    """Recover physical parameters from ``phi``.

    Geometry (``l_w``, ``l_h``, ``d``, ``g``, variant) comes from ``template``.
    A negative friction estimate maps to ``mu = 0``.
    """
    template = template or CartParams()
    phi = np.asarray(phi, float)
    inertia = check_param_vector(phi, m_min)
    m = float(phi[0])
    mu = max(0.0, 4.0 * float(phi[4]) / (m * template.g))
    return template.replace(
        m_w=m, p_x=float(phi[1]) / m, p_y=float(phi[2]) / m, I_w=float(inertia), mu=mu
    )


def transition(x, wrench, dt, l_w, variant):
    """Discrete mean propagation; parameters are held constant."""
    s = CartState(*x[:5])
    n = dynamics.step_phi(x[5:], l_w, variant, s, wrench, dt)
    out = x.copy()
    out[:5] = n
    return out


def transition_jacobian(x, wrench, dt, l_w, variant, rel_step=1e-6):
    """Central-difference Jacobian of :func:`transition`."""
    F = np.empty((N_STATE, N_STATE))
    for i in range(N_STATE):
        h = rel_step * max(abs(x[i]), 1.0)
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        diff = transition(xp, wrench, dt, l_w, variant) - transition(xm, wrench, dt, l_w, variant)
        diff[THETA] = math.remainder(diff[THETA], 2.0 * math.pi)
        F[:, i] = diff / (2.0 * h)
    return F


def predict(state, wrench, dt, noise=None, l_w=0.56, variant="paper_printed"):
    if not dt > 0:
        raise ValueError("dt must be positive")
    noise = noise or NoiseConfig()
    check_param_vector(state.phi, noise.m_min)
    x = np.asarray(state.x, float)
    F = transition_jacobian(x, wrench, dt, l_w, variant)
    P = F @ state.P @ F.T + noise.process_cov() * dt
    return EkfState(transition(x, wrench, dt, l_w, variant), 0.5 * (P + P.T))


def update(state, measured_pose, measured_twist, noise=None):
    """EKF correction with a linear measurement of pose and twist."""
    noise = noise or NoiseConfig()
    z = np.concatenate([np.asarray(measured_pose, float), np.asarray(measured_twist, float)])
    if not np.all(np.isfinite(z)):
        raise ValueError("measurement must be finite")
    x, P = state.x, state.P
    y = z - x[:N_MEAS]
    y[THETA] = math.remainder(y[THETA], 2.0 * math.pi)
    Rm = noise.meas_cov()
    S = P[:N_MEAS, :N_MEAS] + Rm
    try:
        if np.linalg.cond(S) > 1e14:
            raise np.linalg.LinAlgError("ill-conditioned")
        K = np.linalg.solve(S, P[:N_MEAS, :]).T
    except np.linalg.LinAlgError as exc:
        raise NumericalDegeneracyError(f"innovation covariance not invertible: {exc}") from exc
    x_new = x + K @ y
    x_new[THETA] = dynamics.wrap_angle(x_new[THETA])
    # Joseph form keeps P positive semidefinite
    IKH = np.eye(N_STATE)
    IKH[:, :N_MEAS] -= K
    P_new = IKH @ P @ IKH.T + K @ Rm @ K.T
    return EkfState(x_new, 0.5 * (P_new + P_new.T), y)


@dataclass
class CartEkf:
    """Single-writer online estimator with the hold-last-valid policy.

    When an update drives ``phi`` outside the physical region, the parameter
    part of the state is reset to the last valid estimate before the next
    prediction and ``degenerate_count`` is incremented.
    """

    noise: NoiseConfig = field(default_factory=NoiseConfig)
    template: CartParams = field(default_factory=CartParams)
    state: EkfState = None
    last_valid_phi: np.ndarray = None
    degenerate_count: int = 0
    degenerate: bool = False

    def __post_init__(self):
        if self.state is None:
            self.state = initial_state(noise=self.noise)
        if self.last_valid_phi is None:
            self.last_valid_phi = np.array(self.noise.phi0, float)
        self._params = extract_params(self.last_valid_phi, self.template, self.noise.m_min)

    def reset_pose(self, pose, twist):
        x = self.state.x.copy()
        x[:3] = pose
        x[3:5] = twist
        self.state = EkfState(x, self.state.P)

    @property
    def params(self):
        """Last valid parameter estimate, as :class:`CartParams`."""
        return self._params

    def step(self, wrench, pose, twist, dt):
        self.degenerate = False
        try:
            check_param_vector(self.state.phi, self.noise.m_min)
        except EstimatorDegenerateError:
            x = self.state.x.copy()
            x[5:] = self.last_valid_phi
            self.state = EkfState(x, self.state.P)
            self.degenerate = True
            self.degenerate_count += 1
        st = predict(self.state, wrench, dt, self.noise, self.template.l_w, self.template.matrix_variant)
        st = update(st, pose, twist, self.noise)
        self.state = st
        try:
            self._params = extract_params(st.phi, self.template, self.noise.m_min)
            self.last_valid_phi = st.phi.copy()
        except EstimatorDegenerateError:
            self.degenerate = True
        return st


class CartIdentifier(BaseEstimator):
    """Offline cart parameter identification from a recorded trace.

    Parameters
    ----------
    noise : NoiseConfig, optional
        Filter covariances, wrench filter window and update rate.
    template : CartParams, optional
        Known geometry (``l_w``, ``l_h``, ``d``, ``g``) and mass-matrix variant.

    ``fit`` takes an array with columns ``t, x, y, theta, v_x, omega, f_p, tau``.
    Every row's wrench passes through the moving-average filter; the filter
    runs at ``noise.update_rate``.

    Attributes
    ----------
    params_ : CartParams
    phi_ : ndarray of shape (5,)
    covariance_ : ndarray of shape (10, 10)
    history_ : ndarray of shape (n_updates, 6)
        Update time followed by the parameter vector.
    n_degenerate_ : int
    """

    def __init__(self, noise=None, template=None):
        self.noise = noise
        self.template = template

    def fit(self, X, y=None):
        X = check_trace_array(X, min_rows=2)
        noise = self.noise if self.noise is not None else NoiseConfig()
        template = self.template if self.template is not None else CartParams()
        ekf = CartEkf(noise=noise, template=template)
        ekf.reset_pose(X[0, 1:4], X[0, 4:6])
        filt = WrenchFilter(noise.window)
        period = 1.0 / noise.update_rate
        t_last = X[0, 0]
        hist = []
        for row in X[1:]:
            t = row[0]
            # wrench over (t_prev, t] drives the interval ending at t
            wrench = filt.push(row[6:8])
            if t - t_last >= period - 1e-9:
                ekf.step(wrench, row[1:4], row[4:6], t - t_last)
                t_last = t
                hist.append(np.concatenate([[t], ekf.state.phi]))
        if not hist:
            raise InsufficientDataError("trace shorter than one filter period")
        self.history_ = np.array(hist)
        self.phi_ = ekf.last_valid_phi.copy()
        self.params_ = ekf.params
        self.covariance_ = ekf.state.P.copy()
        self.n_degenerate_ = ekf.degenerate_count
        return self
