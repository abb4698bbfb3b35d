"""Quasi-static pushing-pose optimizer and steering controller.

A balancing robot pushes the cart through two compliant arms. Leaning the
body by ``(phi_x, phi_y)`` produces a per-arm force of
``m_robot g l phi / (2 r_z)``; the optimizer picks the lean that best
produces a target cart wrench in the weighted least-squares sense,

    min_phi (A phi - f)^T Q (A phi - f) + phi^T R phi,

whose minimiser is ``(A^T Q A + R)^-1 A^T Q f``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import dynamics
from ._validation import check_twists
from .dynamics import CartParams, PlanarWrench

DEFAULT_BETA_LIMIT = math.radians(35.0)
DEFAULT_EPS_V = 0.02


def _spd(mat, name):
    mat = np.asarray(mat, dtype=float)
    if mat.shape != (2, 2):
        raise ValueError(f"{name} must be 2x2")
    if not np.allclose(mat, mat.T):
        raise ValueError(f"{name} must be symmetric")
    if np.linalg.eigvalsh(mat).min() <= 0:
        raise ValueError(f"{name} must be positive definite")
    return mat


@dataclass(frozen=True)
class BallbotParams:
    """Pusher parameters. ``Q`` and ``R`` are stored as nested tuples."""

    m_robot: float = 65.0
    l: float = 0.7
    r_z: float = 0.9
    lean_limit: float = 0.15
    beta_limit: float = DEFAULT_BETA_LIMIT
    Q: tuple = ((10.0, 0.0), (0.0, 10.0))
    R: tuple = ((1.0, 0.0), (0.0, 1.0))
    g: float = 9.8

    def __post_init__(self):
        for name in ("m_robot", "l", "r_z", "lean_limit", "g"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.beta_limit <= math.pi / 2:
            raise ValueError("beta_limit must lie in (0, pi/2]")
        for name in ("Q", "R"):
            mat = _spd(getattr(self, name), name)
            object.__setattr__(self, name, tuple(tuple(map(float, row)) for row in mat))

    @property
    def Q_matrix(self):
        return np.array(self.Q)

    @property
    def R_matrix(self):
        return np.array(self.R)

    @property
    def lean_gain(self):
        """Per-arm force per radian of lean (linearised)."""
        return self.m_robot * self.g * self.l / (2.0 * self.r_z)

    def to_dict(self):
        return asdict(self)


class LeanCommand(NamedTuple):
    phi_x: float
    phi_y: float
    clamped: bool = False


class SteeringCommand(NamedTuple):
    beta: float
    r_Lee: np.ndarray
    r_Ree: np.ndarray


def lean_to_force(bp, phi_x, phi_y, exact=False):
    """Per-arm planar force produced by a body lean (the two arms share it equally)."""
    if exact:
        return np.array([bp.lean_gain * math.sin(phi_x), bp.lean_gain * math.sin(phi_y)])
    return np.array([bp.lean_gain * phi_x, bp.lean_gain * phi_y])


def required_wrench(cp, v_des, omega_des):
    """Wrench that holds the cart at a constant twist: ``C q_dot + N q_dot``."""
    cq = dynamics.coriolis_matrix(cp, omega_des) @ (v_des, omega_des)
    fric = dynamics.friction_wrench(cp, v_des, omega_des)
    return PlanarWrench(float(cq[0]) + fric.f_p, float(cq[1]) + fric.tau)


def _rot(beta):
    c, s = math.cos(beta), math.sin(beta)
    return np.array([[c, -s], [s, c]])


def ee_targets(beta, cp):
    """End-effector targets, a rigid bar of length ``l_w`` pivoted at ``(d, 0)``."""
    centre = np.array([cp.d, 0.0])
    half = np.array([0.0, 0.5 * cp.l_w])
    rot = _rot(beta)
    return centre + rot @ half, centre - rot @ half


def build_allocation(bp, cp, beta, contacts=None):
    """Matrix mapping ``(phi_x, phi_y)`` to the cart wrench ``(f_p, tau)``.

    ``contacts`` are the two end-effector positions in the cart frame; by
    default the steering targets for ``beta``.
    """
    if abs(beta) > bp.beta_limit + 1e-12:
        raise ValueError(f"|beta| = {abs(beta):.4f} exceeds beta_limit {bp.beta_limit:.4f}")
    if contacts is None:
        contacts = ee_targets(beta, cp)
    sx, sy = np.asarray(contacts[0], float) + np.asarray(contacts[1], float)
    k = bp.lean_gain
    c, s = math.cos(beta), math.sin(beta)
    return np.array(
        [
            [2.0 * k * c, -2.0 * k * s],
            [k * (sx * s - sy * c), k * (sx * c + sy * s)],
        ]
    )


def qp_objective(A, f, Q, R, phi):
    r = A @ phi - f
    return float(r @ Q @ r + phi @ R @ phi)


def solve_lean(A, f, Q, R, lean_limit=None):
    """Closed-form weighted least-squares lean, clamped to ``lean_limit``."""
    A = np.asarray(A, float)
    Q = np.asarray(Q, float)
    f = np.asarray(f, float)
    AtQ = A.T @ Q
    phi = np.linalg.solve(AtQ @ A + np.asarray(R, float), AtQ @ f)
    clamped = False
    if lean_limit is not None:
        bounded = np.clip(phi, -lean_limit, lean_limit)
        clamped = bool(np.any(bounded != phi))
        phi = bounded
    return LeanCommand(float(phi[0]), float(phi[1]), clamped)


def steering_angle(v_des, omega_des, cp, bp, eps=DEFAULT_EPS_V):
    """Steering angle for a desired twist, saturated at ``bp.beta_limit``.

    Below ``eps`` forward speed the cart turns in place with the bar fully
    steered toward the turn.
    """
    if abs(v_des) < eps:
        if omega_des == 0:
            return 0.0
        return math.copysign(bp.beta_limit, omega_des)
    arg = omega_des * cp.l_w / (4.0 * v_des * cp.d)
    beta = math.asin(min(1.0, max(-1.0, arg)))
    return min(bp.beta_limit, max(-bp.beta_limit, beta))


def icr_radius(v_des, omega_des):
    """Turning radius ``v / omega``; ``math.inf`` when not turning."""
    if omega_des == 0:
        return math.inf
    return v_des / omega_des


def steer(v_des, omega_des, cp, bp, eps=DEFAULT_EPS_V):
    beta = steering_angle(v_des, omega_des, cp, bp, eps)
    r_L, r_R = ee_targets(beta, cp)
    return SteeringCommand(beta, r_L, r_R)


@dataclass
class PushPlan:
    lean: LeanCommand
    steering: SteeringCommand
    target: PlanarWrench
    allocation: np.ndarray = field(repr=False)


def plan_push(bp, cp, v_des, omega_des, extra_wrench=(0.0, 0.0), use_steering=True, eps=DEFAULT_EPS_V):
    """Steering plus optimal lean for a desired twist.

    ``extra_wrench`` is added to the steady-state requirement, e.g. a velocity
    feedback term from the caller.
    """
    st = steer(v_des, omega_des, cp, bp, eps) if use_steering else SteeringCommand(0.0, *ee_targets(0.0, cp))
    base = required_wrench(cp, v_des, omega_des)
    target = PlanarWrench(base.f_p + extra_wrench[0], base.tau + extra_wrench[1])
    A = build_allocation(bp, cp, st.beta, (st.r_Lee, st.r_Ree))
    lean = solve_lean(A, target, bp.Q_matrix, bp.R_matrix, bp.lean_limit)
    return PushPlan(lean, st, target, A)


class PushingPoseOptimizer(TransformerMixin, BaseEstimator):
    """Map desired cart twists to body lean angles.

    Parameters
    ----------
    ballbot : BallbotParams, optional
    cart : CartParams, optional
        Cart model used for the steady-state wrench (typically an estimate).
    use_steering : bool, default=True
        Steer the end-effector bar; otherwise lean alone produces yaw torque.
    eps_v : float, default=0.02
        Forward speed below which the cart turns in place.

    ``transform`` takes an ``(n, 2)`` array of ``(v_des, omega_des)`` and
    returns ``(n, 2)`` lean angles ``(phi_x, phi_y)``.
    """

    def __init__(self, ballbot=None, cart=None, use_steering=True, eps_v=DEFAULT_EPS_V):
        self.ballbot = ballbot
        self.cart = cart
        self.use_steering = use_steering
        self.eps_v = eps_v

    def fit(self, X=None, y=None):
        self.ballbot_ = self.ballbot if self.ballbot is not None else BallbotParams()
        self.cart_ = self.cart if self.cart is not None else CartParams()
        if not self.eps_v >= 0:
            raise ValueError("eps_v must be non-negative")
        if X is not None:
            check_twists(X)
        self.n_features_in_ = 2
        return self

    def _plans(self, X):
        check_is_fitted(self, "ballbot_")
        X = check_twists(X)
        return [
            plan_push(self.ballbot_, self.cart_, v, w, use_steering=self.use_steering, eps=self.eps_v)
            for v, w in X
        ]

    def transform(self, X):
        return np.array([[p.lean.phi_x, p.lean.phi_y] for p in self._plans(X)]).reshape(-1, 2)

    def steering(self, X):
        """Steering angle per row of ``X``."""
        return np.array([p.steering.beta for p in self._plans(X)])
