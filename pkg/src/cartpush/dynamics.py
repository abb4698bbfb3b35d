"""Planar nonholonomic cart (wheelchair) model.

The cart state is a world pose ``(x, y, theta)`` plus a body twist
``(v_x, omega)``. There is no lateral velocity field, so the rolling
constraint of the rear wheels holds by construction. Dynamics follow

    M q_ddot + C(q_dot) q_dot = wrench - N(q_dot)

with ``q_dot = (v_x, omega)``. All model terms are evaluated from the
linear-in-parameters vector ``phi = (m, m p_x, m p_y, I + m |p|^2, sigma)``
so that the simulator and the identification filter share one code path.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from typing import NamedTuple

import numpy as np

from .errors import EstimatorDegenerateError, NonInvertibleModelError

MATRIX_VARIANTS = ("paper_printed", "symmetric_reference")
DET_TOL = 1e-12


class PlanarWrench(NamedTuple):
    """Effective cart input: force along the cart x axis and yaw torque."""

    f_p: float
    tau: float


class CartState(NamedTuple):
    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0
    v_x: float = 0.0
    omega: float = 0.0

    @property
    def twist(self):
        return np.array([self.v_x, self.omega])


@dataclass(frozen=True)
class CartParams:
    """Physical cart parameters (SI units).

    ``I_w`` is the yaw inertia about the centre of mass; ``d`` the x offset of
    the handles from the rear axle midpoint. ``matrix_variant`` selects the mass
    matrix form used by :func:`mass_matrix`.
    """

    m_w: float = 34.6
    p_x: float = 0.0
    p_y: float = 0.0
    I_w: float = 6.2
    mu: float = 0.01
    l_w: float = 0.56
    l_h: float = 0.5
    d: float = 0.3
    g: float = 9.8
    matrix_variant: str = "paper_printed"

    def __post_init__(self):
        for name in ("m_w", "I_w", "l_w", "l_h", "g"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be positive and finite, got {val!r}")
        if not (math.isfinite(self.mu) and self.mu >= 0):
            raise ValueError(f"mu must be non-negative, got {self.mu!r}")
        for name in ("p_x", "p_y", "d"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.matrix_variant not in MATRIX_VARIANTS:
            raise ValueError(
                f"matrix_variant must be one of {MATRIX_VARIANTS}, got {self.matrix_variant!r}"
            )

    @classmethod
    def for_load(cls, total_mass, **overrides):
        """Cart with a given total mass; yaw inertia scales with a 0.42 m radius of gyration."""
        kwargs = {"m_w": float(total_mass), "I_w": 0.18 * float(total_mass)}
        kwargs.update(overrides)
        return cls(**kwargs)

    @property
    def normal_force(self):
        """Load per wheel, assuming the mass sits evenly on four wheels."""
        return self.m_w * self.g / 4.0

    @property
    def sigma(self):
        """Viscous friction magnitude ``mu * N``."""
        return self.mu * self.normal_force

    def handle_positions(self):
        """Left and right handle positions in the cart frame."""
        return (self.d, 0.5 * self.l_h), (self.d, -0.5 * self.l_h)

    def replace(self, **changes):
        return replace(self, **changes)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class HandleForces:
    """Planar forces at the two handles, expressed in the cart frame."""

    F_L: tuple
    F_R: tuple
    r_L: tuple
    r_R: tuple

    @classmethod
    def at_handles(cls, params, F_L, F_R):
        r_L, r_R = params.handle_positions()
        return cls(tuple(map(float, F_L)), tuple(map(float, F_R)), r_L, r_R)


def param_vector(params):
    """Linear-in-parameters vector ``(m, m p_x, m p_y, I + m |p|^2, sigma)``."""
    m = params.m_w
    return np.array(
        [
            m,
            m * params.p_x,
            m * params.p_y,
            params.I_w + m * (params.p_x**2 + params.p_y**2),
            params.sigma,
        ]
    )


def check_param_vector(phi, m_min=1.0):
    """Raise :class:`EstimatorDegenerateError` unless ``phi`` maps to a physical cart."""
    m, mpx, mpy, J = phi[0], phi[1], phi[2], phi[3]
    if not all(math.isfinite(v) for v in phi):
        raise EstimatorDegenerateError("non-finite parameter estimate")
    if m <= m_min:
        raise EstimatorDegenerateError(f"mass estimate {m:.6g} kg not above {m_min:g} kg")
    inertia = J - (mpx * mpx + mpy * mpy) / m
    if inertia <= 0:
        raise EstimatorDegenerateError(f"yaw inertia estimate {inertia:.6g} not positive")
    return inertia


def _mass_entries(phi, variant):
    m, mpx, mpy, J = phi[0], phi[1], phi[2], phi[3]
    if variant == "paper_printed":
        inertia = J - (mpx * mpx + mpy * mpy) / m
        return m, 0.0, mpy * J / inertia, J
    return m, -mpy, -mpy, J


def _accel_phi(phi, l_w, variant, v, w, f_p, tau):
    a, b, c, e = _mass_entries(phi, variant)
    det = a * e - b * c
    if not abs(det) > DET_TOL:
        raise NonInvertibleModelError(f"mass matrix determinant {det:.3g} below {DET_TOL:g}")
    sigma = phi[4]
    # rhs = wrench - C q_dot - N q_dot
    r1 = f_p + phi[1] * w * w - sigma * v
    r2 = tau - sigma * 0.5 * l_w * w
    return (e * r1 - b * r2) / det, (a * r2 - c * r1) / det


def wrap_angle(theta):
    """Wrap to (-pi, pi]."""
    w = math.remainder(theta, 2.0 * math.pi)
    return math.pi if w == -math.pi else w


def mass_matrix(params):
    """2x2 inertia matrix for ``params.matrix_variant``."""
    a, b, c, e = _mass_entries(param_vector(params), params.matrix_variant)
    M = np.array([[a, b], [c, e]])
    if not abs(a * e - b * c) > DET_TOL:
        raise NonInvertibleModelError("mass matrix is singular")
    return M


def coriolis_matrix(params, omega):
    return np.array([[0.0, -params.m_w * omega * params.p_x], [0.0, 0.0]])


def friction_wrench(params, v_x, omega):
    """Viscous wheel friction, a diagonal gain ``diag(mu N, mu N l_w / 2)`` on the twist."""
    s = params.sigma
    return PlanarWrench(s * v_x, s * 0.5 * params.l_w * omega)


def handle_wrench(hf):
    """Collapse two handle forces to the cart's effective ``(f_p, tau)``.

    Lateral components are absorbed by the wheel constraint except through
    their moment about the rear axle midpoint.
    """
    vals = (*hf.F_L, *hf.F_R, *hf.r_L, *hf.r_R)
    if not all(math.isfinite(v) for v in vals):
        raise ValueError("handle forces must be finite")
    (flx, fly), (frx, fry) = hf.F_L, hf.F_R
    (rlx, rly), (rrx, rry) = hf.r_L, hf.r_R
    f_p = flx + frx
    tau = (rlx * fly - rly * flx) + (rrx * fry - rry * frx)
    return PlanarWrench(f_p, tau)


def acceleration(params, state, wrench):
    """Body-frame ``(v_dot, omega_dot)`` from the equations of motion."""
    return _accel_phi(
        param_vector(params),
        params.l_w,
        params.matrix_variant,
        state.v_x,
        state.omega,
        wrench[0],
        wrench[1],
    )


def _integrate(state, dv, dw, dt):
    v = state.v_x + dt * dv
    w = state.omega + dt * dw
    # pose uses the updated twist (semi-implicit Euler)
    c, s = math.cos(state.theta), math.sin(state.theta)
    return CartState(
        state.x + dt * v * c,
        state.y + dt * v * s,
        wrap_angle(state.theta + dt * w),
        v,
        w,
    )


def step(params, state, wrench, dt):
    """Advance the cart by one semi-implicit Euler step of length ``dt``."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    dv, dw = acceleration(params, state, wrench)
    return _integrate(state, dv, dw, dt)


def step_phi(phi, l_w, variant, state, wrench, dt):
    """Same as :func:`step` but driven by a raw parameter vector."""
    dv, dw = _accel_phi(phi, l_w, variant, state.v_x, state.omega, wrench[0], wrench[1])
    return _integrate(state, dv, dw, dt)


def kinetic_energy(params, state):
    """``0.5 q_dot^T M_sym q_dot`` using the symmetric mass matrix."""
    phi = param_vector(params)
    v, w = state.v_x, state.omega
    return 0.5 * (phi[0] * v * v - 2.0 * phi[2] * v * w + phi[3] * w * w)
