import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cartpush.dynamics import (
    CartParams,
    CartState,
    HandleForces,
    PlanarWrench,
    acceleration,
    check_param_vector,
    coriolis_matrix,
    friction_wrench,
    handle_wrench,
    kinetic_energy,
    mass_matrix,
    param_vector,
    step,
    step_phi,
    wrap_angle,
)
from cartpush.errors import EstimatorDegenerateError, NonInvertibleModelError
from cartpush.pusher import required_wrench


def cart_params(variant=None):
    return st.builds(
        CartParams,
        m_w=st.floats(5.0, 150.0),
        p_x=st.floats(-0.2, 0.2),
        p_y=st.floats(-0.2, 0.2),
        I_w=st.floats(1.0, 40.0),
        mu=st.floats(0.0, 0.1),
        matrix_variant=st.sampled_from(["paper_printed", "symmetric_reference"]) if variant is None else st.just(variant),
    )


# ---- mass, Coriolis and friction terms ----

@pytest.mark.parametrize("variant", ["paper_printed", "symmetric_reference"])
def test_mass_matrix_zero_offset(variant):
    M = mass_matrix(CartParams(m_w=60, I_w=30, matrix_variant=variant))
    np.testing.assert_allclose(M, [[60, 0], [0, 30]])


def test_mass_matrix_printed_with_offset():
    M = mass_matrix(CartParams(m_w=60, p_x=0.1, p_y=0.2, I_w=30))
    np.testing.assert_allclose(M, [[60, 0], [13.2, 33]], atol=1e-12)


def test_mass_matrix_symmetric_with_offset():
    M = mass_matrix(CartParams(m_w=60, p_x=0.1, p_y=0.2, I_w=30, matrix_variant="symmetric_reference"))
    np.testing.assert_allclose(M, [[60, -12], [-12, 33]], atol=1e-12)


def test_singular_parameter_vector_rejected():
    # symmetric form with m J == (m p_y)^2 has zero determinant
    phi = np.array([1.0, 0.0, 1.0, 1.0, 0.0])
    with pytest.raises(NonInvertibleModelError):
        step_phi(phi, 0.56, "symmetric_reference", CartState(), (0.0, 0.0), 0.01)


def test_coriolis():
    cp = CartParams(m_w=60, p_x=0.1)
    np.testing.assert_array_equal(coriolis_matrix(cp, 0.0), np.zeros((2, 2)))
    np.testing.assert_allclose(coriolis_matrix(cp, 0.5), [[0, -3], [0, 0]])
    np.testing.assert_array_equal(coriolis_matrix(CartParams(p_x=0.0), 2.3), np.zeros((2, 2)))


def test_friction():
    cp = CartParams(m_w=40, g=9.8, mu=0.01, l_w=0.56)
    assert friction_wrench(cp, 0.0, 0.0) == (0.0, 0.0)
    np.testing.assert_allclose(friction_wrench(cp, 1.0, 0.0), (0.98, 0.0))
    np.testing.assert_allclose(friction_wrench(cp, 0.0, 1.0), (0.0, 0.2744))


# ---- handle wrench against a 3-D cross-product oracle ----

def _wrench_oracle(F_L, F_R, r_L, r_R):
    total = np.zeros(3)
    for F, r in ((F_L, r_L), (F_R, r_R)):
        total += np.cross([*r, 0.0], [*F, 0.0])
    return F_L[0] + F_R[0], total[2]


def test_handle_wrench_symmetric_push():
    cp = CartParams(d=0.3, l_h=0.5)
    assert handle_wrench(HandleForces.at_handles(cp, (10, 0), (10, 0))) == pytest.approx((20, 0))


def test_handle_wrench_single_handle():
    cp = CartParams(d=0.3, l_h=0.5)
    hf = HandleForces.at_handles(cp, (10, 0), (0, 0))
    expected = _wrench_oracle((10, 0), (0, 0), *cp.handle_positions())
    assert handle_wrench(hf) == pytest.approx(expected)
    assert handle_wrench(hf) == pytest.approx((10, -2.5))


def test_handle_wrench_lateral():
    cp = CartParams(d=0.3)
    assert handle_wrench(HandleForces.at_handles(cp, (0, 5), (0, 5))) == pytest.approx((0, 2 * 0.3 * 5))


@given(st.lists(st.floats(-100, 100), min_size=8, max_size=8))
def test_handle_wrench_matches_cross_product(vals):
    F_L, F_R, r_L, r_R = (tuple(vals[i:i + 2]) for i in range(0, 8, 2))
    got = handle_wrench(HandleForces(F_L, F_R, r_L, r_R))
    np.testing.assert_allclose(got, _wrench_oracle(F_L, F_R, r_L, r_R), atol=1e-9)


def test_handle_wrench_rejects_nan():
    with pytest.raises(ValueError):
        handle_wrench(HandleForces((math.nan, 0), (0, 0), (0.3, 0.25), (0.3, -0.25)))


# ---- forward dynamics ----

def test_acceleration_examples():
    cp = CartParams(m_w=60, I_w=30, mu=0.0)
    assert acceleration(cp, CartState(), (0, 0)) == (0, 0)
    assert acceleration(cp, CartState(), (6, 3)) == pytest.approx((0.1, 0.1))


@settings(max_examples=200)
@given(cart_params(), st.floats(-1, 1), st.floats(-1, 1))
def test_equilibrium_closure(cp, v, w):
    wr = required_wrench(cp, v, w)
    dv, dw = acceleration(cp, CartState(v_x=v, omega=w), wr)
    assert abs(dv) < 1e-12 and abs(dw) < 1e-12


def test_step_rejects_bad_dt():
    with pytest.raises(ValueError):
        step(CartParams(), CartState(), (0, 0), 0.0)
    with pytest.raises(ValueError):
        step(CartParams(), CartState(), (0, 0), -1e-3)


def test_step_rest_and_straight_line():
    cp = CartParams(mu=0.0)
    s0 = CartState(0.4, -0.2, 0.3)
    assert step(cp, s0, (0, 0), 0.5) == s0
    s = step(cp, CartState(v_x=1.0), (0, 0), 0.001)
    assert s.x == pytest.approx(0.001, abs=1e-15)
    assert s.y == 0.0


def test_constant_twist_arc():
    cp = CartParams(p_x=0.1)
    s = CartState(v_x=1.0, omega=1.0)
    wr = required_wrench(cp, 1.0, 1.0)
    for _ in range(1000):
        s = step(cp, s, wr, 0.001)
    assert math.hypot(s.x - math.sin(1.0), s.y - (1 - math.cos(1.0))) < 1e-3
    assert s.theta == pytest.approx(1.0, abs=1e-12)


def test_wrap_angle():
    assert wrap_angle(math.pi) == math.pi
    assert wrap_angle(-math.pi) == math.pi
    assert wrap_angle(3 * math.pi / 2) == pytest.approx(-math.pi / 2)


@settings(max_examples=50)
@given(
    cart_params(),
    st.tuples(st.floats(-5, 5), st.floats(-5, 5), st.floats(-math.pi, math.pi), st.floats(-1, 1), st.floats(-1, 1)),
    st.lists(st.tuples(st.floats(-50, 50), st.floats(-20, 20)), min_size=1, max_size=50),
)
def test_nonholonomic_constraint(cp, s0, wrenches):
    s = CartState(*s0)
    for wr in wrenches:
        n = step(cp, s, wr, 0.001)
        lateral = (-math.sin(s.theta) * (n.x - s.x) + math.cos(s.theta) * (n.y - s.y)) / 0.001
        assert abs(lateral) < 1e-9
        s = n


@settings(max_examples=100)
@given(
    st.floats(5, 150), st.floats(1, 40), st.floats(0, 0.1),
    st.floats(-1, 1), st.floats(-1, 1),
)
def test_zero_input_energy_non_increasing(m, inertia, mu, v, w):
    cp = CartParams(m_w=m, I_w=inertia, mu=mu, matrix_variant="symmetric_reference")
    s = CartState(v_x=v, omega=w)
    e = kinetic_energy(cp, s)
    for _ in range(200):
        s = step(cp, s, (0, 0), 0.001)
        e_new = kinetic_energy(cp, s)
        assert e_new <= e + 1e-12
        e = e_new


@settings(max_examples=100)
@given(cart_params(), st.floats(-1, 1), st.floats(-1, 1), st.floats(-50, 50), st.floats(-20, 20))
def test_variants_agree_without_lateral_offset(cp, v, w, f, tau):
    a = cp.replace(p_y=0.0, matrix_variant="paper_printed")
    b = a.replace(matrix_variant="symmetric_reference")
    s = CartState(v_x=v, omega=w)
    np.testing.assert_allclose(acceleration(a, s, (f, tau)), acceleration(b, s, (f, tau)), rtol=1e-12, atol=1e-12)


def test_step_deterministic():
    cp = CartParams(p_x=0.05, p_y=-0.03)
    runs = []
    for _ in range(2):
        s = CartState(v_x=0.1)
        for k in range(500):
            s = step(cp, s, PlanarWrench(math.sin(k * 0.01), 0.3), 0.001)
        runs.append(s)
    assert runs[0] == runs[1]


def test_param_vector_layout():
    cp = CartParams(m_w=60, p_x=0.1, p_y=0.2, I_w=30, mu=0.01, g=9.8)
    np.testing.assert_allclose(param_vector(cp), [60, 6, 12, 33, 0.01 * 60 * 9.8 / 4])


def test_params_validation():
    with pytest.raises(ValueError):
        CartParams(m_w=0)
    with pytest.raises(ValueError):
        CartParams(mu=-0.1)
    with pytest.raises(ValueError):
        CartParams(matrix_variant="other")


def test_check_param_vector_rejects_nonpositive_inertia():
    with pytest.raises(EstimatorDegenerateError):
        check_param_vector(np.array([60.0, 0.0, 60.0, 30.0, 0.0]))
