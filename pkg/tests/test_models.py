import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyprom.models import (Burgers, Euler, NonPhysicalStateError, ParameterDomain, conservative_to_primitive,
                           make_model, minmod, numerical_flux, physical_flux, primitive_to_conservative,
                           rankine_hugoniot_speed)

finite = st.floats(-5, 5, allow_nan=False)


def test_minmod_table():
    assert minmod(1.0, 2.0) == 1.0
    assert minmod(-3.0, -1.0) == -1.0
    assert minmod(1.0, -1.0) == 0.0
    assert minmod(0.0, 5.0) == 0.0


@given(finite, finite, st.floats(0.5, 2.0))
def test_burgers_roe_consistency_and_upwinding(a, b, y3):
    m = Burgers()
    mu = [0.4, 1.0, y3]
    assert numerical_flux(m, [a], [a], mu)[0] == pytest.approx(0.5 * y3 * a * a, rel=1e-14, abs=1e-14)
    F = numerical_flux(m, [a], [b], mu)[0]
    # Roe: upwind physical flux picked by the sign of the Roe speed
    speed = y3 * (a + b) / 2
    expect = 0.5 * y3 * (a * a if speed >= 0 else b * b)
    assert F == pytest.approx(expect, rel=1e-12, abs=1e-12)


def test_burgers_roe_speed_equals_divided_difference():
    m = Burgers()
    uL, uR, y3 = 1.7, 0.3, 1.1
    f = lambda u: 0.5 * y3 * u * u
    a = (f(uL) - f(uR)) / (uL - uR)
    assert a == pytest.approx(y3 * 0.5 * (uL + uR))
    assert rankine_hugoniot_speed(uL, uR, y3) == pytest.approx(a)


def test_burgers_initial_condition_and_flux():
    m = Burgers()
    x = np.linspace(0, np.pi, 7)
    u0 = m.initial_condition(x, [0.4, 1.0, 1.0])
    assert np.allclose(u0[0], np.abs(np.sin(2 * x + 0.4)) + 0.1)
    assert physical_flux(m, [2.0], [0.4, 1.0, 1.0])[0] == pytest.approx(2.0)


def test_euler_rusanov_consistency():
    m = Euler("sod")
    U = primitive_to_conservative(np.array([[1.0], [0.3], [1.0]]), 1.4)[:, 0]
    mu = [0.0, 1.4]
    assert np.allclose(numerical_flux(m, U, U, mu), physical_flux(m, U, mu), rtol=1e-14)


def test_euler_physical_flux_hand_value():
    # rho=1, u=2, p=1, gamma=1.4: E = 1/0.4 + 2 = 4.5
    U = np.array([1.0, 2.0, 4.5])
    f = physical_flux(Euler("sod"), U, [0.0, 1.4])
    assert np.allclose(f, [2.0, 5.0, 11.0])


@given(st.floats(0.1, 5), st.floats(-3, 3), st.floats(0.1, 5), st.floats(1.1, 1.9))
@settings(max_examples=50)
def test_primitive_roundtrip(rho, u, p, g):
    w = np.array([[rho], [u], [p]])
    assert np.allclose(conservative_to_primitive(primitive_to_conservative(w, g), g), w, rtol=1e-12)


@given(st.floats(0.1, 5), st.floats(-3, 3), st.floats(0.1, 5), st.floats(1.1, 1.9))
@settings(max_examples=50)
def test_eigenvectors_are_inverse(rho, u, p, g):
    U = primitive_to_conservative(np.array([rho, u, p]), g)
    L, R = Euler("sod").eigenvectors(U, g)
    assert np.allclose(np.array(L, dtype=float) @ np.array(R, dtype=float), np.eye(3), atol=1e-10)


def test_euler_nonphysical_state_reports_dof():
    m = Euler("sod")
    U = np.array([[1.0, -1.0], [0.0, 0.0], [2.5, 2.5]])
    with pytest.raises(NonPhysicalStateError) as info:
        m.point_data(U, [0.0, 1.4], cells=np.array([7, 8]))
    assert info.value.dof == 8


def test_sod_initial_data():
    m = make_model("euler1d_sod")
    x = np.array([-0.5, 0.5])
    rho, u, p = conservative_to_primitive(m.initial_condition(x, [0.01, 1.4]), 1.4)
    assert np.allclose(rho, [1.0, 0.135]) and np.allclose(u, 0) and np.allclose(p, [1.0, 0.1])


def test_smooth_euler_initial_data():
    m = make_model("euler1d_smooth", gamma=1.4)
    x = np.linspace(-1, 1, 9)
    U = m.initial_condition(x, [0.45, 1.4])
    rho = 2 + np.sin(30 * 0.45) * np.sin(np.pi * (x - 1) + 0.45)
    assert np.allclose(U[0], rho) and np.allclose(U[1], 0) and np.allclose(U[2], rho ** 1.4)


def test_spectral_bounds():
    dom = ParameterDomain.from_intervals([(0.4, 0.5), (1.0, 1.0), (1.0, 1.2)])
    assert Burgers().spectral_radius_bound(dom) == pytest.approx(1.2 * 2.5)
    e = Euler("sod")
    box = {"rho": (1.0, 1.0), "u": (0.0, 0.0), "p": (1.4, 1.4)}
    d2 = ParameterDomain.from_intervals([(0, 0), (1.4, 1.4)])
    assert e.spectral_radius_bound(d2, box) == pytest.approx(np.sqrt(1.4 * 1.4))
    with pytest.raises(ValueError):
        e.spectral_radius_bound(d2)


def test_make_model_rejects_unknown():
    with pytest.raises(ValueError):
        make_model("euler1d")


def test_domain_contains():
    dom = ParameterDomain.from_intervals([(0.4, 0.5)])
    assert dom.contains([0.45]) and not dom.contains([0.6])
