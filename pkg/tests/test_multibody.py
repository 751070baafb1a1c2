import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_states
from octolift.kinematics import angular_jacobian, linear_jacobian, rotation_zyx, skew
from octolift.multibody import (GeneralizedForces, GeneralizedState, LinearSolveFailure,
                                LoadParams, VehicleParams, coriolis_matrix, forward_dynamics,
                                generalized_acceleration, gravity_vector, input_matrix,
                                mass_matrix, mass_matrix_partials, potential_energy,
                                propeller_thrust, propeller_torque, solve_spd)


def assembled_mass_matrix(q, veh, load):
    """Kinetic-energy Hessian summed over the two bodies from point Jacobians."""
    eta = q[3:]
    R = rotation_zyx(eta)
    Jw = angular_jacobian(eta)
    M = np.zeros((6, 6))
    bodies = [(veh.m_O, np.asarray(veh.r_O, float), veh.inertia),
              (float(load.m_L), load.offset(veh), load.inertia())]
    for m, r, I in bodies:
        Jv = linear_jacobian(eta, r)
        M += m * Jv.T @ Jv + Jw.T @ R @ I @ R.T @ Jw
    return M


def test_table_values(veh):
    assert veh.m_O == 53.09
    assert np.array_equal(veh.inertia, np.diag([18.78, 19.76, 37.87]))
    assert abs(veh.k_b - 1.42e-6 / 2.85e-5) < 1e-12
    assert veh.prop_positions.shape == (8, 3)


def test_bare_vehicle_mass_matrix_at_level(veh):
    M = mass_matrix(np.zeros(6), veh, LoadParams(0.0, 0.3))
    assert np.allclose(M, np.block([[53.09 * np.eye(3), np.zeros((3, 3))],
                                    [np.zeros((3, 3)), veh.inertia]]), atol=1e-14)


def test_translational_block_is_total_mass(veh, load):
    rng = np.random.default_rng(0)
    q, *_ = random_states(rng, 20)
    M = mass_matrix(q, veh, load)
    assert np.allclose(M[:, :3, :3], 153.09 * np.eye(3), atol=1e-12)


def test_mass_matrix_symmetric_pd_over_random_states(veh):
    rng = np.random.default_rng(1)
    q, _, mL, rL = random_states(rng, 1000)
    M = mass_matrix(q, veh, LoadParams(mL, rL))
    assert np.max(np.abs(M - np.swapaxes(M, -1, -2))) <= 1e-12
    assert np.linalg.eigvalsh(M).min() > 0


def test_mass_matrix_matches_jacobian_assembly(veh):
    rng = np.random.default_rng(2)
    q, _, mL, rL = random_states(rng, 200)
    r_O = (0.01, -0.02, 0.05)
    for v in (veh, dataclasses.replace(veh, r_O=r_O)):
        for k in range(len(q)):
            load = LoadParams(mL[k], rL[k])
            assert np.allclose(mass_matrix(q[k], v, load), assembled_mass_matrix(q[k], v, load),
                               rtol=0, atol=1e-10)


def test_mass_partials_against_central_differences(veh, load):
    rng = np.random.default_rng(3)
    h = 1e-6
    for q in random_states(rng, 10)[0]:
        D = mass_matrix_partials(q, veh, load)
        for i in range(6):
            e = np.zeros(6)
            e[i] = h
            fd = (mass_matrix(q + e, veh, load) - mass_matrix(q - e, veh, load)) / (2 * h)
            assert np.allclose(D[i], fd, atol=1e-6)
        assert np.all(D[:3] == 0)


def test_coriolis_vanishes_without_velocity_and_for_translation(veh, load):
    q = np.array([1.0, 2.0, 3.0, 0.2, -0.3, 0.4])
    assert np.all(coriolis_matrix(q, np.zeros(6), veh, load) == 0)
    qdot = np.array([1.0, -2.0, 0.5, 0, 0, 0])
    assert np.allclose(coriolis_matrix(q, qdot, veh, load) @ qdot, 0, atol=1e-12)


def test_mdot_minus_2c_is_skew(veh):
    rng = np.random.default_rng(4)
    q, qdot, mL, rL = random_states(rng, 100)
    h = 1e-6
    worst = 0.0
    for k in range(100):
        load = LoadParams(mL[k], rL[k])
        Mdot = (mass_matrix(q[k] + h * qdot[k], veh, load)
                - mass_matrix(q[k] - h * qdot[k], veh, load)) / (2 * h)
        N = Mdot - 2 * coriolis_matrix(q[k], qdot[k], veh, load)
        worst = max(worst, np.max(np.abs(N + N.T)))
        assert abs(qdot[k] @ N @ qdot[k]) <= 1e-5
    assert worst <= 1e-5


def test_gravity_is_potential_gradient(veh):
    rng = np.random.default_rng(5)
    q, _, mL, rL = random_states(rng, 100)
    h = 1e-6
    for k in range(100):
        load = LoadParams(mL[k], rL[k])
        fd = np.array([(potential_energy(q[k] + h * e, veh, load)
                        - potential_energy(q[k] - h * e, veh, load)) / (2 * h) for e in np.eye(6)])
        assert np.allclose(gravity_vector(q[k], veh, load), fd, rtol=0, atol=1e-5)


def test_gravity_special_cases(veh, load):
    g = gravity_vector(np.zeros(6), veh, load)
    assert np.allclose(g[3:5], 0, atol=1e-12)
    assert np.isclose(g[2], 153.09 * 9.81)
    g0 = gravity_vector([1, 2, 3, 0.4, -0.2, 1.0], veh, LoadParams(0.0, 0.0))
    assert np.allclose(g0, [0, 0, 53.09 * 9.81, 0, 0, 0], atol=1e-12)


def test_input_matrix_at_level(veh):
    B = input_matrix(np.zeros(6), veh)
    assert np.allclose(B[:3], np.tile([[0], [0], [1]], 8))
    pos = veh.prop_positions
    assert np.allclose(B[3], pos[:, 1])
    assert np.allclose(B[4], -pos[:, 0])
    assert np.allclose(B[5], veh.spin_array * veh.k_b)
    tau = np.full(8, 150.0)
    assert np.allclose((B @ tau)[3:], 0, atol=1e-12)


@settings(max_examples=50)
@given(st.lists(st.floats(-1.2, 1.2), min_size=3, max_size=3),
       st.lists(st.floats(0, 300), min_size=8, max_size=8))
def test_translational_input_is_total_thrust_along_body_z(eta, tau):
    veh = VehicleParams()
    B = input_matrix(np.concatenate([np.zeros(3), eta]), veh)
    assert np.allclose(B[:3] @ tau, rotation_zyx(eta)[:, 2] * np.sum(tau), atol=1e-9)


def test_propeller_relations(veh):
    assert propeller_thrust(0.0, veh) == 0
    assert np.isclose(propeller_thrust(1000.0, veh), 28.5)
    f = propeller_thrust(700.0, veh)
    assert np.isclose(propeller_torque(700.0, 1, veh), -veh.k_b * f)
    assert np.isclose(propeller_torque(700.0, 0, veh), veh.k_b * f)


def test_free_fall(veh, load):
    for eta in ([0, 0, 0], [0.3, -0.2, 1.0]):
        state = GeneralizedState(np.concatenate([[1, 2, 3], eta]), np.zeros(6))
        qdd = forward_dynamics(state, GeneralizedForces(), veh, load)
        assert np.allclose(qdd, [0, 0, -9.81, 0, 0, 0], atol=1e-12)


def test_hover_is_equilibrium(veh, load):
    tau = np.full(8, 153.09 * 9.81 / 8)
    qdd = forward_dynamics(GeneralizedState(np.zeros(6), np.zeros(6)),
                           GeneralizedForces(tau, np.zeros(6)), veh, load)
    assert np.allclose(qdd, 0, atol=1e-12)


def test_energy_rate_equals_input_power(veh):
    rng = np.random.default_rng(6)
    q, qdot, mL, rL = random_states(rng, 50)
    h = 1e-5
    for k in range(50):
        load = LoadParams(mL[k], rL[k])
        tau, zeta = rng.uniform(0, 300, 8), rng.normal(0, 20, 6)
        F = input_matrix(q[k], veh) @ tau + zeta
        qdd = generalized_acceleration(q[k], qdot[k], F, veh, load)

        def energy(s):
            qq, vv = q[k] + s * qdot[k] + 0.5 * s * s * qdd, qdot[k] + s * qdd
            return 0.5 * vv @ mass_matrix(qq, veh, load) @ vv + potential_energy(qq, veh, load)

        rate = (energy(h) - energy(-h)) / (2 * h)
        assert abs(rate - qdot[k] @ F) <= 1e-4 * max(1.0, abs(qdot[k] @ F))


def test_load_free_reduction(veh):
    rng = np.random.default_rng(7)
    q, qdot, *_ = random_states(rng, 10)
    tau = np.full(8, 60.0)
    for r in (0.0, 0.7, 1.5):
        a = LoadParams(0.0, r)
        for k in range(10):
            F = input_matrix(q[k], veh) @ tau
            ref = generalized_acceleration(q[k], qdot[k], F, veh, LoadParams(0.0, 0.0))
            assert np.array_equal(generalized_acceleration(q[k], qdot[k], F, veh, a), ref)


def test_singular_inertia_raises():
    with pytest.raises(LinearSolveFailure):
        solve_spd(np.zeros((6, 6)), np.ones(6))


def test_invalid_vehicle_params():
    with pytest.raises(ValueError):
        VehicleParams(m_O=-1.0)
    with pytest.raises(ValueError):
        VehicleParams(spin=(1, 1, 1, 1, 1, 1, 1, 2))
