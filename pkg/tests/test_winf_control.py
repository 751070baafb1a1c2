import logging

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from conftest import random_states
from octolift.multibody import LoadParams, generalized_acceleration, input_matrix, mass_matrix
from octolift.winf_control import (ATTITUDE_WEIGHTS, COAXIAL_PAIRS, SPIN_MATCHED_PAIRS,
                                   TRANSLATION_WEIGHTS, AllocationDomainError, CascadeController,
                                   KktSingular, LoopDesign, ReferenceSignal, WeightSet,
                                   attitude_allocation, build_care_matrices, care_residual,
                                   input_maps, pairing_constraints, rotational_control,
                                   schur_terms, solve_care, thrust_allocation, thrust_direction,
                                   translational_control, worst_case_disturbance)

HOVER = 153.09 * 9.81


def scipy_care(A, B, Psi):
    # same equation written for scipy: A'X + XA - X G R^-1 G' X + Psi = 0 with G R^-1 G' = B
    n = A.shape[0] // 3
    G = np.vstack([np.zeros((2 * n, n)), np.eye(n)])
    R = np.linalg.inv(B[2 * n:, 2 * n:])
    return scipy.linalg.solve_continuous_are(A, G, Psi, R)


def at_rest_reference(q):
    return ReferenceSignal(pos=np.asarray(q[:3], float), vel=np.zeros(3), acc=np.zeros(3))


def test_care_matrix_structure():
    A, B, Psi = build_care_matrices(TRANSLATION_WEIGHTS)
    A2 = A @ A
    assert np.array_equal(A2[:3, 6:], np.eye(3))
    A2[:3, 6:] = 0
    assert not A2.any()
    assert not (A2 @ A).any() and not (A @ A @ A).any()
    assert np.allclose(np.diag(Psi), [5, 5, 10, 10, 10, 50, 1, 1, 1])
    assert np.allclose(B[6:, 6:], np.diag([1 / 6, 1 / 6, 1]))
    assert not B[:6].any()
    _, B1, _ = build_care_matrices(WeightSet((1,) * 3, (1,) * 3, (1,) * 3, (1,) * 3))
    assert np.array_equal(B1, scipy.linalg.block_diag(np.zeros((6, 6)), np.eye(3)))


def test_scalar_triple_integrator():
    A = np.diag([1.0, 1.0], 1)
    B = np.diag([0.0, 0.0, 1.0])
    sol = solve_care(A, B, np.eye(3))
    assert sol.residual_norm <= 1e-10
    assert np.all(sol.closed_loop_eigs.real < 0)
    ref = scipy.linalg.solve_continuous_are(A, np.array([[0], [0], [1.0]]), np.eye(3), np.eye(1))
    assert np.allclose(sol.Q, ref, atol=1e-10)


@pytest.mark.parametrize("w", [TRANSLATION_WEIGHTS, ATTITUDE_WEIGHTS])
def test_published_weight_sets(w):
    A, B, Psi = build_care_matrices(w)
    sol = solve_care(A, B, Psi)
    assert sol.residual_norm <= 1e-8
    assert np.allclose(sol.Q, sol.Q.T, atol=1e-10)
    assert np.linalg.eigvalsh(sol.Q).min() > 0
    assert sol.closed_loop_eigs.real.max() < 0
    assert np.allclose(sol.Q, scipy_care(A, B, Psi), rtol=1e-9, atol=1e-9)


def test_random_weight_sets():
    rng = np.random.default_rng(0)
    for _ in range(50):
        w = WeightSet(*(tuple(rng.uniform(0.01, 100, 3)) for _ in range(4)))
        A, B, Psi = build_care_matrices(w)
        sol = solve_care(A, B, Psi)
        assert sol.residual_norm <= 1e-8
        assert np.linalg.eigvalsh(sol.Q).min() > 0
        assert np.all(sol.closed_loop_eigs.real < 0)
        ref = scipy_care(A, B, Psi)
        assert np.allclose(sol.Q, ref, rtol=1e-7, atol=1e-8 * np.abs(ref).max())


@pytest.mark.parametrize("s", [0.1, 3.0, 20.0])
def test_scaled_state_weight_resolves(s):
    A, B, Psi = build_care_matrices(ATTITUDE_WEIGHTS)
    sol = solve_care(A, B, s ** 2 * Psi)
    assert np.linalg.norm(care_residual(sol.Q, A, B, s ** 2 * Psi)) <= 1e-8


def test_gain_is_last_block_row():
    d = LoopDesign.from_weights(TRANSLATION_WEIGHTS)
    assert np.allclose(d.gain, np.diag([1 / 6, 1 / 6, 1]) @ d.solution.Q[6:])
    chi = np.arange(9.0)
    assert np.isclose(d.value(chi), 0.5 * chi @ d.solution.Q @ chi)


def test_worst_case_disturbance_is_zero(veh, load):
    M = mass_matrix(np.array([0, 0, 0, 0.1, -0.2, 0.3]), veh, load)[:3, :3]
    G, K = input_maps(M)
    assert not (K - G).any()
    Q = LoopDesign.from_weights(TRANSLATION_WEIGHTS).solution.Q
    assert not worst_case_disturbance(G, K, Q, np.ones(9), gamma=10.0).any()


def test_hover_gravity_compensation(veh, load):
    q = np.array([1.0, -2.0, 5.0, 0, 0, 0])
    d = LoopDesign.from_weights(TRANSLATION_WEIGHTS)
    u = translational_control(np.zeros(9), q, np.zeros(6), at_rest_reference(q), d, veh, load)
    assert np.allclose(u, [0, 0, HOVER], atol=1e-9)


def test_position_error_gives_restoring_force(veh, load):
    q = np.array([0.1, 0, 5.0, 0, 0, 0])
    d = LoopDesign.from_weights(TRANSLATION_WEIGHTS)
    ref = ReferenceSignal(pos=np.array([0, 0, 5.0]), vel=np.zeros(3), acc=np.zeros(3))
    chi = np.concatenate([np.zeros(3), q[:3] - ref.pos, np.zeros(3)])
    u = translational_control(chi, q, np.zeros(6), ref, d, veh, load)
    assert u[0] < 0 and abs(u[1]) < 1e-9


def test_translational_substitution_oracle(veh):
    rng = np.random.default_rng(1)
    q, qdot, mL, rL = random_states(rng, 20, tilt=0.6)
    d = LoopDesign.from_weights(TRANSLATION_WEIGHTS)
    for k in range(20):
        load = LoadParams(mL[k], rL[k])
        ref = ReferenceSignal(*(rng.normal(size=3) for _ in range(3)))
        chi, eta_dd = rng.normal(size=9), rng.normal(size=3)
        u = translational_control(chi, q[k], qdot[k], ref, d, veh, load, eta_ddot=eta_dd)
        # full dynamics with translational force u plus the rotational force
        # f_r that makes the attitude acceleration equal eta_dd
        acc0 = generalized_acceleration(q[k], qdot[k], np.concatenate([u, np.zeros(3)]), veh, load)
        Minv = np.linalg.inv(mass_matrix(q[k], veh, load))
        f_r = np.linalg.solve(Minv[3:, 3:], eta_dd - acc0[3:])
        acc = acc0 + Minv[:, 3:] @ f_r
        assert np.allclose(acc[3:], eta_dd, atol=1e-9)
        assert np.allclose(acc[:3] - ref.acc, -d.gain @ chi, atol=1e-8)


def test_rotational_substitution_oracle(veh):
    rng = np.random.default_rng(2)
    q, qdot, mL, rL = random_states(rng, 20, tilt=0.4)
    d = LoopDesign.from_weights(ATTITUDE_WEIGHTS)
    for k in range(20):
        load = LoadParams(mL[k], rL[k])
        ref = ReferenceSignal(np.zeros(3), np.zeros(3), np.zeros(3), psi=0.2,
                              psi_dot=rng.normal(), psi_ddot=rng.normal())
        x = 0.01 * rng.normal(size=9)
        terms = schur_terms(q[k], qdot[k], veh, load)
        u_bar = rotational_control(x, q[k], qdot[k], ref, d, veh, load, terms)
        tau = thrust_allocation(u_bar, 3000.0, terms.B_bar)
        assert np.linalg.norm(terms.B_bar @ tau - u_bar) <= 1e-9
        acc = generalized_acceleration(q[k], qdot[k], input_matrix(q[k], veh) @ tau, veh, load)
        want = -d.gain @ x + np.array([0, 0, ref.psi_ddot])
        assert np.allclose(acc[3:], want, atol=1e-8)


def test_rotational_command_zero_at_symmetric_rest(veh, load):
    q = np.zeros(6)
    u = rotational_control(np.zeros(9), q, np.zeros(6), at_rest_reference(q),
                           LoopDesign.from_weights(ATTITUDE_WEIGHTS), veh, load)
    assert np.allclose(u, 0, atol=1e-12)


def test_schur_terms_degenerate_without_coupling(veh):
    load = LoadParams(0.0, 0.0)
    q, qdot = np.zeros(6), np.array([0.3, -0.1, 0.2, 0.5, 0.4, -0.2])
    t = schur_terms(q, qdot, veh, load)
    M = mass_matrix(q, veh, load)
    assert np.allclose(t.M_bar, M[3:, 3:], atol=1e-12)
    assert np.allclose(t.B_bar, input_matrix(q, veh)[3:], atol=1e-12)


def test_attitude_allocation_examples():
    assert np.allclose(attitude_allocation([0, 0, 1500.0], 0.0, 0.0), (1500.0, 0, 0))
    phi_r, theta_r, f = 0.1, -0.05, 1500.0
    u = f * thrust_direction(phi_r, theta_r)
    got = attitude_allocation(u, phi_r, theta_r)
    assert np.allclose(got, (f, phi_r, theta_r), rtol=0, atol=1e-9)


@pytest.mark.parametrize("u, phi, theta", [([0, 2000.0, 1000.0], 0, 0),
                                           ([0, 0, -10.0], 0, 0),
                                           ([2000.0, 0, 1000.0], 0, 0),
                                           ([0, 0, 1000.0], 0, np.pi / 2)])
def test_attitude_allocation_domain_errors(u, phi, theta):
    with pytest.raises(AllocationDomainError):
        attitude_allocation(u, phi, theta)


@settings(max_examples=100)
@given(st.floats(10, 3000), st.floats(-0.6, 0.6), st.floats(-0.6, 0.6),
       st.floats(-0.6, 0.6), st.floats(-0.6, 0.6), st.floats(0.1, 10))
def test_allocation_scaling_invariance(f, phi_r, theta_r, phi, theta, s):
    u = np.array([f * np.cos(phi_r) * np.sin(theta_r), -f * np.sin(phi_r),
                  f * np.cos(phi) * np.cos(theta)])
    f1, a1, b1 = attitude_allocation(u, phi, theta)
    f2, a2, b2 = attitude_allocation(s * u, phi, theta)
    assert np.isclose(f2, s * f1, rtol=1e-12)
    assert abs(a1 - a2) < 1e-12 and abs(b1 - b2) < 1e-12


def test_uniform_split_for_zero_moment(veh, load):
    t = schur_terms(np.zeros(6), np.zeros(6), veh, load)
    tau = thrust_allocation(np.zeros(3), 1600.0, t.B_bar)
    assert np.allclose(tau, 200.0, atol=1e-10)


def test_kkt_forward_generate(veh):
    rng = np.random.default_rng(3)
    q, qdot, mL, rL = random_states(rng, 50, tilt=0.6)
    for k in range(50):
        B_bar = schur_terms(q[k], qdot[k], veh, LoadParams(mL[k], rL[k])).B_bar
        tau0 = rng.uniform(20, 300, 8)
        for i, j in SPIN_MATCHED_PAIRS:
            tau0[j] = tau0[i]
        tau = thrust_allocation(B_bar @ tau0, tau0.sum(), B_bar)
        C, d = pairing_constraints(tau0.sum())
        assert np.max(np.abs(C @ tau - d)) <= 1e-12
        assert np.linalg.norm(B_bar @ tau - B_bar @ tau0) <= 1e-9
        assert np.allclose(tau, tau0, atol=1e-9)


def test_coaxial_pairing_is_singular(veh, load):
    # counter-rotating coaxial pairs cancel yaw torque: yaw is unreachable
    B_bar = schur_terms(np.zeros(6), np.zeros(6), veh, load).B_bar
    with pytest.raises(KktSingular):
        thrust_allocation(np.zeros(3), 1500.0, B_bar, COAXIAL_PAIRS)


def test_negative_thrust_is_logged(veh, load, caplog):
    B_bar = schur_terms(np.zeros(6), np.zeros(6), veh, load).B_bar
    with caplog.at_level(logging.WARNING):
        tau = thrust_allocation(np.array([0, 0, 50.0]), 100.0, B_bar)
    assert np.any(tau < 0)
    assert "negative thrust" in caplog.text


def test_cascade_hover(veh, load):
    q = np.array([0, 0, 5.0, 0, 0, 0])
    ctrl = CascadeController(LoopDesign.from_weights(TRANSLATION_WEIGHTS),
                             LoopDesign.from_weights(ATTITUDE_WEIGHTS), veh, 0.01)
    out = ctrl.step(q, np.zeros(6), load, at_rest_reference(q))
    assert np.allclose(out.tau, HOVER / 8, atol=1e-9)
    assert out.phi_r == 0 and out.theta_r == 0
    assert out.V_c == 0 and out.V_r == 0


def test_cascade_first_step_from_initial_condition(veh, load):
    q0 = np.array([1.9, 0, 0.8, 0, 0, np.pi / 6])
    ctrl = CascadeController(LoopDesign.from_weights(TRANSLATION_WEIGHTS),
                             LoopDesign.from_weights(ATTITUDE_WEIGHTS), veh, 0.01)
    ref = ReferenceSignal(np.array([2.0, 0, 1.0]), np.array([0, 0.314159, 0]), np.zeros(3))
    out = ctrl.step(q0, np.zeros(6), load, ref)
    assert np.all(np.isfinite(out.tau))
    assert out.alloc_residual <= 1e-9
    assert np.allclose(ctrl.int_c, 0.01 * (q0[:3] - ref.pos))
    ctrl.reset()
    assert not ctrl.int_c.any() and not ctrl.int_r.any()
