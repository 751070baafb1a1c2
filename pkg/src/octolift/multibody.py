"""Euler-Lagrange dynamics of the octocopter with a rigidly attached cubic load.

The inertia matrix only depends on the attitude, so its partial derivatives
(and hence the Christoffel-symbol Coriolis matrix) are written in closed form
from the partials of ``R`` and ``W``.  All dynamics functions broadcast over a
leading batch axis of ``q``/``qdot`` and of the load parameters, which the
filter uses to push every sigma point through the model in one call.
"""
from dataclasses import dataclass, field

import numpy as np

from .kinematics import (euler_rate_matrix, euler_rate_matrix_partials,
                         rotation_zyx, rotation_zyx_partials, skew)

A_Z = np.array([0.0, 0.0, 1.0])

# Table 1 propeller layout: odd props at z=+0.12, even (coaxial partner) at z=-0.17
DEFAULT_PROP_POS = (
    (1.1, 1.1, 0.12), (1.1, 1.1, -0.17),
    (-1.1, 1.1, 0.12), (-1.1, 1.1, -0.17),
    (-1.1, -1.1, 0.12), (-1.1, -1.1, -0.17),
    (1.1, -1.1, 0.12), (1.1, -1.1, -0.17),
)
DEFAULT_SPIN = (1, -1, 1, -1, 1, -1, 1, -1)


class LinearSolveFailure(np.linalg.LinAlgError):
    """The inertia matrix (or a block of it) is numerically singular."""


def _as_tuple3(x):
    return tuple(float(v) for v in np.asarray(x, dtype=float).reshape(3))


@dataclass(frozen=True)
class VehicleParams:
    """Physical constants of the bare octocopter (defaults: Table 1)."""

    m_O: float = 53.09
    I_O: tuple = (18.78, 19.76, 37.87)
    r_O: tuple = (0.0, 0.0, 0.0)
    prop_pos: tuple = DEFAULT_PROP_POS
    spin: tuple = DEFAULT_SPIN
    b: float = 2.85e-5
    k_tau: float = 1.42e-6
    g: float = -9.81
    delta_L: float = 0.2
    varsigma: int = -1

    def __post_init__(self):
        if self.m_O <= 0 or self.b <= 0 or self.k_tau <= 0:
            raise ValueError("m_O, b and k_tau must be positive")
        if len(self.prop_pos) != 8 or len(self.spin) != 8:
            raise ValueError("expected 8 propellers")
        if any(s not in (1, -1) for s in self.spin):
            raise ValueError("spin directions must be +1 or -1")
        if self.varsigma not in (1, -1):
            raise ValueError("varsigma must be +1 or -1")
        if self.delta_L < 0:
            raise ValueError("delta_L must be nonnegative")
        inertia = self.inertia
        if not np.allclose(inertia, inertia.T, atol=1e-12) or np.linalg.eigvalsh(inertia).min() <= 0:
            raise ValueError("I_O must be symmetric positive definite")

    @property
    def k_b(self):
        return self.k_tau / self.b

    @property
    def inertia(self):
        I = np.asarray(self.I_O, dtype=float)
        return np.diag(I) if I.ndim == 1 else I

    @property
    def prop_positions(self):
        return np.asarray(self.prop_pos, dtype=float)

    @property
    def spin_array(self):
        return np.asarray(self.spin, dtype=float)


@dataclass(frozen=True)
class LoadParams:
    """Cubic load of mass ``m_L`` and half edge ``r_L``; fields may be arrays."""

    m_L: object = 0.0
    r_L: object = 0.0

    def inertia(self):
        """Load inertia ``(m_L / 6) r_L^2 I`` about its own COM."""
        m, r = np.asarray(self.m_L, float), np.asarray(self.r_L, float)
        return (m * r ** 2 / 6.0)[..., None, None] * np.eye(3)

    def offset(self, veh):
        """Body-frame COM position ``(0, 0, varsigma (delta_L + r_L))``."""
        r = np.asarray(self.r_L, float)
        z = veh.varsigma * (veh.delta_L + r)
        zero = np.zeros_like(z)
        return np.stack([zero, zero, z], axis=-1)


@dataclass
class GeneralizedState:
    """Generalized coordinates ``q = (xi, eta)`` and their rates."""

    q: np.ndarray = field(default_factory=lambda: np.zeros(6))
    qdot: np.ndarray = field(default_factory=lambda: np.zeros(6))

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float).copy()
        self.qdot = np.asarray(self.qdot, dtype=float).copy()
        if self.q.shape[-1] != 6 or self.qdot.shape[-1] != 6:
            raise ValueError("q and qdot must have 6 components")

    @property
    def xi(self):
        return self.q[..., :3]

    @property
    def eta(self):
        return self.q[..., 3:]

    def as_vector(self):
        return np.concatenate([self.q, self.qdot], axis=-1)


@dataclass
class GeneralizedForces:
    """Propeller thrusts ``tau`` (8) and generalized disturbance ``zeta`` (6)."""

    tau: np.ndarray = field(default_factory=lambda: np.zeros(8))
    zeta: np.ndarray = field(default_factory=lambda: np.zeros(6))


def mass_properties(veh, load):
    """Total mass, first mass moment and body inertia about the body origin."""
    m_L = np.asarray(load.m_L, float)
    r_O = np.asarray(veh.r_O, float)
    p_L = load.offset(veh)
    m = veh.m_O + m_L
    s = veh.m_O * r_O + m_L[..., None] * p_L
    S_O, S_L = skew(r_O), skew(p_L)
    J = (veh.inertia + load.inertia() - veh.m_O * S_O @ S_O
         - m_L[..., None, None] * (S_L @ S_L))
    return m, s, J


def _mass_matrix(eta, m, s, J):
    R, W = rotation_zyx(eta), euler_rate_matrix(eta)
    lead = np.broadcast_shapes(R.shape[:-2], np.shape(m))
    M = np.zeros(lead + (6, 6))
    M[..., :3, :3] = np.asarray(m)[..., None, None] * np.eye(3)
    M12 = -R @ skew(s) @ W
    M[..., :3, 3:] = M12
    M[..., 3:, :3] = np.swapaxes(M12, -1, -2)
    M[..., 3:, 3:] = np.swapaxes(W, -1, -2) @ J @ W
    return M


def _mass_matrix_partials(eta, s, J):
    """``dM/dq_i`` for i = 0..5 stacked on axis -3 (translational slices are zero)."""
    R, W = rotation_zyx(eta), euler_rate_matrix(eta)
    dR, dW = rotation_zyx_partials(eta), euler_rate_matrix_partials(eta)
    S = skew(s)[..., None, :, :]
    J = np.asarray(J)[..., None, :, :]
    R_, W_ = R[..., None, :, :], W[..., None, :, :]
    d12 = -(dR @ S @ W_ + R_ @ S @ dW)
    d22 = np.swapaxes(dW, -1, -2) @ J @ W_
    d22 = d22 + np.swapaxes(d22, -1, -2)
    lead = d12.shape[:-3]
    D = np.zeros(lead + (6, 6, 6))
    D[..., 3:, :3, 3:] = d12
    D[..., 3:, 3:, :3] = np.swapaxes(d12, -1, -2)
    D[..., 3:, 3:, 3:] = d22
    return D


def _coriolis(eta, qdot, s, J):
    # c_kj = sum_i 1/2 (dM_kj/dq_i + dM_ki/dq_j - dM_ij/dq_k) qdot_i
    D = _mass_matrix_partials(eta, s, J)
    t1 = np.einsum('...i,...ikj->...kj', qdot, D)
    Dq = np.einsum('...jki,...i->...kj', D, qdot)
    return 0.5 * (t1 + Dq - np.swapaxes(Dq, -1, -2))


def _gravity(eta, m, s, g):
    dR = rotation_zyx_partials(eta)
    rot = -g * np.einsum('...ij,...j->...i', dR[..., 2, :], np.broadcast_to(s, dR.shape[:-3] + (3,)))
    lead = rot.shape[:-1]
    trans = np.zeros(lead + (3,))
    trans[..., 2] = -np.broadcast_to(m, lead) * g
    return np.concatenate([trans, rot], axis=-1)


def _input_matrix(eta, veh):
    R, W = rotation_zyx(eta), euler_rate_matrix(eta)
    moment_arms = np.cross(veh.prop_positions, A_Z) + (veh.spin_array * veh.k_b)[:, None] * A_Z
    top = np.repeat((R @ A_Z)[..., :, None], 8, axis=-1)
    bottom = np.swapaxes(W, -1, -2) @ moment_arms.T
    return np.concatenate([top, bottom], axis=-2)


def _q(state_or_q):
    return state_or_q.q if isinstance(state_or_q, GeneralizedState) else np.asarray(state_or_q, float)


def mass_matrix(q, veh, load):
    """Inertia matrix ``M(q)`` (6x6, symmetric positive definite)."""
    m, s, J = mass_properties(veh, load)
    return _mass_matrix(_q(q)[..., 3:], m, s, J)


def mass_matrix_partials(q, veh, load):
    """Closed-form ``dM/dq_i``, shape ``(..., 6, 6, 6)`` indexed ``[i, k, j]``."""
    _, s, J = mass_properties(veh, load)
    return _mass_matrix_partials(_q(q)[..., 3:], s, J)


def coriolis_matrix(q, qdot, veh, load):
    """Coriolis/centripetal matrix from Christoffel symbols of the first kind."""
    _, s, J = mass_properties(veh, load)
    return _coriolis(_q(q)[..., 3:], np.asarray(qdot, float), s, J)


def potential_energy(q, veh, load):
    """``P(q) = -sum_i m_i g_r . p_i`` with ``g_r = (0, 0, g)``."""
    m, s, _ = mass_properties(veh, load)
    q = _q(q)
    R = rotation_zyx(q[..., 3:])
    return -veh.g * (np.asarray(m) * q[..., 2] + np.einsum('...j,...j->...', R[..., 2, :], s))


def gravity_vector(q, veh, load):
    """Gradient of :func:`potential_energy`."""
    m, s, _ = mass_properties(veh, load)
    return _gravity(_q(q)[..., 3:], m, s, veh.g)


def input_matrix(q, veh):
    """Generalized input matrix ``B(q)`` (6x8); column p maps thrust ``f_p``."""
    return _input_matrix(_q(q)[..., 3:], veh)


def propeller_thrust(omega, veh):
    """Thrust ``b omega^2`` in newtons."""
    return veh.b * np.square(omega)


def propeller_torque(omega, p, veh):
    """Reaction torque ``lambda_p k_tau omega^2`` of propeller ``p`` (0-based)."""
    return veh.spin[p] * veh.k_tau * np.square(omega)


def solve_spd(M, rhs):
    """Solve ``M x = rhs`` for a batch of inertia-like matrices."""
    try:
        x = np.linalg.solve(M, np.asarray(rhs)[..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        raise LinearSolveFailure(str(exc)) from exc
    if not np.all(np.isfinite(x)):
        raise LinearSolveFailure("non-finite solution (singular inertia matrix)")
    return x


def generalized_acceleration(q, qdot, generalized_input, veh, load):
    """``M^-1 (F - C qdot - g)`` for an arbitrary generalized force ``F``.

    Batched over any leading shape; shared by the truth integrator and the
    filter's process model.
    """
    q, qdot = np.asarray(q, float), np.asarray(qdot, float)
    m, s, J = mass_properties(veh, load)
    eta = q[..., 3:]
    M = _mass_matrix(eta, m, s, J)
    C = _coriolis(eta, qdot, s, J)
    rhs = (generalized_input - np.einsum('...ij,...j->...i', C, qdot)
           - _gravity(eta, m, s, veh.g))
    return solve_spd(M, rhs)


def forward_dynamics(state, forces, veh, load):
    """Generalized acceleration ``q_ddot = M^-1 (B tau + zeta - C qdot - g)``."""
    q, qdot = state.q, state.qdot
    F = input_matrix(q, veh) @ np.asarray(forces.tau, float) + np.asarray(forces.zeta, float)
    return generalized_acceleration(q, qdot, F, veh, load)
