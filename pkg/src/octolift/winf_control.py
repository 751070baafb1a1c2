"""Nonlinear W-infinity tracking control for the octocopter with load.

Synthesis reduces to one structured continuous-time algebraic Riccati
equation per DOF group (translation and attitude).  At run time the cascade is

    translational_control -> attitude_allocation -> rotational_control
    -> thrust_allocation

driven by a :class:`CascadeController` that owns the two integral states.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .kinematics import rotation_zyx
from .multibody import (coriolis_matrix, gravity_vector, input_matrix,
                        mass_matrix, solve_spd)

log = logging.getLogger(__name__)

# Pairings (0-based) imposed as f_i - f_j = 0 in the thrust allocation.
# COAXIAL pairs each counter-rotating top/bottom pair on one arm; their reaction
# torques cancel, so the body yaw moment is identically zero and the
# allocation is singular.  SPIN_MATCHED pairs equal-spin props on adjacent arms,
# which keeps roll, pitch and yaw independently reachable.
COAXIAL_PAIRS = ((0, 1), (2, 3), (4, 5), (6, 7))
SPIN_MATCHED_PAIRS = ((0, 2), (4, 6), (1, 7), (3, 5))

KKT_COND_LIMIT = 1e12


class SolveFailure(RuntimeError):
    """The Riccati solver did not produce a stabilizing positive definite solution."""


class AllocationDomainError(ValueError):
    """The commanded force cannot be realized by a thrust magnitude and tilt."""


class KktSingular(np.linalg.LinAlgError):
    """The thrust-allocation KKT matrix is numerically singular."""


def _diag3(v):
    a = np.asarray(v, dtype=float)
    return np.diag(a) if a.ndim == 1 else a


@dataclass(frozen=True)
class WeightSet:
    """Diagonal weights ``(Y0, Y1, Y2, Y3)`` of the Sobolev-type cost."""

    Y0: tuple
    Y1: tuple
    Y2: tuple
    Y3: tuple

    def __post_init__(self):
        for name in ("Y0", "Y1", "Y2", "Y3"):
            d = np.diag(_diag3(getattr(self, name)))
            if np.any(d <= 0):
                raise ValueError(f"{name} must have positive diagonal entries")

    def matrices(self):
        return tuple(_diag3(getattr(self, n)) for n in ("Y0", "Y1", "Y2", "Y3"))


TRANSLATION_WEIGHTS = WeightSet((5, 5, 10), (10, 10, 50), (1, 1, 1), (6, 6, 1))
ATTITUDE_WEIGHTS = WeightSet((1, 1, 1), (10, 10, 10), (0.2, 0.2, 0.2), (0.05, 0.05, 0.05))


@dataclass
class RiccatiSolution:
    Q: np.ndarray
    residual_norm: float
    closed_loop_eigs: np.ndarray = field(default=None)


def build_care_matrices(w):
    """Return ``(A, B, Psi)`` for the integral/error/rate stack ``chi``.

    ``A`` is the block shift matrix (identity on the two block superdiagonals),
    ``B = blkdiag(0, 0, Y3^-1)`` and ``Psi = blkdiag(Y0, Y1, Y2)``.
    """
    Y0, Y1, Y2, Y3 = w.matrices()
    n = Y0.shape[0]
    I, Z = np.eye(n), np.zeros((n, n))
    A = np.block([[Z, I, Z], [Z, Z, I], [Z, Z, Z]])
    B = scipy.linalg.block_diag(Z, Z, np.linalg.inv(Y3))
    Psi = scipy.linalg.block_diag(Y0, Y1, Y2)
    return A, B, Psi


def care_residual(Q, A, B, Psi):
    return Q @ A + A.T @ Q - Q @ B @ Q + Psi


def solve_care(A, B, Psi, refine_sweeps=2, tol=1e-8):
    """Stabilizing solution of ``QA + A'Q - QBQ + Psi = 0``.

    Stable invariant subspace of the Hamiltonian from an ordered real Schur
    form, followed by Newton-Kleinman refinement sweeps.
    """
    A, B, Psi = (np.asarray(x, dtype=float) for x in (A, B, Psi))
    n = A.shape[0]
    H = np.block([[A, -B], [-Psi, -A.T]])
    T, Z, sdim = scipy.linalg.schur(H, output="real", sort="lhp")
    if sdim != n:
        raise SolveFailure(f"Hamiltonian has {sdim} stable eigenvalues, expected {n}")
    U1, U2 = Z[:n, :n], Z[n:, :n]
    if np.linalg.cond(U1) > 1e12:
        raise SolveFailure("stable subspace is not a graph (U1 singular)")
    Q = np.linalg.solve(U1.T, U2.T).T
    Q = 0.5 * (Q + Q.T)
    for _ in range(refine_sweeps):
        Ak = A - B @ Q
        Q = scipy.linalg.solve_continuous_lyapunov(Ak.T, -(Psi + Q @ B @ Q))
        Q = 0.5 * (Q + Q.T)
    res = float(np.linalg.norm(care_residual(Q, A, B, Psi), "fro"))
    eigs = np.linalg.eigvals(A - B @ Q)
    if not np.all(np.isfinite(Q)) or np.linalg.eigvalsh(Q).min() <= 0:
        raise SolveFailure("Riccati solution is not positive definite")
    if eigs.real.max() >= 0:
        raise SolveFailure("closed loop A - BQ is not Hurwitz")
    if res > tol:
        raise SolveFailure(f"Riccati residual {res:.3e} exceeds {tol:g}")
    return RiccatiSolution(Q=Q, residual_norm=res, closed_loop_eigs=eigs)


@dataclass
class LoopDesign:
    """Weights, Riccati solution and the feedback gain ``[0 0 Y3^-1] Q``."""

    weights: WeightSet
    solution: RiccatiSolution
    gain: np.ndarray

    @classmethod
    def from_weights(cls, weights):
        A, B, Psi = build_care_matrices(weights)
        sol = solve_care(A, B, Psi)
        n = A.shape[0] // 3
        Y3inv = np.linalg.inv(weights.matrices()[3])
        gain = Y3inv @ sol.Q[2 * n:, :]
        return cls(weights, sol, gain)

    def value(self, chi):
        """Storage function ``V = chi' Q chi / 2``."""
        return 0.5 * float(chi @ self.solution.Q @ chi)


@dataclass
class ReferenceSignal:
    """Position reference with derivatives and the yaw reference."""

    pos: np.ndarray
    vel: np.ndarray
    acc: np.ndarray
    psi: float = 0.0
    psi_dot: float = 0.0
    psi_ddot: float = 0.0


def partition(X):
    """Split a 6x6 (or 6-vector) into controlled/regulated blocks."""
    X = np.asarray(X)
    if X.ndim == 1:
        return X[:3], X[3:]
    return X[:3, :3], X[:3, 3:], X[3:, :3], X[3:, 3:]


@dataclass
class ModelTerms:
    M: np.ndarray
    C: np.ndarray
    g: np.ndarray
    B: np.ndarray


def model_terms(q, qdot, veh, load):
    """Evaluate ``M, C, g, B`` once for reuse by both loops."""
    return ModelTerms(M=mass_matrix(q, veh, load), C=coriolis_matrix(q, qdot, veh, load),
                      g=gravity_vector(q, veh, load), B=input_matrix(q, veh))


def input_maps(M):
    """Control and disturbance input matrices ``G = K = [0; 0; M^-1]`` of the
    error dynamics ``chi_dot = f + G u + K w``."""
    M = np.asarray(M, float)
    n = M.shape[0]
    G = np.vstack([np.zeros((2 * n, n)), np.linalg.inv(M)])
    return G, G.copy()


def worst_case_disturbance(G, K, Q, chi, gamma):
    """``w* = (K - G)' Q chi / gamma^2``; zero whenever ``K == G``."""
    return (np.asarray(K) - np.asarray(G)).T @ (np.asarray(Q) @ chi) / gamma ** 2


def translational_control(chi_c, q, qdot, ref, design, veh, load, eta_ddot=None, model=None):
    """Generalized force ``u* = -M_cc (K chi_c + h_c)`` for the position loop.

    ``eta_ddot`` is the attitude acceleration entering ``h_c`` through
    ``M_cr``; it is not measured, so the cascade passes zero.
    """
    q, qdot = np.asarray(q, float), np.asarray(qdot, float)
    model = model_terms(q, qdot, veh, load) if model is None else model
    Mcc, Mcr, _, _ = partition(model.M)
    Ccc, Ccr, _, _ = partition(model.C)
    gc, _ = partition(model.g)
    eta_ddot = np.zeros(3) if eta_ddot is None else np.asarray(eta_ddot, float)
    rhs = -Mcr @ eta_ddot - Ccc @ qdot[:3] - Ccr @ qdot[3:] - gc
    h_c = solve_spd(Mcc, rhs) - ref.acc
    return -Mcc @ (design.gain @ chi_c + h_c)


def attitude_allocation(u_star, phi, theta, psi=0.0):
    """Total thrust and roll/pitch references realizing the force ``u_star``.

    With ``psi = 0`` this is the planar inversion of the thrust direction
    ``(c_phi s_theta, -s_phi, c_phi c_theta)``; a nonzero ``psi`` first rotates
    the horizontal command into the heading frame.
    """
    u = np.asarray(u_star, dtype=float)
    if psi:
        c, s = np.cos(psi), np.sin(psi)
        u = np.array([c * u[0] + s * u[1], -s * u[0] + c * u[1], u[2]])
    cphi, ctheta = np.cos(phi), np.cos(theta)
    if abs(cphi) < 1e-6 or abs(ctheta) < 1e-6:
        raise AllocationDomainError("current roll or pitch too close to +-pi/2")
    f_z = u[2] / (cphi * ctheta)
    if not f_z > 0:
        raise AllocationDomainError(f"total thrust f_z = {f_z:.6g} is not positive")
    a = -u[1] / f_z
    if abs(a) > 1:
        raise AllocationDomainError(f"|u2 / f_z| = {abs(a):.6g} > 1")
    phi_r = np.arcsin(a)
    cphi_r = np.cos(phi_r)
    if abs(cphi_r) < 1e-6:
        raise AllocationDomainError("roll reference too close to +-pi/2")
    b = u[0] / (cphi_r * f_z)
    if abs(b) > 1:
        raise AllocationDomainError(f"|u1 / (cos(phi_r) f_z)| = {abs(b):.6g} > 1")
    return float(f_z), float(phi_r), float(np.arcsin(b))


def thrust_direction(phi, theta, psi=0.0):
    """Inertial direction ``R a_z`` of the total thrust."""
    return rotation_zyx(np.array([phi, theta, psi]))[:, 2]


@dataclass
class SchurTerms:
    """Attitude dynamics after eliminating the translational acceleration."""

    M_bar: np.ndarray
    C_bar: np.ndarray
    e_bar: np.ndarray
    B_bar: np.ndarray


def schur_terms(q, qdot, veh, load, model=None):
    q, qdot = np.asarray(q, float), np.asarray(qdot, float)
    model = model_terms(q, qdot, veh, load) if model is None else model
    Mcc, Mcr, Mrc, Mrr = partition(model.M)
    Ccc, Ccr, Crc, Crr = partition(model.C)
    gc, gr = partition(model.g)
    B = model.B
    L = solve_spd(Mcc, Mrc.T).T  # M_rc M_cc^-1 (M_cc symmetric)
    return SchurTerms(
        M_bar=Mrr - L @ Mcr,
        C_bar=Crr - L @ Ccr,
        e_bar=gr - L @ gc + (Crc - L @ Ccc) @ qdot[:3],
        B_bar=B[3:] - L @ B[:3],
    )


def rotational_control(x, q, qdot, ref, design, veh, load, terms=None):
    """Generalized attitude command ``u_bar* = -M_bar K x + C_bar e_dot + d_bar``.

    Roll/pitch reference rates are taken as zero, so the reference rate and
    acceleration of the regulated DOF reduce to the yaw channel.
    """
    terms = schur_terms(q, qdot, veh, load) if terms is None else terms
    qdot = np.asarray(qdot, float)
    qdot_rr = np.array([0.0, 0.0, ref.psi_dot])
    qddot_rr = np.array([0.0, 0.0, ref.psi_ddot])
    err_rate = qdot[3:] - qdot_rr
    d_bar = terms.M_bar @ qddot_rr + terms.C_bar @ qdot_rr + terms.e_bar
    return -terms.M_bar @ (design.gain @ x) + terms.C_bar @ err_rate + d_bar


def pairing_constraints(f_z, pairs=SPIN_MATCHED_PAIRS):
    """Equality constraints ``C tau = d``: four pairings and the total thrust."""
    C = np.zeros((len(pairs) + 1, 8))
    for row, (i, j) in enumerate(pairs):
        C[row, i], C[row, j] = 1.0, -1.0
    C[-1] = 1.0
    d = np.zeros(len(pairs) + 1)
    d[-1] = f_z
    return C, d


def thrust_allocation(u_bar, f_z, B_bar, pairs=SPIN_MATCHED_PAIRS):
    """Least-squares thrusts matching ``u_bar`` under the equality constraints.

    Solves the KKT system of ``min 0.5 |u_bar - B_bar tau|^2  s.t.  C tau = d``
    with one step of iterative refinement.  Negative thrusts are allowed
    (only logged).
    """
    u_bar, B_bar = np.asarray(u_bar, float), np.asarray(B_bar, float)
    C, d = pairing_constraints(f_z, pairs)
    nc = C.shape[0]
    K = np.block([[B_bar.T @ B_bar, C.T], [C, np.zeros((nc, nc))]])
    rhs = np.concatenate([B_bar.T @ u_bar, d])
    if np.linalg.cond(K) > KKT_COND_LIMIT:
        raise KktSingular("thrust-allocation KKT matrix is singular for this pairing/attitude")
    lu = scipy.linalg.lu_factor(K)
    sol = scipy.linalg.lu_solve(lu, rhs)
    sol += scipy.linalg.lu_solve(lu, rhs - K @ sol)
    tau = sol[:8]
    if np.any(tau < 0):
        log.warning("thrust allocation produced %d negative thrust(s)", int(np.sum(tau < 0)))
    return tau


@dataclass
class CascadeOutput:
    tau: np.ndarray
    f_z: float
    phi_r: float
    theta_r: float
    u_star: np.ndarray
    u_bar: np.ndarray
    B_bar: np.ndarray
    V_c: float
    V_r: float

    @property
    def alloc_residual(self):
        return float(np.linalg.norm(self.u_bar - self.B_bar @ self.tau))


class CascadeController:
    """Runtime cascade with the two integral accumulators.

    Parameters
    ----------
    translation, attitude : LoopDesign
        Solved designs for the controlled (position) and regulated
        (attitude) DOF.
    veh : VehicleParams
    dt : float
        Step used to advance the integral states after each call.
    pairs : sequence of (int, int)
        Thrust pairings for the allocation.
    yaw_in_allocation : bool
        Rotate the horizontal force command by the current heading before
        computing roll/pitch references.
    """

    def __init__(self, translation, attitude, veh, dt, pairs=SPIN_MATCHED_PAIRS,
                 yaw_in_allocation=False):
        self.translation = translation
        self.attitude = attitude
        self.veh = veh
        self.dt = dt
        self.pairs = tuple(tuple(p) for p in pairs)
        self.yaw_in_allocation = yaw_in_allocation
        self.int_c = np.zeros(3)
        self.int_r = np.zeros(3)

    def reset(self):
        self.int_c[:] = 0.0
        self.int_r[:] = 0.0

    def step(self, q, qdot, load, ref):
        """One control update from estimates ``(q, qdot, load)``."""
        q, qdot = np.asarray(q, float), np.asarray(qdot, float)
        e_c = q[:3] - ref.pos
        chi_c = np.concatenate([self.int_c, e_c, qdot[:3] - ref.vel])
        model = model_terms(q, qdot, self.veh, load)
        u_star = translational_control(chi_c, q, qdot, ref, self.translation, self.veh, load,
                                       model=model)
        psi = q[5] if self.yaw_in_allocation else 0.0
        f_z, phi_r, theta_r = attitude_allocation(u_star, q[3], q[4], psi)

        e_r = q[3:] - np.array([phi_r, theta_r, ref.psi])
        x = np.concatenate([self.int_r, e_r, qdot[3:] - np.array([0.0, 0.0, ref.psi_dot])])
        terms = schur_terms(q, qdot, self.veh, load, model)
        u_bar = rotational_control(x, q, qdot, ref, self.attitude, self.veh, load, terms)
        tau = thrust_allocation(u_bar, f_z, terms.B_bar, self.pairs)

        out = CascadeOutput(tau=tau, f_z=f_z, phi_r=phi_r, theta_r=theta_r,
                            u_star=u_star, u_bar=u_bar, B_bar=terms.B_bar,
                            V_c=self.translation.value(chi_c),
                            V_r=self.attitude.value(x))
        self.int_c += self.dt * e_c
        self.int_r += self.dt * e_r
        return out
