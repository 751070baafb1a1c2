"""Closed-loop scenario runner: truth plant, sensors, filter, controller, log.

Random numbers come from numpy's ``PCG64`` bit generator.  The run seed feeds
a ``SeedSequence`` whose spawned children give one independent stream per
measurement channel, so switching a channel's noise off leaves every other
channel's realization untouched.
"""
import io
import logging
from dataclasses import dataclass

import numpy as np

from .config import disturbance_at
from .jukf import JointUKF, measurement_model
from .multibody import LoadParams, generalized_acceleration, input_matrix
from .winf_control import CascadeController, LoopDesign, ReferenceSignal

log = logging.getLogger(__name__)

_AXES = ("x", "y", "z", "phi", "theta", "psi")
COLUMNS = (
    ["t"] + [f"q_{a}" for a in _AXES] + [f"qdot_{a}" for a in _AXES]
    + [f"y_{i}" for i in range(9)]
    + [f"xhat_q_{a}" for a in _AXES] + [f"xhat_qdot_{a}" for a in _AXES]
    + ["dhat_x", "dhat_y", "phat_mL", "phat_rL"]
    + [f"pvar_{i}" for i in range(16)] + ["cov_min_eig"]
    + [f"tau_{i}" for i in range(1, 9)]
    + ["fz", "phir", "thetar", "Vc", "Vr", "alloc_residual"]
)
LYAPUNOV_TOL = 1e-6
ONSET_TRANSIENT = 3.0


class SimulationError(RuntimeError):
    """A step of the closed loop failed; the message names step and operation."""


@dataclass
class TrajectoryLog:
    """One row per step with the columns of :data:`COLUMNS`."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float).reshape(-1, len(COLUMNS))

    def __len__(self):
        return self.data.shape[0]

    def column(self, name):
        return self.data[:, COLUMNS.index(name)]

    def columns(self, prefix):
        idx = [i for i, c in enumerate(COLUMNS) if c.startswith(prefix)]
        return self.data[:, idx]

    @property
    def t(self):
        return self.column("t")


def integrate_truth(q, qdot, tau, zeta, veh, load, T_s):
    """One forward-Euler step of the plant."""
    F = input_matrix(q, veh) @ np.asarray(tau, float) + np.asarray(zeta, float)
    qddot = generalized_acceleration(q, qdot, F, veh, load)
    return q + T_s * qdot, qdot + T_s * qddot


def make_noise_streams(seed, n=9):
    children = np.random.SeedSequence(seed).spawn(n)
    return [np.random.Generator(np.random.PCG64(c)) for c in children]


def simulate_measurement(q, qdot, meas_std, streams):
    """``pi(x) + v`` with independent Gaussian noise per channel."""
    y = measurement_model(np.concatenate([q, qdot]))
    noise = np.array([s * rng.standard_normal() for s, rng in zip(meas_std, streams)])
    return y + noise


def reference_at(config, t):
    pos, vel, acc = config.reference.evaluate(t)
    return ReferenceSignal(pos=pos, vel=vel, acc=acc, psi=config.reference.psi)


def build_controller(config):
    return CascadeController(
        LoopDesign.from_weights(config.translation_weights),
        LoopDesign.from_weights(config.attitude_weights),
        config.vehicle, config.T_s, pairs=config.allocation_pairs,
        yaw_in_allocation=config.yaw_in_allocation)


def run_experiment(config):
    """Simulate the closed loop; returns ``(TrajectoryLog, metrics)``.

    Order per step: measure, filter, control, apply thrust and disturbance,
    integrate.  With ``config.true_params`` the filter is bypassed and the
    controller receives the true state and load.
    """
    veh, T_s = config.vehicle, config.T_s
    true_load = config.load
    controller = build_controller(config)
    ukf = JointUKF(veh, config.noise, T_s)
    belief = ukf.initial_belief(config.x0, config.d0, config.p0)
    streams = make_noise_streams(config.seed)
    meas_std = np.sqrt(config.noise.meas_var) if config.measurement_noise else np.zeros(9)
    disturbances = config.disturbances if config.disturbance_enabled else ()

    q, qdot = np.array(config.q0, float), np.array(config.qdot0, float)
    u_prev = None
    rows = []
    for k in range(config.n_steps):
        t = k * T_s
        op = "measurement"
        try:
            y = simulate_measurement(q, qdot, meas_std, streams)
            if config.true_params:
                xhat, dhat = np.concatenate([q, qdot]), np.zeros(2)
                phat = np.array([true_load.m_L, true_load.r_L], float)
                pvar, min_eig = np.zeros(16), 0.0
            else:
                op = "jukf_step"
                belief = ukf.step(belief, u_prev, y)
                xhat, dhat, phat = belief.x, belief.d, belief.p
                pvar, min_eig = np.diag(belief.cov), np.linalg.eigvalsh(belief.cov)[0]
            op = "cascade_step"
            p_ctrl = np.maximum(phat, 0.0)
            out = controller.step(xhat[:6], xhat[6:], LoadParams(p_ctrl[0], p_ctrl[1]),
                                  reference_at(config, t))
            zeta = disturbance_at(disturbances, t)
            rows.append(np.concatenate([
                [t], q, qdot, y, xhat, dhat, phat, pvar, [min_eig], out.tau,
                [out.f_z, out.phi_r, out.theta_r, out.V_c, out.V_r, out.alloc_residual]]))
            op = "integrate_truth"
            q, qdot = integrate_truth(q, qdot, out.tau, zeta, veh, true_load, T_s)
            if not (np.all(np.isfinite(q)) and np.all(np.isfinite(qdot))):
                raise FloatingPointError("non-finite plant state")
        except Exception as exc:
            raise SimulationError(f"step {k} (t = {t:.2f} s): {op} failed: "
                                  f"{type(exc).__name__}: {exc}") from exc
        u_prev = out.tau
    traj = TrajectoryLog(np.array(rows) if rows else np.empty((0, len(COLUMNS))))
    return traj, compute_metrics(traj, config)


def write_log(traj, path):
    """CSV with a fixed header; floats written with 17 significant digits."""
    np.savetxt(path, traj.data, delimiter=",", header=",".join(COLUMNS),
               comments="", fmt="%.17g")


def read_log(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        body = fh.read()
    if tuple(header) != tuple(COLUMNS):
        raise ValueError(f"{path}: unexpected CSV header")
    if not body.strip():
        return TrajectoryLog(np.empty((0, len(COLUMNS))))
    data = np.loadtxt(io.StringIO(body), delimiter=",", ndmin=2)
    return TrajectoryLog(data)


def lyapunov_violations(V, tol=LYAPUNOV_TOL):
    """Number of steps (after the first) where ``V`` grows by more than ``tol``."""
    dV = np.diff(np.asarray(V, float))
    return int(np.sum(dV[1:] > tol))


def constraint_residuals(traj, config):
    """Per-step max violation of the pairing and total-thrust equalities."""
    tau = traj.columns("tau_")
    a, b = np.array(config.allocation_pairs).T
    pair = np.abs(tau[:, a] - tau[:, b])
    total = np.abs(tau.sum(axis=1) - traj.column("fz"))
    return np.maximum(pair.max(axis=1), total)


def compute_metrics(traj, config):
    """Summary figures of a run as a plain dict."""
    if len(traj) == 0:
        return {"steps": 0}
    t = traj.t
    pos = traj.columns("q_")[:, :3]
    ref = np.array([config.reference.evaluate(tk)[0] for tk in t])
    err = pos - ref
    period = config.reference.period
    final = t >= t[-1] - period + 0.5 * config.T_s
    rmse = np.sqrt(np.mean(err[final] ** 2, axis=0))
    mL, rL = traj.column("phat_mL"), traj.column("phat_rL")
    dx = traj.column("dhat_x")
    metrics = {
        "steps": int(len(traj)),
        "final_period_rmse": [float(v) for v in rmse],
        "terminal_position_error": [float(v) for v in np.abs(err[-1])],
        "terminal_mL_error": float(abs(mL[-1] - config.load.m_L)),
        "terminal_rL_error": float(abs(rL[-1] - config.load.r_L)),
        "max_alloc_residual": float(np.max(traj.column("alloc_residual"))),
        "max_constraint_residual": float(np.max(constraint_residuals(traj, config))),
        "negative_thrust_count": int(np.sum(traj.columns("tau_") < 0)),
        "lyapunov_violations": lyapunov_violations(traj.column("Vc")),
        "min_cov_eig": float(np.min(traj.column("cov_min_eig"))),
    }
    windows = [d for d in config.disturbances if d.channel == "x"] if config.disturbance_enabled else []
    for d in windows[:1]:
        sel = (t >= d.t_start + ONSET_TRANSIENT) & (t <= d.t_end)
        if np.any(sel):
            metrics["mean_abs_dx_error_in_window"] = float(np.mean(np.abs(dx[sel] - d.magnitude)))
        after = (t >= d.t_end + 10.0) & (t <= d.t_end + 30.0)
        if np.any(after):
            metrics["mean_abs_dx_after_window"] = float(np.mean(np.abs(dx[after])))
    return metrics
