"""Joint state / exogenous-input / parameter unscented Kalman filter.

The augmented state is ``mu = (q, qdot, d, p)`` with ``d`` the unknown
horizontal force on the x and y channels and ``p = (m_L, r_L)`` the load
parameters (16 components in total).  The generic :func:`unscented_predict`
and :func:`unscented_update` take the process/measurement maps as callables
acting on a stack of sigma points, so they can be exercised with simple test
doubles; :class:`JointUKF` binds them to the octocopter models.
"""
from dataclasses import dataclass, field

import numpy as np

from .kinematics import euler_rate_matrix
from .multibody import LoadParams, generalized_acceleration, input_matrix

N_STATE, N_DIST, N_PARAM = 12, 2, 2
N_AUG = N_STATE + N_DIST + N_PARAM
N_MEAS = 9
JITTER = 1e-9


class NotPositiveDefinite(np.linalg.LinAlgError):
    """Covariance could not be factored even after one jitter retry."""


class InnovationCovSingular(np.linalg.LinAlgError):
    """Predicted measurement covariance is not invertible."""


@dataclass
class GaussianBelief:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float).copy()
        self.cov = np.asarray(self.cov, dtype=float).copy()

    @property
    def x(self):
        return self.mean[:N_STATE]

    @property
    def d(self):
        return self.mean[N_STATE:N_STATE + N_DIST]

    @property
    def p(self):
        return self.mean[N_STATE + N_DIST:]

    def copy(self):
        return GaussianBelief(self.mean, self.cov)


def _default_process_var():
    return np.concatenate([np.full(12, (0.01 / 3) ** 2), np.full(2, (1 / 3) ** 2),
                           [(2 / 3) ** 2, (0.001 / 3) ** 2]])


def _default_meas_var():
    return np.concatenate([np.full(2, 0.05 ** 2), [0.17 ** 2],
                           np.full(3, (0.05 * np.pi / 180) ** 2), np.full(3, 0.00552 ** 2)])


def _default_x0_var():
    # velocity block is printed as 1/3 (not squared); taken verbatim
    return np.concatenate([np.full(3, (2 / 3) ** 2), np.full(2, (np.pi / 18) ** 2),
                           [(np.pi / 6) ** 2], np.full(3, 1 / 3), np.full(3, (np.pi / 36) ** 2)])


@dataclass
class NoiseConfig:
    """Diagonal covariances of the filter (defaults: the published tuning)."""

    process_var: np.ndarray = field(default_factory=_default_process_var)
    meas_var: np.ndarray = field(default_factory=_default_meas_var)
    x0_var: np.ndarray = field(default_factory=_default_x0_var)
    d0_var: np.ndarray = field(default_factory=lambda: np.full(2, (1 / 3) ** 2))
    p0_var: np.ndarray = field(default_factory=lambda: np.array([(50 / 3) ** 2, (0.75 / 3) ** 2]))

    def __post_init__(self):
        for name, n in (("process_var", N_AUG), ("meas_var", N_MEAS), ("x0_var", N_STATE),
                        ("d0_var", N_DIST), ("p0_var", N_PARAM)):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (n,):
                raise ValueError(f"{name} must have {n} entries, got shape {v.shape}")
            if np.any(v < 0):
                raise ValueError(f"{name} must be nonnegative")
            setattr(self, name, v)

    @property
    def P_w(self):
        return np.diag(self.process_var)

    @property
    def P_v(self):
        return np.diag(self.meas_var)

    @property
    def P0(self):
        return np.diag(np.concatenate([self.x0_var, self.d0_var, self.p0_var]))


def symmetrize(P):
    return 0.5 * (P + np.swapaxes(P, -1, -2))


def cholesky_lower(P):
    """Lower Cholesky factor, retrying once with ``JITTER * I`` added."""
    P = np.asarray(P, dtype=float)
    if not np.allclose(P, P.T, atol=1e-10, rtol=0):
        raise ValueError("covariance is not symmetric")
    try:
        return np.linalg.cholesky(P)
    except np.linalg.LinAlgError:
        pass
    try:
        return np.linalg.cholesky(P + JITTER * np.eye(P.shape[0]))
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("covariance not positive definite after jitter retry") from exc


def sigma_points(mean, cov):
    """Symmetric sigma set ``mean +- sqrt(n) S`` (2n rows) and weight ``1/(2n)``."""
    mean = np.asarray(mean, dtype=float)
    n = mean.shape[0]
    S = np.sqrt(n) * cholesky_lower(cov)
    pts = np.concatenate([mean + S.T, mean - S.T], axis=0)
    return pts, 1.0 / (2 * n)


def _moments(pts, rho):
    m = rho * pts.sum(axis=0)
    dev = pts - m
    return m, rho * dev.T @ dev, dev


def unscented_predict(belief, fx, P_w):
    """Prediction step: push sigma points through ``fx`` and add ``P_w``."""
    pts, rho = sigma_points(belief.mean, belief.cov)
    mean, cov, _ = _moments(fx(pts), rho)
    return GaussianBelief(mean, symmetrize(cov + P_w))


def unscented_update(belief, y, hx, P_v):
    """Update step with a fresh sigma set drawn from the predicted belief.

    Returns the posterior and the innovation ``y - y_bar``.
    """
    pts, rho = sigma_points(belief.mean, belief.cov)
    ys = hx(pts)
    y_bar, P_y, dev_y = _moments(ys, rho)
    P_y = P_y + P_v
    P_my = rho * (pts - belief.mean).T @ dev_y
    try:
        K = np.linalg.solve(P_y, P_my.T).T
    except np.linalg.LinAlgError as exc:
        raise InnovationCovSingular(str(exc)) from exc
    if not np.all(np.isfinite(K)):
        raise InnovationCovSingular("non-finite Kalman gain")
    innov = np.asarray(y, float) - y_bar
    mean = belief.mean + K @ innov
    cov = symmetrize(belief.cov - K @ P_y @ K.T)
    return GaussianBelief(mean, cov), innov


def project_params(mu):
    """Clamp ``m_L`` and ``r_L`` at zero so the inertia matrix stays definite."""
    mu = np.array(mu, dtype=float, copy=True)
    mu[..., N_STATE + N_DIST:] = np.maximum(mu[..., N_STATE + N_DIST:], 0.0)
    return mu


def process_model(mu, u, veh, T_s):
    """Forward-Euler augmented transition; ``d`` and ``p`` are held constant.

    Negative load parameters are clamped for the dynamics evaluation only;
    the propagated ``p`` is left untouched.

    Works on a single augmented state or a stack ``(N, 16)``.
    """
    mu = np.asarray(mu, dtype=float)
    q, qdot = mu[..., :6], mu[..., 6:12]
    d = mu[..., 12:14]
    p = project_params(mu)[..., 14:]
    load = LoadParams(p[..., 0], p[..., 1])
    F = input_matrix(q, veh) @ np.asarray(u, float)
    F = F + np.concatenate([d, np.zeros(d.shape[:-1] + (4,))], axis=-1)
    qddot = generalized_acceleration(q, qdot, F, veh, load)
    out = mu.copy()
    out[..., :6] = q + T_s * qdot
    out[..., 6:12] = qdot + T_s * qddot
    return out


def measurement_model(mu):
    """Position, Euler angles and body angular velocity ``W(eta) eta_dot``."""
    mu = np.asarray(mu, dtype=float)
    eta, eta_dot = mu[..., 3:6], mu[..., 9:12]
    omega = np.einsum('...ij,...j->...i', euler_rate_matrix(eta), eta_dot)
    return np.concatenate([mu[..., :6], omega], axis=-1)


class JointUKF:
    """Octocopter joint filter; one instance per simulation thread.

    Parameters
    ----------
    veh : VehicleParams
    noise : NoiseConfig
    T_s : float
        Sampling time of the process model.
    """

    def __init__(self, veh, noise, T_s):
        self.veh = veh
        self.noise = noise
        self.T_s = T_s
        self.last_innovation = None

    def initial_belief(self, x0, d0=(0.0, 0.0), p0=(50.0, 0.75)):
        mean = np.concatenate([np.asarray(x0, float), np.asarray(d0, float), np.asarray(p0, float)])
        return GaussianBelief(mean, self.noise.P0)

    def predict(self, belief, u):
        return unscented_predict(belief, lambda pts: process_model(pts, u, self.veh, self.T_s),
                                 self.noise.P_w)

    def update(self, belief, y):
        post, innov = unscented_update(belief, y, measurement_model, self.noise.P_v)
        self.last_innovation = innov
        return post

    def step(self, belief, u_prev, y):
        """Predict with the previous input (skipped when ``u_prev`` is None), then update."""
        if u_prev is not None:
            belief = self.predict(belief, u_prev)
        return self.update(belief, y)
