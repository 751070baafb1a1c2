"""Rotation, Euler-rate and Jacobian primitives for ZYX Euler angles.

Every function accepts a single angle triple ``(phi, theta, psi)`` or a stack
of them with shape ``(..., 3)``; matrices come back with the same leading
shape.
"""
import numpy as np

SINGULAR_COS = 1e-6


class DomainError(ValueError):
    """Raised when an Euler-angle operation is evaluated at a singularity."""


def _mat3(rows, lead):
    out = np.empty(lead + (3, 3))
    for i, row in enumerate(rows):
        for j, entry in enumerate(row):
            out[..., i, j] = entry
    return out


def skew(v):
    """Skew-symmetric matrix ``S(v)`` such that ``S(v) @ w == cross(v, w)``."""
    v = np.asarray(v, dtype=float)
    x, y, w = v[..., 0], v[..., 1], v[..., 2]
    return _mat3([[0.0, -w, y], [w, 0.0, -x], [-y, x, 0.0]], v.shape[:-1])


def _trig(eta):
    eta = np.asarray(eta, dtype=float)
    return np.cos(eta[..., 0]), np.sin(eta[..., 0]), np.cos(eta[..., 1]), \
        np.sin(eta[..., 1]), np.cos(eta[..., 2]), np.sin(eta[..., 2])


def rotation_zyx(eta):
    """Body-to-inertial rotation ``Rz(psi) @ Ry(theta) @ Rx(phi)``."""
    cf, sf, ct, st, cp, sp = _trig(eta)
    return _mat3([
        [cp * ct, cp * st * sf - sp * cf, cp * st * cf + sp * sf],
        [sp * ct, sp * st * sf + cp * cf, sp * st * cf - cp * sf],
        [-st, ct * sf, ct * cf],
    ], np.shape(cf))


def rotation_zyx_partials(eta):
    """Partial derivatives of :func:`rotation_zyx` w.r.t. phi, theta, psi.

    Returns an array of shape ``(..., 3, 3, 3)`` indexed ``[..., i, row, col]``.
    """
    cf, sf, ct, st, cp, sp = _trig(eta)
    lead = np.shape(cf)
    out = np.empty(lead + (3, 3, 3))
    out[..., 0, :, :] = _mat3([
        [0.0, cp * st * cf + sp * sf, -cp * st * sf + sp * cf],
        [0.0, sp * st * cf - cp * sf, -sp * st * sf - cp * cf],
        [0.0, ct * cf, -ct * sf],
    ], lead)
    out[..., 1, :, :] = _mat3([
        [-cp * st, cp * ct * sf, cp * ct * cf],
        [-sp * st, sp * ct * sf, sp * ct * cf],
        [-ct, -st * sf, -st * cf],
    ], lead)
    out[..., 2, :, :] = _mat3([
        [-sp * ct, -sp * st * sf - cp * cf, -sp * st * cf + cp * sf],
        [cp * ct, cp * st * sf - sp * cf, cp * st * cf + sp * sf],
        [0.0, 0.0, 0.0],
    ], lead)
    return out


def euler_rate_matrix(eta):
    """Euler matrix ``W`` mapping Euler-angle rates to body angular velocity."""
    cf, sf, ct, st, _, _ = _trig(eta)
    return _mat3([[1.0, 0.0, -st], [0.0, cf, ct * sf], [0.0, -sf, cf * ct]], np.shape(cf))


def euler_rate_matrix_partials(eta):
    """Partials of :func:`euler_rate_matrix`, shape ``(..., 3, 3, 3)``.

    The psi slice is identically zero.
    """
    cf, sf, ct, st, _, _ = _trig(eta)
    lead = np.shape(cf)
    out = np.zeros(lead + (3, 3, 3))
    out[..., 0, 1, 1], out[..., 0, 1, 2] = -sf, ct * cf
    out[..., 0, 2, 1], out[..., 0, 2, 2] = -cf, -sf * ct
    out[..., 1, 0, 2], out[..., 1, 1, 2], out[..., 1, 2, 2] = -ct, -st * sf, -cf * st
    return out


def check_attitude(eta, what="operation"):
    """Raise :class:`DomainError` if ``|cos(theta)|`` is below the singular threshold."""
    ct = np.cos(np.asarray(eta, dtype=float)[..., 1])
    if np.any(np.abs(ct) < SINGULAR_COS):
        raise DomainError(f"{what}: |cos(theta)| < {SINGULAR_COS:g} (Euler singularity)")


def euler_rates_from_body_rates(eta, omega):
    """Invert ``omega = W(eta) @ eta_dot``."""
    check_attitude(eta, "euler_rates_from_body_rates")
    return np.linalg.solve(euler_rate_matrix(eta), np.asarray(omega, dtype=float)[..., None])[..., 0]


def linear_jacobian(eta, r_body):
    """Point-velocity Jacobian ``[I | -R S(r) W]`` (3x6) of a body-fixed point."""
    eta = np.asarray(eta, dtype=float)
    lead = eta.shape[:-1]
    right = -rotation_zyx(eta) @ skew(r_body) @ euler_rate_matrix(eta)
    left = np.broadcast_to(np.eye(3), lead + (3, 3))
    return np.concatenate([left, right], axis=-1)


def angular_jacobian(eta):
    """Inertial angular-velocity Jacobian ``[0 | R W]`` (3x6)."""
    eta = np.asarray(eta, dtype=float)
    right = rotation_zyx(eta) @ euler_rate_matrix(eta)
    return np.concatenate([np.zeros(right.shape), right], axis=-1)
