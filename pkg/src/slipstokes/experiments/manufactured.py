"""Closed-form perfect-slip solutions on the flat half-cube and their checks."""

from __future__ import annotations

import numpy as np

from ..orlicz import NFunction, stress

__all__ = [
    "constant_strain_velocity",
    "constant_strain_gradient",
    "cubic_stream_velocity",
    "cubic_stream_gradient",
    "cubic_stream_forcing",
    "fd_gradient",
    "slip_defects",
]


def constant_strain_velocity(x):
    """``u*(x) = (-x1, x2)``: constant symmetric gradient, exact for ``F = 0``."""
    x = np.asarray(x, dtype=float)
    return np.stack([-x[..., 0], x[..., 1]], -1)


def constant_strain_gradient(x):
    x = np.asarray(x, dtype=float)
    G = np.zeros(x.shape[:-1] + (2, 2))
    G[..., 0, 0] = -1.0
    G[..., 1, 1] = 1.0
    return G


def cubic_stream_velocity(x):
    """``u**(x) = (-3 x1^2 + 3 x2^2, 6 x1 x2)`` from the cubic stream function ``3 x1^2 x2 - x2^3``."""
    x = np.asarray(x, dtype=float)
    a, b = x[..., 0], x[..., 1]
    return np.stack([-3 * a * a + 3 * b * b, 6 * a * b], -1)


def cubic_stream_gradient(x):
    x = np.asarray(x, dtype=float)
    a, b = x[..., 0], x[..., 1]
    G = np.empty(x.shape[:-1] + (2, 2))
    G[..., 0, 0] = -6 * a
    G[..., 0, 1] = 6 * b
    G[..., 1, 0] = 6 * b
    G[..., 1, 1] = 6 * a
    return G


def cubic_stream_forcing(phi: NFunction):
    """Forcing ``F = S(Du**)`` that makes the cubic-stream field exact with zero pressure."""
    return lambda x: stress(phi, cubic_stream_gradient(x))


def fd_gradient(u, x, step: float = 1e-4):
    """Central-difference gradient ``G[..., i, j] = d_j u_i``."""
    x = np.asarray(x, dtype=float)
    G = np.empty(x.shape[:-1] + (2, 2))
    for j in range(2):
        e = np.zeros(2)
        e[j] = step
        G[..., :, j] = (u(x + e) - u(x - e)) / (2 * step)
    return G


def slip_defects(u, points, nu, tau, step: float = 1e-4):
    """Finite-difference slip and incompressibility defects at boundary points.

    Args:
        u: Velocity callable.
        points: ``(n, 2)`` boundary points.
        nu: Outward unit normals, ``(n, 2)`` or ``(2,)``.
        tau: Unit tangents, same shape as ``nu``.
        step: Difference step.

    Returns:
        Dict of max absolute ``div u``, ``u . nu`` and ``[Du nu] . tau``.
    """
    pts = np.asarray(points, dtype=float)
    nu = np.broadcast_to(np.asarray(nu, dtype=float), pts.shape)
    tau = np.broadcast_to(np.asarray(tau, dtype=float), pts.shape)
    G = fd_gradient(u, pts, step)
    D = 0.5 * (G + np.swapaxes(G, -1, -2))
    return {
        "div": float(np.max(np.abs(G[..., 0, 0] + G[..., 1, 1]))),
        "normal": float(np.max(np.abs(np.sum(u(pts) * nu, -1)))),
        "traction": float(np.max(np.abs(np.einsum("nij,nj,ni->n", D, nu, tau)))),
    }
