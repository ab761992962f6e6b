"""Surge-decoupled 3-DOF vessel dynamics, whole-ship model and integrator.

State layout (8 entries): [alpha1, alpha2, x, y, psi, u, v, r] with azimuth
angles and heading in radians, positions in metres (NED plane), body
velocities in m/s and rad/s. Heading is kept unwrapped everywhere so finite
differencing stays continuous.

Public operations work on parameter dataclasses and small vectors. The
``*_arrays`` helpers broadcast over arbitrary leading batch dimensions and
back the estimation and synthetic-data code.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .actuation import InputCommand, ThrusterModel
from .errors import DegenerateParametersError, IntegrationBlowupError, ShipIdError
from .params import ShipParams6, ShipParams22

__all__ = [
    "BodyVelocity",
    "Pose",
    "ControlTorque",
    "ShipState",
    "STATE_LABELS",
    "rotation_matrix",
    "mass_matrix",
    "coriolis_matrix",
    "damping_matrix",
    "dynamics_rhs_22",
    "dynamics_rhs_6",
    "whole_ship_rhs",
    "rk4_step",
    "simulate",
]

STATE_LABELS = ("alpha1", "alpha2", "x", "y", "psi", "u", "v", "r")

# Relative threshold for declaring the inertia matrix singular.
_SINGULAR_RTOL = 1e-12


class BodyVelocity(NamedTuple):
    u: float
    v: float
    r: float


class Pose(NamedTuple):
    x: float
    y: float
    psi: float


class ControlTorque(NamedTuple):
    tau_u: float
    tau_v: float
    tau_r: float


class ShipState(NamedTuple):
    """Whole-ship state: pod angles plus pose plus body velocity."""

    alpha1: float
    alpha2: float
    pose: Pose
    vel: BodyVelocity

    def as_array(self) -> np.ndarray:
        return np.array([self.alpha1, self.alpha2, *self.pose, *self.vel], dtype=float)

    @classmethod
    def from_array(cls, arr) -> "ShipState":
        a = np.asarray(arr, dtype=float)
        if a.shape != (8,):
            raise ShipIdError(f"expected an 8-element state, got shape {a.shape}")
        return cls(a[0], a[1], Pose(a[2], a[3], a[4]), BodyVelocity(a[5], a[6], a[7]))

    @classmethod
    def rest(cls) -> "ShipState":
        return cls(0.0, 0.0, Pose(0.0, 0.0, 0.0), BodyVelocity(0.0, 0.0, 0.0))


def rotation_matrix(psi) -> np.ndarray:
    """Planar rotation J(psi) mapping body velocities to earth-frame rates."""
    psi = float(psi)
    if not np.isfinite(psi):
        raise ShipIdError("psi must be finite")
    c, s = np.cos(psi), np.sin(psi)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _check_invertible(m11, m22, m23, m32, m33):
    det = m11 * (m22 * m33 - m23 * m32)
    scale = max(abs(m11), abs(m22), abs(m23), abs(m32), abs(m33))
    if abs(det) < _SINGULAR_RTOL * max(1.0, scale ** 3):
        raise DegenerateParametersError(
            f"inertia matrix is numerically singular (det={det:.3e})"
        )


def mass_matrix(p: ShipParams22) -> np.ndarray:
    """Surge-decoupled inertia matrix (zero surge coupling)."""
    _check_invertible(p.m11, p.m22, p.m23, p.m32, p.m33)
    return np.array([
        [p.m11, 0.0, 0.0],
        [0.0, p.m22, p.m23],
        [0.0, p.m32, p.m33],
    ])


def coriolis_matrix(p: ShipParams22, vel) -> np.ndarray:
    u, v, r = np.asarray(vel, dtype=float)
    c13 = -p.m22 * v - p.m23 * r
    c23 = p.m11 * u
    return np.array([
        [0.0, 0.0, c13],
        [0.0, 0.0, c23],
        [-c13, -c23, 0.0],
    ])


def damping_matrix(p: ShipParams22, vel) -> np.ndarray:
    u, v, r = np.asarray(vel, dtype=float)
    au, av, ar = abs(u), abs(v), abs(r)
    d11 = -p.X_u - p.X_uu_abs * au - p.X_uuu * u * u
    d22 = -p.Y_v - p.Y_vv_abs * av - p.Y_rv_abs * ar - p.Y_vvv * v * v
    d23 = -p.Y_r - p.Y_vr_abs * av - p.Y_rr_abs * ar
    d32 = -p.N_v - p.N_vv_abs * av - p.N_rv_abs * ar
    d33 = -p.N_r - p.N_vr_abs * av - p.N_rr_abs * ar - p.N_rrr * r * r
    return np.array([
        [d11, 0.0, 0.0],
        [0.0, d22, d23],
        [0.0, d32, d33],
    ])


def dynamics_rhs_22(p: ShipParams22, vel, tau) -> np.ndarray:
    """Body-velocity rate: solves M vdot = -C(v) v - D(v) v + tau."""
    vel = np.asarray(vel, dtype=float)
    tau = np.asarray(tau, dtype=float)
    _check_invertible(p.m11, p.m22, p.m23, p.m32, p.m33)
    out = _vel_rate_arrays(p.as_array(), vel, tau)
    return out


def dynamics_rhs_6(p: ShipParams6, vel, tau) -> np.ndarray:
    """Body-velocity rate of the diagonal baseline model."""
    return dynamics_rhs_22(p.embed(), vel, tau)


def _vel_rate_arrays(theta, vel, tau):
    """Velocity dynamics on arrays. theta: (...,22); vel, tau: (...,3)."""
    m11, m22, m23, m32, m33 = (theta[..., i] for i in range(5))
    u, v, r = vel[..., 0], vel[..., 1], vel[..., 2]
    au, av, ar = np.abs(u), np.abs(v), np.abs(r)

    d11 = -theta[..., 5] - theta[..., 6] * au - theta[..., 7] * u * u
    d22 = -theta[..., 8] - theta[..., 9] * av - theta[..., 11] * ar - theta[..., 10] * v * v
    d23 = -theta[..., 12] - theta[..., 13] * av - theta[..., 14] * ar
    d32 = -theta[..., 15] - theta[..., 16] * av - theta[..., 17] * ar
    d33 = -theta[..., 18] - theta[..., 21] * av - theta[..., 19] * ar - theta[..., 20] * r * r

    c13 = -m22 * v - m23 * r
    c23 = m11 * u

    xi1 = tau[..., 0] - c13 * r - d11 * u
    xi2 = tau[..., 1] - c23 * r - (d22 * v + d23 * r)
    xi3 = tau[..., 2] - (-c13 * u - c23 * v) - (d32 * v + d33 * r)

    det2 = m22 * m33 - m23 * m32
    udot = xi1 / m11
    vdot = (m33 * xi2 - m23 * xi3) / det2
    rdot = (-m32 * xi2 + m22 * xi3) / det2
    return np.stack(np.broadcast_arrays(udot, vdot, rdot), axis=-1)


def _thruster_consts(thr: ThrusterModel):
    """Flatten the actuation model into plain floats for the hot loops."""
    g = thr.geometry
    return (
        np.asarray(thr.poly.coeffs, dtype=float), float(thr.poly.divisor),
        float(thr.azimuth1.K_alpha), float(thr.azimuth1.epsilon),
        float(thr.azimuth2.K_alpha), float(thr.azimuth2.epsilon),
        float(g.lx1), float(g.ly1), float(g.lx2), float(g.ly2),
    )


def _slew(K, eps, err):
    if eps == 0.0:
        return K * np.sign(err)
    return K * err / np.sqrt(err * err + eps * eps)


def _rhs8_arrays(theta, tc, x, cmd):
    """Whole-ship state rate on arrays.

    theta: (...,22) broadcastable against x: (...,8) and cmd: (...,4);
    tc is the tuple produced by ``_thruster_consts``.
    """
    coeffs, divisor, K1, e1, K2, e2, lx1, ly1, lx2, ly2 = tc
    a1, a2 = x[..., 0], x[..., 1]
    psi = x[..., 4]
    u, v, r = x[..., 5], x[..., 6], x[..., 7]

    da1 = _slew(K1, e1, cmd[..., 2] - a1)
    da2 = _slew(K2, e2, cmd[..., 3] - a2)

    f1 = np.polyval(coeffs, cmd[..., 0]) / divisor
    f2 = np.polyval(coeffs, cmd[..., 1]) / divisor
    s1, c1 = np.sin(a1), np.cos(a1)
    s2, c2 = np.sin(a2), np.cos(a2)
    tau = np.stack(np.broadcast_arrays(
        c1 * f1 + c2 * f2,
        s1 * f1 + s2 * f2,
        (lx1 * s1 + ly1 * c1) * f1 + (lx2 * s2 + ly2 * c2) * f2,
    ), axis=-1)

    vel = x[..., 5:8]
    vdot = _vel_rate_arrays(theta, vel, tau)

    cpsi, spsi = np.cos(psi), np.sin(psi)
    out = np.empty(np.broadcast_shapes(theta.shape[:-1], x.shape[:-1], cmd.shape[:-1]) + (8,))
    out[..., 0] = da1
    out[..., 1] = da2
    out[..., 2] = cpsi * u - spsi * v
    out[..., 3] = spsi * u + cpsi * v
    out[..., 4] = r
    out[..., 5:8] = vdot
    return out


def _rk4_arrays(theta, tc, x, cmd, dt):
    """One classical RK4 step of the whole-ship model, command held fixed."""
    k1 = _rhs8_arrays(theta, tc, x, cmd)
    k2 = _rhs8_arrays(theta, tc, x + (0.5 * dt) * k1, cmd)
    k3 = _rhs8_arrays(theta, tc, x + (0.5 * dt) * k2, cmd)
    k4 = _rhs8_arrays(theta, tc, x + dt * k3, cmd)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def whole_ship_rhs(p: ShipParams22, thr: ThrusterModel, state, cmd) -> np.ndarray:
    """State rate of the full 8-dimensional ship model.

    ``state`` is a ShipState or 8-array; ``cmd`` an InputCommand or 4-array.
    """
    x = state.as_array() if isinstance(state, ShipState) else np.asarray(state, dtype=float)
    u = np.asarray(cmd, dtype=float)
    if x.shape != (8,) or u.shape != (4,):
        raise ShipIdError("state must have 8 entries and cmd 4 entries")
    _check_invertible(p.m11, p.m22, p.m23, p.m32, p.m33)
    return _rhs8_arrays(p.as_array(), _thruster_consts(thr), x, u)


def rk4_step(rhs, state, cmd, dt):
    """Classical 4th-order Runge-Kutta update with zero-order-held command.

    ``rhs(state, cmd)`` must return the state rate; works on any state shape.
    """
    if dt <= 0:
        raise ShipIdError(f"dt must be positive, got {dt}")
    x = np.asarray(state, dtype=float)
    k1 = np.asarray(rhs(x, cmd))
    k2 = np.asarray(rhs(x + 0.5 * dt * k1, cmd))
    k3 = np.asarray(rhs(x + 0.5 * dt * k2, cmd))
    k4 = np.asarray(rhs(x + dt * k3, cmd))
    out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise IntegrationBlowupError("non-finite state after RK4 step")
    return out


def simulate(p: ShipParams22, thr: ThrusterModel, x0, cmds, dt) -> np.ndarray:
    """Forward rollout under a command schedule.

    ``cmds`` has one command per step (shape (N, 4) or list of commands);
    the result holds N+1 states with the initial state first.
    """
    cmds = np.atleast_2d(np.asarray(cmds, dtype=float))
    if cmds.size == 0:
        raise ShipIdError("command schedule must be non-empty")
    if cmds.shape[1] != 4:
        raise ShipIdError(f"commands must have 4 columns, got {cmds.shape[1]}")
    if dt <= 0:
        raise ShipIdError(f"dt must be positive, got {dt}")
    x = x0.as_array() if isinstance(x0, ShipState) else np.asarray(x0, dtype=float)
    if x.shape != (8,):
        raise ShipIdError(f"x0 must have 8 entries, got shape {x.shape}")
    _check_invertible(p.m11, p.m22, p.m23, p.m32, p.m33)

    theta = p.as_array()
    tc = _thruster_consts(thr)
    n = cmds.shape[0]
    traj = np.empty((n + 1, 8))
    traj[0] = x
    for k in range(n):
        x = _rk4_arrays(theta, tc, x, cmds[k], dt)
        if not np.all(np.isfinite(x)):
            raise IntegrationBlowupError(
                f"integration blew up at step {k + 1}", step=k + 1
            )
        traj[k + 1] = x
    return traj


def rollout_batch(thetas, thr: ThrusterModel, x0, cmds, dt, n_steps=None):
    """Batched forward rollout used by estimation and validation.

    thetas: (P, 22) parameter lanes (or (22,) for a single lane);
    x0: (L, 8) initial states; cmds: (L, N, 4) command schedules;
    n_steps: optional (L,) valid step counts (lanes may be padded).

    Returns trajectories of shape (P, L, N+1, 8). Never raises on blowup;
    non-finite entries are left in place for the caller to handle.
    """
    thetas = np.asarray(thetas, dtype=float)
    single = thetas.ndim == 1
    if single:
        thetas = thetas[None, :]
    x0 = np.asarray(x0, dtype=float)
    cmds = np.asarray(cmds, dtype=float)
    P = thetas.shape[0]
    L, N = cmds.shape[0], cmds.shape[1]

    theta_l = thetas[:, None, :]  # (P, 1, 22)
    tc = _thruster_consts(thr)
    traj = np.empty((P, L, N + 1, 8))
    x = np.broadcast_to(x0[None, :, :], (P, L, 8)).copy()
    traj[:, :, 0, :] = x
    with np.errstate(all="ignore"):
        for k in range(N):
            x = _rk4_arrays(theta_l, tc, x, cmds[None, :, k, :], dt)
            # Freeze non-finite lanes so overflow does not slow the rest down.
            bad = ~np.all(np.isfinite(x), axis=-1)
            if bad.any():
                x = np.where(bad[..., None], np.nan, x)
            traj[:, :, k + 1, :] = x
    return traj[0] if single else traj
