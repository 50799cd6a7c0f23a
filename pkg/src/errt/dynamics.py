"""Near-hover UAV model with first-order attitude response.

State ``x = [px, py, pz, vx, vy, vz, phi, theta]`` (m, m/s, rad) and input
``u = [T, theta_ref, phi_ref]`` with ``T`` the mass-normalized thrust.
Continuous dynamics::

    p'     = v
    v'     = T * [cos(phi) sin(theta), -sin(phi), cos(phi) cos(theta)]
             - [0, 0, g] - drag * v
    phi'   = (gain_phi * phi_ref - phi) / tau_phi
    theta' = (gain_theta * theta_ref - theta) / tau_theta

discretized with one classical RK4 step per sample.  There is no yaw.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

GRAVITY = 9.81

N_STATE = 8
N_INPUT = 3

U_HOVER = np.array([GRAVITY, 0.0, 0.0])


@dataclass(frozen=True)
class UavParams:
    drag: tuple[float, float, float] = (0.1, 0.1, 0.2)
    tau_phi: float = 0.5
    tau_theta: float = 0.5
    gain_phi: float = 1.0
    gain_theta: float = 1.0
    gravity: float = GRAVITY

    def packed(self) -> np.ndarray:
        return np.array([*self.drag, self.tau_phi, self.tau_theta,
                         self.gain_phi, self.gain_theta, self.gravity])


def make_state(p=(0.0, 0.0, 0.0), v=(0.0, 0.0, 0.0), phi=0.0, theta=0.0) -> np.ndarray:
    return np.array([*p, *v, phi, theta], dtype=np.float64)


def position_state(p) -> np.ndarray:
    """Full state at position ``p`` with every other entry zero."""
    return make_state(p)


@njit(cache=True)
def _f(x, u, prm, out):
    thrust = u[0]
    cphi = math.cos(x[6])
    sphi = math.sin(x[6])
    cth = math.cos(x[7])
    sth = math.sin(x[7])
    out[0] = x[3]
    out[1] = x[4]
    out[2] = x[5]
    out[3] = thrust * cphi * sth - prm[0] * x[3]
    out[4] = -thrust * sphi - prm[1] * x[4]
    out[5] = thrust * cphi * cth - prm[7] - prm[2] * x[5]
    out[6] = (prm[5] * u[2] - x[6]) / prm[3]
    out[7] = (prm[6] * u[1] - x[7]) / prm[4]


@njit(cache=True)
def _f_vjp(x, u, prm, w, gx, gu):
    """Accumulate ``(df/dx)^T w`` into ``gx`` and ``(df/du)^T w`` into ``gu``."""
    thrust = u[0]
    cphi = math.cos(x[6])
    sphi = math.sin(x[6])
    cth = math.cos(x[7])
    sth = math.sin(x[7])
    gx[3] += w[0] - prm[0] * w[3]
    gx[4] += w[1] - prm[1] * w[4]
    gx[5] += w[2] - prm[2] * w[5]
    gx[6] += (-thrust * sphi * sth * w[3] - thrust * cphi * w[4]
              - thrust * sphi * cth * w[5] - w[6] / prm[3])
    gx[7] += thrust * cphi * cth * w[3] - thrust * cphi * sth * w[5] - w[7] / prm[4]
    gu[0] += cphi * sth * w[3] - sphi * w[4] + cphi * cth * w[5]
    gu[1] += prm[6] / prm[4] * w[7]
    gu[2] += prm[5] / prm[3] * w[6]


def workspace() -> np.ndarray:
    """Scratch buffer for :func:`rk4_step` and :func:`rk4_vjp`."""
    return np.empty((12, N_STATE))


@njit(cache=True)
def rk4_step(x, u, prm, h, out, ws):
    k1, k2, k3, k4, tmp = ws[0], ws[1], ws[2], ws[3], ws[4]
    _f(x, u, prm, k1)
    for i in range(8):
        tmp[i] = x[i] + 0.5 * h * k1[i]
    _f(tmp, u, prm, k2)
    for i in range(8):
        tmp[i] = x[i] + 0.5 * h * k2[i]
    _f(tmp, u, prm, k3)
    for i in range(8):
        tmp[i] = x[i] + h * k3[i]
    _f(tmp, u, prm, k4)
    for i in range(8):
        out[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])


@njit(cache=True)
def rk4_vjp(x, u, prm, h, lam, gx, gu, ws):
    """Reverse-mode product through one RK4 step.

    Given ``lam = dJ/dx_next`` accumulate ``dJ/dx`` into ``gx`` and
    ``dJ/du`` into ``gu``.
    """
    k1, k2, k3 = ws[0], ws[1], ws[2]
    x2, x3, x4 = ws[3], ws[4], ws[5]
    b1, b2, b3, b4 = ws[6], ws[7], ws[8], ws[9]
    tx = ws[10]
    _f(x, u, prm, k1)
    for i in range(8):
        x2[i] = x[i] + 0.5 * h * k1[i]
    _f(x2, u, prm, k2)
    for i in range(8):
        x3[i] = x[i] + 0.5 * h * k2[i]
    _f(x3, u, prm, k3)
    for i in range(8):
        x4[i] = x[i] + h * k3[i]
    for i in range(8):
        gx[i] += lam[i]
        b1[i] = h / 6.0 * lam[i]
        b2[i] = h / 3.0 * lam[i]
        b3[i] = h / 3.0 * lam[i]
        b4[i] = h / 6.0 * lam[i]
    # k4 = f(x + h k3)
    tx[:] = 0.0
    _f_vjp(x4, u, prm, b4, tx, gu)
    for i in range(8):
        gx[i] += tx[i]
        b3[i] += h * tx[i]
    # k3 = f(x + h/2 k2)
    tx[:] = 0.0
    _f_vjp(x3, u, prm, b3, tx, gu)
    for i in range(8):
        gx[i] += tx[i]
        b2[i] += 0.5 * h * tx[i]
    # k2 = f(x + h/2 k1)
    tx[:] = 0.0
    _f_vjp(x2, u, prm, b2, tx, gu)
    for i in range(8):
        gx[i] += tx[i]
        b1[i] += 0.5 * h * tx[i]
    tx[:] = 0.0
    _f_vjp(x, u, prm, b1, tx, gu)
    for i in range(8):
        gx[i] += tx[i]


@njit(cache=True)
def _f_jac(x, u, prm, fx, fu):
    thrust = u[0]
    cphi = math.cos(x[6])
    sphi = math.sin(x[6])
    cth = math.cos(x[7])
    sth = math.sin(x[7])
    fx[:] = 0.0
    fu[:] = 0.0
    fx[0, 3] = 1.0
    fx[1, 4] = 1.0
    fx[2, 5] = 1.0
    fx[3, 3] = -prm[0]
    fx[3, 6] = -thrust * sphi * sth
    fx[3, 7] = thrust * cphi * cth
    fx[4, 4] = -prm[1]
    fx[4, 6] = -thrust * cphi
    fx[5, 5] = -prm[2]
    fx[5, 6] = -thrust * sphi * cth
    fx[5, 7] = -thrust * cphi * sth
    fx[6, 6] = -1.0 / prm[3]
    fx[7, 7] = -1.0 / prm[4]
    fu[3, 0] = cphi * sth
    fu[4, 0] = -sphi
    fu[5, 0] = cphi * cth
    fu[6, 2] = prm[5] / prm[3]
    fu[7, 1] = prm[6] / prm[4]


@njit(cache=True)
def _stage_tangent(xs, u, prm, z, fx, fu, out):
    # out = fx(xs) @ z + fu(xs) @ [0 | I]
    _f_jac(xs, u, prm, fx, fu)
    for r in range(8):
        for c in range(11):
            acc = 0.0
            for k in range(8):
                acc += fx[r, k] * z[k, c]
            if c >= 8:
                acc += fu[r, c - 8]
            out[r, c] = acc


@njit(cache=True)
def rk4_jacobian(x, u, prm, h, a, b):
    """Exact Jacobians ``a = dx_next/dx`` (8x8) and ``b = dx_next/du`` (8x3)."""
    k = np.empty(8)
    x2 = np.empty(8)
    x3 = np.empty(8)
    x4 = np.empty(8)
    _f(x, u, prm, k)
    for i in range(8):
        x2[i] = x[i] + 0.5 * h * k[i]
    _f(x2, u, prm, k)
    for i in range(8):
        x3[i] = x[i] + 0.5 * h * k[i]
    _f(x3, u, prm, k)
    for i in range(8):
        x4[i] = x[i] + h * k[i]
    fx = np.empty((8, 8))
    fu = np.empty((8, 3))
    z0 = np.zeros((8, 11))
    for i in range(8):
        z0[i, i] = 1.0
    t1 = np.empty((8, 11))
    t2 = np.empty((8, 11))
    t3 = np.empty((8, 11))
    t4 = np.empty((8, 11))
    _stage_tangent(x, u, prm, z0, fx, fu, t1)
    _stage_tangent(x2, u, prm, z0 + 0.5 * h * t1, fx, fu, t2)
    _stage_tangent(x3, u, prm, z0 + 0.5 * h * t2, fx, fu, t3)
    _stage_tangent(x4, u, prm, z0 + h * t3, fx, fu, t4)
    jac = z0 + h / 6.0 * (t1 + 2.0 * t2 + 2.0 * t3 + t4)
    a[:, :] = jac[:, :8]
    b[:, :] = jac[:, 8:]


def derivative(x, u, params: UavParams = UavParams()) -> np.ndarray:
    """Continuous-time state derivative."""
    out = np.empty(N_STATE)
    _f(np.asarray(x, dtype=np.float64), np.asarray(u, dtype=np.float64), params.packed(), out)
    return out


def step(x, u, ts: float = 0.5, params: UavParams = UavParams()) -> np.ndarray:
    """Advance the state by one sample of length ``ts`` seconds."""
    if not ts > 0:
        raise ValueError("sampling time must be positive")
    out = np.empty(N_STATE)
    rk4_step(np.asarray(x, dtype=np.float64), np.asarray(u, dtype=np.float64),
             params.packed(), float(ts), out, workspace())
    return out
