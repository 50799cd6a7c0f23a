"""Predicted actuation along a trajectory by single-shooting NMPC.

The inputs over the horizon are the only decision variables; states come
from rolling the UAV model forward from the measured state.  The objective
sums, for every horizon step ``j``, a state penalty against the ``j``-th
reference point, an input penalty against the hover input and an input-rate
penalty (the input before the horizon is taken to be the hover input).

The bound-constrained problem is solved by projected Gauss-Newton steps.
Each step comes from a Riccati sweep over the linearized dynamics (the
state is augmented with the previous input to carry the rate penalty);
inputs pinned at a bound by the gradient are held fixed, the forward pass
clamps to the box, and Armijo backtracking keeps the objective
non-increasing.  Stationarity is measured with the exact gradient from an
adjoint sweep through the RK4 steps.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .dynamics import (
    N_INPUT,
    N_STATE,
    U_HOVER,
    UavParams,
    position_state,
    rk4_jacobian,
    rk4_step,
    rk4_vjp,
    workspace,
)
from .errors import EmptyTrajectory, NonFinite


@dataclass
class NmpcWeights:
    q_x: np.ndarray = field(default_factory=lambda: np.diag([5.0, 5.0, 5.0, 1.0, 1.0, 1.0, 2.0, 2.0]))
    q_u: np.ndarray = field(default_factory=lambda: np.diag([1.0, 5.0, 5.0]))
    q_du: np.ndarray = field(default_factory=lambda: np.diag([1.0, 10.0, 10.0]))
    u_ref: np.ndarray = field(default_factory=lambda: U_HOVER.copy())
    u_min: np.ndarray = field(default_factory=lambda: np.array([5.0, -0.35, -0.35]))
    u_max: np.ndarray = field(default_factory=lambda: np.array([15.0, 0.35, 0.35]))
    horizon: int = 50
    ts: float = 0.5
    tol: float = 1e-6
    max_iters: int = 300

    def __post_init__(self):
        self.q_x = _as_matrix(self.q_x, N_STATE)
        self.q_u = _as_matrix(self.q_u, N_INPUT)
        self.q_du = _as_matrix(self.q_du, N_INPUT)
        for name in ("q_x", "q_u", "q_du"):
            m = getattr(self, name)
            if not np.allclose(m, m.T):
                raise ValueError(f"{name} must be symmetric")
            if np.linalg.eigvalsh(m).min() < -1e-12:
                raise ValueError(f"{name} must be positive semidefinite")
        self.u_ref = np.asarray(self.u_ref, dtype=np.float64)
        self.u_min = np.asarray(self.u_min, dtype=np.float64)
        self.u_max = np.asarray(self.u_max, dtype=np.float64)
        if np.any(self.u_min > self.u_max):
            raise ValueError("u_min must not exceed u_max")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")

    def scaled(self, factor: float) -> NmpcWeights:
        return NmpcWeights(self.q_x * factor, self.q_u * factor, self.q_du * factor,
                           self.u_ref, self.u_min, self.u_max, self.horizon, self.ts,
                           self.tol, self.max_iters)


def _as_matrix(q, n) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    if q.ndim == 1:
        q = np.diag(q)
    if q.shape != (n, n):
        raise ValueError(f"weight must be {n}x{n} or a length-{n} diagonal")
    return q


@dataclass
class ActuationSolution:
    u_seq: np.ndarray
    x_pred: np.ndarray
    objective: float
    iterations: int
    converged: bool
    history: np.ndarray


def build_reference(points, horizon: int = 50) -> np.ndarray:
    """First ``horizon`` trajectory points as full states, last one repeated."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(pts) == 0:
        raise EmptyTrajectory("trajectory has no points")
    idx = np.minimum(np.arange(horizon), len(pts) - 1)
    refs = np.zeros((horizon, N_STATE))
    refs[:, :3] = pts[idx]
    return refs


# ---------------------------------------------------------------------------
# compiled core
# ---------------------------------------------------------------------------

_ARMIJO = 1e-4
_BOUND_EPS = 1e-10


@njit(cache=True)
def _quad_diff(m, a, b, tmp):
    n = a.shape[0]
    for i in range(n):
        tmp[i] = a[i] - b[i]
    s = 0.0
    for i in range(n):
        row = 0.0
        for j in range(n):
            row += m[i, j] * tmp[j]
        s += tmp[i] * row
    return s


@njit(cache=True)
def _add_grad(m, a, b, scale, out):
    # out += scale * 2 m (a - b)
    n = a.shape[0]
    for i in range(n):
        row = 0.0
        for j in range(n):
            row += m[i, j] * (a[j] - b[j])
        out[i] += 2.0 * scale * row


@njit(cache=True)
def _rollout(x0, U, prm, h, X, ws):
    X[0] = x0
    for j in range(U.shape[0]):
        rk4_step(X[j], U[j], prm, h, X[j + 1], ws)
    for j in range(X.shape[0]):
        for i in range(X.shape[1]):
            if not np.isfinite(X[j, i]):
                return False
    return True


@njit(cache=True)
def _objective(X, U, refs, qx, qu, qdu, u_ref, tmp):
    total = 0.0
    for j in range(U.shape[0]):
        total += _quad_diff(qx, X[j], refs[j], tmp)
        total += _quad_diff(qu, u_ref, U[j], tmp)
        total += _quad_diff(qdu, U[j], u_ref if j == 0 else U[j - 1], tmp)
    return total


@njit(cache=True)
def _gradient(X, U, refs, qx, qu, qdu, u_ref, prm, h, G, ws):
    n = U.shape[0]
    lam = ws[11]
    gx = np.empty(N_STATE)
    lam[:] = 0.0  # the state after the last input is not penalized
    for j in range(n - 1, -1, -1):
        gx[:] = 0.0
        G[j, :] = 0.0
        rk4_vjp(X[j], U[j], prm, h, lam, gx, G[j], ws)
        _add_grad(qu, U[j], u_ref, 1.0, G[j])
        _add_grad(qdu, U[j], u_ref if j == 0 else U[j - 1], 1.0, G[j])
        if j + 1 < n:
            _add_grad(qdu, U[j + 1], U[j], -1.0, G[j])
        _add_grad(qx, X[j], refs[j], 1.0, gx)
        lam[:] = gx


@njit(cache=True)
def _pg_norm(u, g, lo, hi):
    worst = 0.0
    for i in range(u.shape[0]):
        c = i % N_INPUT
        v = min(max(u[i] - g[i], lo[c]), hi[c]) - u[i]
        worst = max(worst, abs(v))
    return worst


@njit(cache=True)
def _pinned(U, G, lo, hi, pin):
    for j in range(U.shape[0]):
        for i in range(N_INPUT):
            pin[j, i] = ((U[j, i] <= lo[i] + _BOUND_EPS and G[j, i] > 0.0)
                         or (U[j, i] >= hi[i] - _BOUND_EPS and G[j, i] < 0.0))


@njit(cache=True)
def _backward(X, U, refs, qx, qu, qdu, u_ref, prm, h, pin, kff, kfb):
    """Gauss-Newton Riccati sweep on the state augmented with the previous input.

    Fills the feed-forward steps ``kff`` (n, 3) and feedback gains ``kfb``
    (n, 3, 11); returns the linear and quadratic terms of the predicted
    objective change for a unit step.
    """
    n = U.shape[0]
    nz = N_STATE + N_INPUT
    vz = np.zeros(nz)
    vzz = np.zeros((nz, nz))
    a = np.empty((N_STATE, N_STATE))
    b = np.empty((N_STATE, N_INPUT))
    fz = np.zeros((nz, nz))
    fu = np.zeros((nz, N_INPUT))
    for i in range(N_INPUT):
        fu[N_STATE + i, i] = 1.0
    lz = np.empty(nz)
    lu = np.empty(N_INPUT)
    lzz = np.zeros((nz, nz))
    luu = 2.0 * (qu + qdu)
    luz = np.zeros((N_INPUT, nz))
    lzz[:N_STATE, :N_STATE] = 2.0 * qx
    lzz[N_STATE:, N_STATE:] = 2.0 * qdu
    luz[:, N_STATE:] = -2.0 * qdu
    d1 = 0.0
    d2 = 0.0
    for j in range(n - 1, -1, -1):
        rk4_jacobian(X[j], U[j], prm, h, a, b)
        fz[:N_STATE, :N_STATE] = a
        fu[:N_STATE, :] = b
        prev = u_ref if j == 0 else U[j - 1]
        du = U[j] - prev
        lz[:N_STATE] = 2.0 * (qx @ (X[j] - refs[j]))
        lz[N_STATE:] = -2.0 * (qdu @ du)
        lu[:] = 2.0 * (qu @ (U[j] - u_ref)) + 2.0 * (qdu @ du)
        qz = lz + fz.T @ vz
        qu_ = lu + fu.T @ vz
        vzz_fz = vzz @ fz
        vzz_fu = vzz @ fu
        qzz = lzz + fz.T @ vzz_fz
        quu = luu + fu.T @ vzz_fu
        quz = luz + fu.T @ vzz_fz
        # reduced solve on the free inputs
        free = np.empty(N_INPUT, np.int64)
        nf = 0
        for i in range(N_INPUT):
            if not pin[j, i]:
                free[nf] = i
                nf += 1
        kff[j, :] = 0.0
        kfb[j, :, :] = 0.0
        if nf > 0:
            hff = np.empty((nf, nf))
            rhs = np.empty((nf, 1 + nz))
            for r in range(nf):
                for c in range(nf):
                    hff[r, c] = quu[free[r], free[c]]
                rhs[r, 0] = -qu_[free[r]]
                for c in range(nz):
                    rhs[r, 1 + c] = -quz[free[r], c]
            sol = np.linalg.solve(hff, rhs)
            for r in range(nf):
                kff[j, free[r]] = sol[r, 0]
                for c in range(nz):
                    kfb[j, free[r], c] = sol[r, 1 + c]
        k = kff[j]
        K = kfb[j]
        d1 += k @ qu_
        d2 += 0.5 * (k @ (quu @ k))
        vz = qz + K.T @ (quu @ k) + K.T @ qu_ + quz.T @ k
        vzz = qzz + K.T @ quu @ K + K.T @ quz + quz.T @ K
        vzz = 0.5 * (vzz + vzz.T)
    return d1, d2


@njit(cache=True)
def _forward(x0, X, U, kff, kfb, step, lo, hi, prm, h, u_ref, Xn, Un, ws):
    n = U.shape[0]
    dz = np.empty(N_STATE + N_INPUT)
    Xn[0] = x0
    for j in range(n):
        for i in range(N_STATE):
            dz[i] = Xn[j, i] - X[j, i]
        for i in range(N_INPUT):
            dz[N_STATE + i] = 0.0 if j == 0 else Un[j - 1, i] - U[j - 1, i]
        for i in range(N_INPUT):
            v = U[j, i] + step * kff[j, i]
            for c in range(N_STATE + N_INPUT):
                v += kfb[j, i, c] * dz[c]
            Un[j, i] = min(max(v, lo[i]), hi[i])
        rk4_step(Xn[j], Un[j], prm, h, Xn[j + 1], ws)
    for j in range(n + 1):
        for i in range(N_STATE):
            if not np.isfinite(Xn[j, i]):
                return False
    return True


@njit(cache=True)
def _solve(x0, refs, U, qx, qu, qdu, u_ref, lo, hi, prm, h, tol, max_iters):
    n = U.shape[0]
    ws = np.empty((12, N_STATE))
    tmp = np.empty(N_STATE)
    X = np.empty((n + 1, N_STATE))
    Xn = np.empty_like(X)
    Un = np.empty_like(U)
    G = np.empty_like(U)
    pin = np.zeros(U.shape, np.bool_)
    kff = np.zeros((n, N_INPUT))
    kfb = np.zeros((n, N_INPUT, N_STATE + N_INPUT))
    history = np.empty(max_iters + 1)

    if not _rollout(x0, U, prm, h, X, ws):
        return X, np.inf, 0, False, history[:0].copy(), False
    J = _objective(X, U, refs, qx, qu, qdu, u_ref, tmp)
    _gradient(X, U, refs, qx, qu, qdu, u_ref, prm, h, G, ws)
    history[0] = J
    converged = _pg_norm(U.reshape(n * N_INPUT), G.reshape(n * N_INPUT), lo, hi) <= tol
    it = 0
    while not converged and it < max_iters:
        _pinned(U, G, lo, hi, pin)
        d1, d2 = _backward(X, U, refs, qx, qu, qdu, u_ref, prm, h, pin, kff, kfb)
        step = 1.0
        accepted = False
        Jn = J
        for _ in range(40):
            if _forward(x0, X, U, kff, kfb, step, lo, hi, prm, h, u_ref, Xn, Un, ws):
                Jn = _objective(Xn, Un, refs, qx, qu, qdu, u_ref, tmp)
                predicted = step * d1 + step * step * d2
                if Jn <= J + _ARMIJO * min(predicted, 0.0) and Jn <= J:
                    accepted = True
                    break
            step *= 0.5
        if not accepted:
            break
        stalled = Jn == J
        U[:] = Un
        X[:] = Xn
        J = Jn
        it += 1
        history[it] = J
        _gradient(X, U, refs, qx, qu, qdu, u_ref, prm, h, G, ws)
        converged = _pg_norm(U.reshape(n * N_INPUT), G.reshape(n * N_INPUT), lo, hi) <= tol
        if stalled:
            break
    return X, J, it, converged, history[: it + 1].copy(), True


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------

def objective(x0, u_seq, refs, weights: NmpcWeights, params: UavParams = UavParams()) -> float:
    """Shooting objective of an input sequence."""
    U = np.ascontiguousarray(u_seq, dtype=np.float64).reshape(-1, N_INPUT)
    X = np.empty((len(U) + 1, N_STATE))
    if not _rollout(np.asarray(x0, dtype=np.float64), U, params.packed(), weights.ts, X,
                    workspace()):
        raise NonFinite("rollout diverged")
    return float(_objective(X, U, np.asarray(refs, dtype=np.float64), weights.q_x,
                            weights.q_u, weights.q_du, weights.u_ref, np.empty(N_STATE)))


def gradient(x0, u_seq, refs, weights: NmpcWeights, params: UavParams = UavParams()) -> np.ndarray:
    """Adjoint gradient of :func:`objective` with respect to the inputs."""
    U = np.ascontiguousarray(u_seq, dtype=np.float64).reshape(-1, N_INPUT)
    X = np.empty((len(U) + 1, N_STATE))
    prm = params.packed()
    ws = workspace()
    if not _rollout(np.asarray(x0, dtype=np.float64), U, prm, weights.ts, X, ws):
        raise NonFinite("rollout diverged")
    G = np.empty_like(U)
    _gradient(X, U, np.asarray(refs, dtype=np.float64), weights.q_x, weights.q_u,
              weights.q_du, weights.u_ref, prm, weights.ts, G, ws)
    return G


def rollout(x0, u_seq, ts: float = 0.5, params: UavParams = UavParams()) -> np.ndarray:
    U = np.ascontiguousarray(u_seq, dtype=np.float64).reshape(-1, N_INPUT)
    X = np.empty((len(U) + 1, N_STATE))
    _rollout(np.asarray(x0, dtype=np.float64), U, params.packed(), ts, X, workspace())
    return X


def solve(x0, refs, weights: NmpcWeights | None = None,
          params: UavParams = UavParams()) -> ActuationSolution:
    """Optimal bounded inputs tracking ``refs`` from the measured state ``x0``.

    Starts from the hover input held over the whole horizon.

    Raises
    ------
    NonFinite
        If the model blows up during the rollout.
    """
    weights = NmpcWeights() if weights is None else weights
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.shape != (N_STATE,) or not np.all(np.isfinite(x0)):
        raise ValueError("x0 must be a finite 8-vector")
    refs = np.ascontiguousarray(refs, dtype=np.float64)
    if refs.shape[1] == 3:
        refs = build_reference(refs, len(refs))
    U = np.tile(np.clip(weights.u_ref, weights.u_min, weights.u_max), (len(refs), 1))
    X, J, iters, converged, history, ok = _solve(
        x0, refs, U, weights.q_x, weights.q_u, weights.q_du, weights.u_ref,
        weights.u_min, weights.u_max, params.packed(), float(weights.ts),
        float(weights.tol), int(weights.max_iters))
    if not ok or not np.isfinite(J):
        raise NonFinite("NMPC rollout produced non-finite states")
    return ActuationSolution(U, X, float(J), int(iters), bool(converged), history)


def solve_for_trajectory(x0, points, weights: NmpcWeights | None = None,
                         params: UavParams = UavParams()) -> ActuationSolution:
    weights = NmpcWeights() if weights is None else weights
    return solve(x0, build_reference(points, weights.horizon), weights, params)


__all__ = [
    "NmpcWeights",
    "ActuationSolution",
    "build_reference",
    "objective",
    "gradient",
    "rollout",
    "solve",
    "solve_for_trajectory",
    "position_state",
]
