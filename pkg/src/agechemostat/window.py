"""Local solver on one time window.

The window problem is reduced to a Volterra system for the pair (y, z):
``y`` is the part of the birth integral produced by cells born inside the
window and ``z = S - S0``.  The system is a contraction on a ball of radius
``R = min(S0, S_in - S0) / 2`` when the window is short enough.  It is
solved by Picard iteration on the time grid.  The density is then rebuilt
along characteristics.

Age and time share one grid spacing, so characteristics map nodes to
nodes. All quadratures are trapezoidal.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractionViolation, ConvergenceError, DomainError, GridError, NumericError
from .model import ChemostatModel
from .signal import DilutionSignal
from .state import ChemostatState, l1_norm

logger = logging.getLogger(__name__)

MAX_ITER = 200


def window_constant(model: ChemostatModel) -> float:
    """The constant K in the guaranteed window length."""
    c = model.constants
    M, L, S_in = c.M_global, c.L_mu, model.S_in
    kk, qq = model.k_sup, model.q_sup
    return (1.0 + (M / S_in + L) * (qq + (kk + M * qq) * kk)
            + (M + L * S_in) * (M * qq + kk))


def max_window(model: ChemostatModel, S0: float, r: float) -> float:
    """Guaranteed window length min(S0, S_in - S0) / (2 K S_in (r + 1)),
    clamped to (0, 1].  ``r`` is the initial mass plus the sup of D over the
    next unit of time."""
    if not 0 < S0 < model.S_in:
        raise DomainError(f"S0 must lie in (0, {model.S_in:g}), got {S0!r}")
    if not r >= 0:
        raise DomainError("r must be >= 0")
    K = window_constant(model)
    delta = min(S0, model.S_in - S0) / (2.0 * K * model.S_in * (r + 1.0))
    return min(delta, 1.0)


def _steps(delta: float, dt: float) -> int:
    n = delta / dt
    m = int(round(n))
    if m < 1 or abs(n - m) > 1e-9 * max(1.0, n):
        raise GridError(f"window length {delta!r} is not a positive multiple of dt={dt!r}")
    return m


@dataclass(frozen=True, eq=False)
class WindowKernels:
    """Forcing terms of the window problem on the time grid ``j * dt``."""

    dt: float
    n: int
    t0: float
    S0: float
    R: float
    gbar: np.ndarray       # birth integral of the surviving initial cohort
    hbar: np.ndarray       # consumption integral of the same cohort
    b: np.ndarray          # exp(-int_{t0}^{t0+t} D)
    ktilde: np.ndarray     # on the age grid
    qtilde: np.ndarray

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.n + 1) * self.dt


def window_kernels(model: ChemostatModel, D: DilutionSignal, state0: ChemostatState,
                   delta: float, dt: float, t0: float = 0.0) -> WindowKernels:
    """Kernels for a window of length ``delta`` starting at absolute time
    ``t0`` (the input seen by the window is ``D`` shifted by ``t0``)."""
    if delta > 1.0 + 1e-12:
        raise DomainError("window length must not exceed 1")
    n = _steps(delta, dt)
    f0 = state0.f
    if abs(f0.da - dt) > 1e-12 * dt:
        raise GridError(f"age spacing {f0.da!r} must equal dt={dt!r}")
    na = f0.n - 1
    if n > na:
        raise GridError("window longer than the age grid")
    rates = model.rates_on_grid(f0.da, f0.n)
    B, f = rates.B, f0.values
    gbar = np.empty(n + 1)
    hbar = np.empty(n + 1)
    for j in range(n + 1):
        m = na - j                              # u runs over nodes 0..m
        if m < 1:
            gbar[j] = hbar[j] = 0.0
            continue
        w = f[: m + 1] * np.exp(B[: m + 1] - B[j: j + m + 1])
        w[0] *= 0.5
        w[m] *= 0.5
        gbar[j] = dt * np.dot(w, rates.k[j: j + m + 1])
        hbar[j] = dt * np.dot(w, rates.q[j: j + m + 1])
    times = [t0 + j * dt for j in range(n + 1)]
    b = np.exp(-np.array([D.integral(t0, t) for t in times]))
    R = 0.5 * min(state0.S, model.S_in - state0.S)
    return WindowKernels(dt=dt, n=n, t0=t0, S0=state0.S, R=R, gbar=gbar, hbar=hbar,
                         b=b, ktilde=rates.ktilde, qtilde=rates.qtilde)


def _trap_conv(kern: np.ndarray, u: np.ndarray, dt: float) -> np.ndarray:
    """out[j] = trapezoid over a in [0, t_j] of kern(a) u(t_j - a)."""
    n = u.size - 1
    full = np.convolve(kern[: n + 1], u)[: n + 1]
    out = full - 0.5 * (kern[0] * u + kern[: n + 1] * u[0])
    out[0] = 0.0
    return dt * out


def _cumtrapz(v: np.ndarray, dt: float) -> np.ndarray:
    out = np.zeros_like(v)
    out[1:] = np.cumsum(0.5 * dt * (v[1:] + v[:-1]))
    return out


def apply_T(model: ChemostatModel, kernels: WindowKernels, y, z):
    """One application of the window operator; returns ``(T1, T2)``."""
    K = kernels
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    norm = np.max(np.abs(y)) + np.max(np.abs(z))
    if norm > K.R * (1 + 1e-12):
        logger.warning("iterate outside B_R: norm %.3g > R %.3g", norm, K.R)
    mu = model.mu(K.S0 + z)
    u = mu * (y + K.gbar)
    T1 = _trap_conv(K.ktilde, u, K.dt)
    inner = _trap_conv(K.qtilde, u, K.dt)
    outer = _cumtrapz(mu * (K.hbar + inner), K.dt)
    T2 = (model.S_in - K.S0) * (1.0 - K.b) - K.b * outer
    if not (np.all(np.isfinite(T1)) and np.all(np.isfinite(T2))):
        raise NumericError("non-finite value in the window operator")
    return T1, T2


def contraction_bound(model: ChemostatModel, kernels: WindowKernels) -> float:
    """Lipschitz constant of the window operator on B_R from the explicit
    estimate with the window's own kernel norms."""
    K = kernels
    c = model.constants
    M, L = c.M_global, c.L_mu
    delta = K.n * K.dt
    kt, qt = np.max(K.ktilde), np.max(K.qtilde)
    g, h = np.max(np.abs(K.gbar)), np.max(np.abs(K.hbar))
    Ly = M * (kt + M * qt * delta) * delta
    Lz = L * (h + (M * qt * delta + kt) * (K.R + g)) * delta
    return float(max(Ly, Lz))


@dataclass(frozen=True, eq=False)
class WindowSolution:
    delta: float
    t0: float
    dt: float
    y: np.ndarray
    z: np.ndarray
    x: np.ndarray          # boundary values f(t_j, 0); x[0] = f0(0)
    S: np.ndarray
    f: np.ndarray          # density snapshots, shape (n + 1, n_age)
    iterations: int
    update_norm: float
    ratio: float           # last update norm / previous update norm
    theory_ratio: float
    R: float

    @property
    def n(self) -> int:
        return self.y.size - 1

    def terminal_state(self) -> ChemostatState:
        return ChemostatState.from_arrays(self.f[-1], self.S[-1], self.dt)


def _density_nodes(rates, f0: np.ndarray, x: np.ndarray, b: np.ndarray) -> np.ndarray:
    """f(t_j, a_i) on the grid by the characteristics formula."""
    n = x.size - 1
    na = f0.size - 1
    B = rates.B
    out = np.empty((n + 1, na + 1))
    out[0] = f0
    surv0 = np.exp(-B)
    for j in range(1, n + 1):
        row = out[j]
        # a >= t: transported initial profile
        row[j:] = f0[: na + 1 - j] * b[j] * np.exp(B[: na + 1 - j] - B[j:])
        # a < t: cells born at t - a inside the window
        i = np.arange(min(j, na + 1))
        row[i] = x[j - i] * (b[j] / b[j - i]) * surv0[i]
    return out


def solve_window(model: ChemostatModel, D: DilutionSignal, state0: ChemostatState,
                 delta: float, dt: float, tol_fp: float | None = None,
                 max_iter: int = MAX_ITER, t0: float = 0.0) -> WindowSolution:
    """Picard iteration for the window fixed point, then reconstruction.

    Raises
    ------
    ConvergenceError
        ``max_iter`` sweeps without reaching ``tol_fp``.
    ContractionViolation
        An iterate left the ball B_R by more than 10 %.
    """
    K = window_kernels(model, D, state0, delta, dt, t0)
    tol = 1e-12 * (1.0 + K.R) if tol_fp is None else tol_fp
    y = np.zeros(K.n + 1)
    z = np.zeros(K.n + 1)
    prev = None
    ratio = 0.0
    upd = math.inf
    for it in range(1, max_iter + 1):
        y1, z1 = apply_T(model, K, y, z)
        upd = float(np.max(np.abs(y1 - y)) + np.max(np.abs(z1 - z)))
        if prev is not None and prev > 0:
            ratio = upd / prev
        prev = upd
        y, z = y1, z1
        if np.max(np.abs(y)) + np.max(np.abs(z)) > 1.1 * K.R:
            raise ContractionViolation(
                f"Picard iterate left B_R (R={K.R:.3g}) at sweep {it}; "
                f"refine dt or shorten the window", t_start=t0, ratio=ratio)
        if upd <= tol:
            break
    else:
        raise ConvergenceError(
            f"no convergence in {max_iter} sweeps (last update {upd:.3g}, "
            f"ratio {ratio:.3g})", t_start=t0, ratio=ratio)
    rates = model.rates_on_grid(state0.f.da, state0.f.n)
    S = K.S0 + z
    x = model.mu(S) * K.b * (K.gbar + y)
    x[0] = state0.f.values[0]
    f = _density_nodes(rates, state0.f.values, x, K.b)
    return WindowSolution(delta=K.n * dt, t0=t0, dt=dt, y=y, z=z, x=x, S=S, f=f,
                          iterations=it, update_norm=upd, ratio=ratio,
                          theory_ratio=contraction_bound(model, K), R=K.R)


def reconstruct_density(model: ChemostatModel, D: DilutionSignal, x, f0, t, a,
                        dt: float, t0: float = 0.0):
    """Density at window time ``t`` (relative to ``t0``) and ages ``a``.

    ``x`` is the boundary series on the grid ``j * dt`` and ``f0`` the
    window's initial profile.  Between time nodes ``x`` is interpolated
    linearly.
    """
    x = np.asarray(x, dtype=float)
    t_end = (x.size - 1) * dt
    if not 0 <= t <= t_end * (1 + 1e-12):
        raise DomainError(f"t={t!r} outside the window [0, {t_end:g}]")
    a = np.atleast_1d(np.asarray(a, dtype=float))
    if np.any(a < 0):
        raise DomainError("ages must be >= 0")
    out = np.empty_like(a)
    old = a >= t
    Dt = D.integral(t0, t0 + t)
    if np.any(old):
        ao = a[old]
        out[old] = (f0(ao - t) * math.exp(-Dt)
                    * np.exp(-(model.beta.cumulative(ao) - model.beta.cumulative(ao - t))))
    if np.any(~old):
        ay = a[~old]
        tj = np.arange(x.size) * dt
        xb = np.interp(t - ay, tj, x)
        Dy = np.array([D.integral(t0 + t - ai, t0 + t) for ai in ay])
        out[~old] = xb * np.exp(-Dy) * np.exp(-model.beta.cumulative(ay))
    return out if out.size > 1 else float(out[0])
