"""Independent reference solutions.

* ``moment_ode_oracle``: with constant k, beta and q, the total mass N and
  the substrate S solve a closed 2-ODE system, integrated here by classical
  RK4.
* ``upwind_pde_oracle``: first-order upwind method of lines on the PDE
  itself, with explicit Euler for decay and substrate.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, GridError, StabilityError
from .model import ChemostatModel, GrowthKinetics
from .signal import DilutionSignal
from .state import ChemostatState, trapz


@dataclass(frozen=True)
class MomentOdeParams:
    k0: float
    beta0: float
    q0: float
    kinetics: GrowthKinetics
    S_in: float
    D: DilutionSignal

    def __post_init__(self):
        if not (self.k0 > 0 and self.q0 > 0 and self.beta0 >= 0):
            raise DomainError("need k0 > 0, q0 > 0 and beta0 >= 0")

    @classmethod
    def from_model(cls, model: ChemostatModel, D: DilutionSignal) -> "MomentOdeParams":
        if not model.has_constant_rates:
            raise DomainError("the moment reduction needs constant beta, k and q")
        return cls(float(model.k.values[0]), float(model.beta.values[0]),
                   float(model.q.values[0]), model.kinetics, model.S_in, D)


@dataclass(frozen=True)
class MomentSeries:
    t: np.ndarray
    N: np.ndarray
    S: np.ndarray


def _rk4(rhs, y, t, h):
    k1 = rhs(t, y)
    k2 = rhs(t + h / 2, y + h / 2 * k1)
    k3 = rhs(t + h / 2, y + h / 2 * k2)
    k4 = rhs(t + h, y + h * k3)
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def moment_ode_oracle(params: MomentOdeParams, N0: float, S0: float, T: float,
                      dt: float, t0: float = 0.0) -> MomentSeries:
    """RK4 for N' = (mu(S) k0 - D - beta0) N, S' = D (S_in - S) - mu(S) q0 N.

    Output on ``j * dt``; steps crossing a jump of D are split there, and D
    is frozen at its value on each piece.
    """
    if not dt > 0:
        raise DomainError("dt must be > 0")
    p = params
    n = int(round(T / dt))
    if n < 1:
        raise DomainError("horizon must cover at least one step")
    t_out = np.arange(n + 1) * dt
    N = np.empty(n + 1)
    S = np.empty(n + 1)
    y = np.array([N0, S0], dtype=float)
    N[0], S[0] = y
    for j in range(n):
        a, b = t0 + t_out[j], t0 + t_out[j + 1]
        cuts = [a] + [c for c in p.D.breakpoints if a < c < b] + [b]
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            d = p.D.at(lo)

            def rhs(_t, v, d=d):
                mu = p.kinetics.rate(v[1])
                return np.array([(mu * p.k0 - d - p.beta0) * v[0],
                                 d * (p.S_in - v[1]) - mu * p.q0 * v[0]])

            y = _rk4(rhs, y, lo, hi - lo)
        N[j + 1], S[j + 1] = y
    return MomentSeries(t_out, N, S)


@dataclass(frozen=True)
class UpwindResult:
    dt: float
    t: np.ndarray
    S: np.ndarray
    N: np.ndarray
    x: np.ndarray
    f_final: np.ndarray
    f: np.ndarray | None = None   # full history when requested

    def terminal_state(self) -> ChemostatState:
        return ChemostatState.from_arrays(self.f_final, self.S[-1], self.dt)


def upwind_pde_oracle(model: ChemostatModel, D: DilutionSignal, state0: ChemostatState,
                      T: float, dt: float, t0: float = 0.0,
                      keep_density: bool = False) -> UpwindResult:
    """First-order upwind scheme with ``da == dt``.

    Interior update ``f_i <- f_{i-1} (1 - dt (beta_i + D^n))``.  The
    boundary cell solves the discrete renewal condition at the new time.
    The substrate takes an explicit Euler step.
    """
    if abs(state0.f.da - dt) > 1e-12 * dt:
        raise GridError("upwind oracle needs da == dt")
    na = state0.f.n
    rates = model.rates_on_grid(dt, na)
    beta, k, q = rates.beta, rates.k, rates.q
    n = int(round(T / dt))
    times = t0 + np.arange(n + 1) * dt
    supD = D.sup(t0, times[-1]) if n > 0 else D.at(t0)
    if dt * (np.max(beta) + supD) >= 1.0:
        raise StabilityError("dt (||beta|| + sup D) must be < 1")
    f = state0.f.values.copy()
    S = np.empty(n + 1)
    N = np.empty(n + 1)
    x = np.empty(n + 1)
    hist = np.empty((n + 1, na)) if keep_density else None
    S[0], N[0], x[0] = state0.S, trapz(f, dt), f[0]
    if keep_density:
        hist[0] = f
    w = np.full(na, dt)
    w[0] = w[-1] = 0.5 * dt
    for j in range(n):
        Dn = D.at(times[j])
        mu = float(model.mu(S[j]))
        Snew = S[j] + dt * (Dn * (model.S_in - S[j]) - mu * np.dot(w * q, f))
        new = np.empty_like(f)
        new[1:] = f[:-1] * (1.0 - dt * (beta[1:] + Dn))
        mu1 = float(model.mu(Snew))
        rest = np.dot(w[1:] * k[1:], new[1:])
        new[0] = mu1 * rest / (1.0 - mu1 * w[0] * k[0])
        f = new
        S[j + 1], N[j + 1], x[j + 1] = Snew, trapz(f, dt), f[0]
        if keep_density:
            hist[j + 1] = f
    return UpwindResult(dt=dt, t=times, S=S, N=N, x=x, f_final=f, f=hist)
