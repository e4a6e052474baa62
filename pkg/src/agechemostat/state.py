"""Elements of the state space: a positive age density paired with a
substrate level, the L1-based metric, and a membership test."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import optimize

from .errors import ConstructionError, DomainError, GridError
from .model import AgeProfile, ChemostatModel
from .report import Report

TOL_COMPAT = 1e-8


@dataclass(frozen=True, eq=False)
class ChemostatState:
    f: AgeProfile
    S: float

    def __post_init__(self):
        if not math.isfinite(self.S):
            raise DomainError("substrate level must be finite")
        object.__setattr__(self, "S", float(self.S))

    @property
    def mass(self) -> float:
        return l1_norm(self.f)

    @classmethod
    def from_arrays(cls, f, S, da):
        return cls(AgeProfile(da, f, "zero"), S)


def trapz(y, h, axis=-1):
    """Composite trapezoid on a uniform grid of spacing ``h``."""
    y = np.asarray(y, dtype=float)
    n = y.shape[axis]
    if n < 2:
        return np.zeros(np.delete(y.shape, axis)) if y.ndim > 1 else 0.0
    total = y.sum(axis=axis) - 0.5 * (np.take(y, 0, axis) + np.take(y, -1, axis))
    return h * total


def trapz_error_estimate(y, h) -> float:
    """|I_h - I_2h| for the trapezoid rule; conservative (about three times
    the asymptotic error of I_h)."""
    y = np.asarray(y, dtype=float)
    n = y.size
    if n < 3:
        return 0.0
    m = (n - 1) // 2 * 2
    fine = trapz(y[: m + 1], h)
    coarse = trapz(y[: m + 1 : 2], 2 * h)
    return float(abs(fine - coarse))


def l1_norm(f: AgeProfile) -> float:
    """Trapezoid L1 norm over the grid; the zero tail adds nothing."""
    return float(trapz(np.abs(f.values), f.da))


def _same_grid(p1: AgeProfile, p2: AgeProfile) -> bool:
    return p1.n == p2.n and abs(p1.da - p2.da) <= 1e-12 * p1.da


def metric(s1: ChemostatState, s2: ChemostatState, resample: bool = False) -> float:
    """||f1 - f2||_1 + |S1 - S2|."""
    f1, f2 = s1.f, s2.f
    if not _same_grid(f1, f2):
        if not resample:
            raise GridError("states live on different grids (pass resample=True)")
        da = min(f1.da, f2.da)
        n = int(round(max(f1.a_max, f2.a_max) / da)) + 1
        f1, f2 = f1.resample(da, n), f2.resample(da, n)
    return float(trapz(np.abs(f1.values - f2.values), f1.da)) + abs(s1.S - s2.S)


def renewal_gap(model: ChemostatModel, f: AgeProfile, S: float):
    """Return (f(0) - mu(S) int k f, quadrature error estimate of that)."""
    rates = model.rates_on_grid(f.da, f.n)
    mu = float(model.mu(S))
    kf = rates.k * f.values
    gap = float(f.values[0] - mu * trapz(kf, f.da))
    return gap, mu * trapz_error_estimate(kf, f.da)


def default_eps_tail(f: AgeProfile) -> float:
    return 1e-10 * float(np.max(np.abs(f.values)))


def check_membership(state: ChemostatState, model: ChemostatModel,
                     tol_compat: float = TOL_COMPAT, eps_tail: float | None = None,
                     add_quadrature: bool = True) -> Report:
    """Finite surrogate for membership in the state space.

    Four checks: strictly positive nodes (a trailing run of exact zeros
    counts as the zero continuation), tail node below ``eps_tail``,
    ``0 < S < S_in``, and the compatibility residual
    ``|f(0) - mu(S) int k f da|`` within ``tol_compat`` (plus the trapezoid
    error estimate unless ``add_quadrature`` is false).
    """
    f = state.f.values
    eps = default_eps_tail(state.f) if eps_tail is None else eps_tail
    rep = Report("state membership")
    # a trailing run of exact zeros is the zero extension written on the grid
    support = np.flatnonzero(f != 0)
    end = int(support[-1]) + 1 if support.size else 0
    bad = np.flatnonzero(~(f[:end] > 0))
    if end == 0 or np.any(np.isnan(f)):
        bad = np.array([0])
    rep.add("positivity", bad.size == 0,
            detail=f"first nonpositive node {int(bad[0])}" if bad.size else "")
    rep.add("tail decay", f[-1] <= eps, value=float(f[-1]), detail=f"eps_tail={eps:.3g}")
    rep.add("S range", 0 < state.S < model.S_in, value=state.S,
            detail=f"need 0 < S < {model.S_in:g}")
    if 0 <= state.S:
        gap, quad = renewal_gap(model, state.f, state.S)
        tol = tol_compat + (quad if add_quadrature else 0.0)
        rep.add("compatibility", abs(gap) <= tol, value=abs(gap), detail=f"tol={tol:.3g}")
        rep.values["compat_residual"] = abs(gap)
    else:
        rep.add("compatibility", False, detail="negative substrate")
    return rep


def solve_exponential_rate(model: ChemostatModel, S0: float) -> float:
    """lambda > 0 with mu(S0) * int_0^inf k(a) exp(-lambda a) da = 1."""
    mu = float(model.mu(S0))
    fun = lambda lam: mu * model.k.laplace(lam) - 1.0
    lo, hi = 1e-8, 1e8
    flo, fhi = fun(lo), fun(hi)
    if not (flo > 0 > fhi):
        raise ConstructionError(
            f"no compatible exponential profile at S0={S0:g}: "
            f"mu(S0) * Laplace(k) - 1 does not change sign on [{lo:g}, {hi:g}]")
    return optimize.brentq(fun, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps,
                           maxiter=500)


def make_compatible_exponential(model: ChemostatModel, S0: float, C: float, da: float,
                                a_max: float | None = None, horizon: float = 0.0,
                                eps_tail: float | None = None) -> ChemostatState:
    """State f(a) = C exp(-lambda a) compatible with the renewal condition.

    Without ``a_max`` the grid covers ``[0, A0 + horizon]`` where ``A0`` is
    the age at which the profile falls to ``eps_tail`` (default ``1e-10 C``).
    """
    if not 0 < S0 < model.S_in:
        raise DomainError(f"S0 must lie in (0, {model.S_in:g}), got {S0!r}")
    if not (C > 0 and math.isfinite(C)):
        raise DomainError("C must be finite and > 0")
    lam = solve_exponential_rate(model, S0)
    if a_max is None:
        eps = 1e-10 * C if eps_tail is None else eps_tail
        a_max = math.log(C / eps) / lam + horizon
    n = int(math.ceil(a_max / da - 1e-9)) + 1
    a = np.arange(n) * da
    return ChemostatState(AgeProfile(da, C * np.exp(-lam * a), "zero"), S0)


# --------------------------------------------------------------------------
# snapshot files
# --------------------------------------------------------------------------

def write_snapshot(path, state: ChemostatState, t: float | None = None) -> Path:
    """Comma-separated ``a,f`` rows under one ``#`` header line that carries
    S and the grid (17 significant digits, read back bit-exactly)."""
    path = Path(path)
    head = f"# a,f S={state.S:.17g} da={state.f.da:.17g} n={state.f.n}"
    if t is not None:
        head += f" t={t:.17g}"
    rows = [f"{i * state.f.da:.17g},{v:.17g}" for i, v in enumerate(state.f.values)]
    path.write_text(head + "\n" + "\n".join(rows) + "\n")
    return path


def read_snapshot(path) -> ChemostatState:
    lines = Path(path).read_text().splitlines()
    meta = dict(tok.split("=", 1) for tok in lines[0].lstrip("#").split() if "=" in tok)
    vals = np.array([float(line.split(",")[1]) for line in lines[1:] if line.strip()])
    if len(vals) != int(meta["n"]):
        raise GridError(f"{path}: expected {meta['n']} rows, found {len(vals)}")
    return ChemostatState(AgeProfile(float(meta["da"]), vals, "zero"), float(meta["S"]))
