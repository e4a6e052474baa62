"""Biological model data: growth kinetics, age-dependent rate profiles and
the constants derived from them."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np
from scipy import optimize

from .errors import DomainError, GridError
from .report import Report

EXTENSIONS = ("zero", "constant")


# --------------------------------------------------------------------------
# growth kinetics
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Monod:
    """mu(S) = mu_max S / (K_S + S)."""

    mu_max: float
    K_S: float

    kind = "monod"

    def __post_init__(self):
        _require_positive(mu_max=self.mu_max, K_S=self.K_S)

    def rate(self, S):
        S = np.asarray(S, dtype=float)
        return self.mu_max * S / (self.K_S + S)

    def slope(self, S):
        S = np.asarray(S, dtype=float)
        return self.mu_max * self.K_S / (self.K_S + S) ** 2

    def sup(self) -> float:
        return float(self.mu_max)

    def params(self) -> dict:
        return {"mu_max": self.mu_max, "K_S": self.K_S}


@dataclass(frozen=True)
class Haldane:
    """mu(S) = mu_max S / (K_P + S + S^2 / K_I), substrate-inhibited."""

    mu_max: float
    K_P: float
    K_I: float

    kind = "haldane"

    def __post_init__(self):
        _require_positive(mu_max=self.mu_max, K_P=self.K_P, K_I=self.K_I)

    def rate(self, S):
        S = np.asarray(S, dtype=float)
        return self.mu_max * S / (self.K_P + S + S * S / self.K_I)

    def slope(self, S):
        S = np.asarray(S, dtype=float)
        den = self.K_P + S + S * S / self.K_I
        return self.mu_max * (self.K_P - S * S / self.K_I) / den ** 2

    @property
    def S_star(self) -> float:
        return math.sqrt(self.K_P * self.K_I)

    def sup(self) -> float:
        return float(self.rate(self.S_star))

    def params(self) -> dict:
        return {"mu_max": self.mu_max, "K_P": self.K_P, "K_I": self.K_I}


GrowthKinetics = Union[Monod, Haldane]


def _require_positive(**kw):
    for name, v in kw.items():
        if not (np.isfinite(v) and v > 0):
            raise DomainError(f"{name} must be finite and > 0, got {v!r}")


def eval_growth(kinetics: GrowthKinetics, S):
    """Specific growth rate at substrate level(s) ``S``.

    Raises
    ------
    DomainError
        If any ``S`` is negative or not finite.
    """
    arr = np.asarray(S, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise DomainError(f"substrate level must be finite and >= 0, got {S!r}")
    out = kinetics.rate(arr)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class GrowthConstants:
    M_global: float
    M_box: float
    L_mu: float
    Gamma: float


def _max_on_interval(fun, lo, hi, n=4097):
    """Maximum of ``fun`` on [lo, hi]: dense scan, then bounded refinement
    around the best sample."""
    s = np.linspace(lo, hi, n)
    v = fun(s)
    i = int(np.argmax(v))
    best = float(v[i])
    a, b = s[max(i - 1, 0)], s[min(i + 1, n - 1)]
    if b > a:
        res = optimize.minimize_scalar(lambda x: -float(fun(x)), bounds=(a, b),
                                       method="bounded",
                                       options={"xatol": 1e-14 * max(1.0, hi)})
        best = max(best, -float(res.fun))
    return best


def growth_constants(kinetics: GrowthKinetics, S_in: float) -> GrowthConstants:
    """Sup of mu, max of mu and |mu'| on [0, S_in], and a linear bound
    mu(S) <= Gamma S there (Gamma = L_mu by the mean value theorem)."""
    _require_positive(S_in=S_in)
    M_global = kinetics.sup()
    if isinstance(kinetics, Monod):
        M_box = float(kinetics.rate(S_in))
        L_mu = kinetics.mu_max / kinetics.K_S
    elif isinstance(kinetics, Haldane):
        M_box = float(kinetics.rate(min(kinetics.S_star, S_in)))
        L_mu = _max_on_interval(lambda s: np.abs(kinetics.slope(s)), 0.0, S_in)
    else:
        M_box = _max_on_interval(kinetics.rate, 0.0, S_in)
        M_global = max(M_global, M_box)
        L_mu = _max_on_interval(lambda s: np.abs(kinetics.slope(s)), 0.0, S_in)
    return GrowthConstants(M_global=M_global, M_box=M_box, L_mu=L_mu, Gamma=L_mu)


# --------------------------------------------------------------------------
# age profiles
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class AgeProfile:
    """Piecewise-linear function of age tabulated on a uniform grid.

    ``values[i]`` is the value at age ``i * da``.  Beyond the last node the
    function is continued by ``extension``: ``"zero"`` or ``"constant"``
    (last value).
    """

    da: float
    values: np.ndarray
    extension: str = "zero"
    _cum: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not (np.isfinite(self.da) and self.da > 0):
            raise GridError(f"grid spacing must be > 0, got {self.da!r}")
        v = np.array(self.values, dtype=float, copy=True).reshape(-1)
        if v.size == 0:
            raise GridError("an age profile needs at least one node")
        if not np.all(np.isfinite(v)):
            raise DomainError("age profile values must be finite")
        if self.extension not in EXTENSIONS:
            raise DomainError(f"extension must be one of {EXTENSIONS}")
        v.setflags(write=False)
        cum = np.zeros_like(v)
        if v.size > 1:
            cum[1:] = np.cumsum(0.5 * self.da * (v[1:] + v[:-1]))
        cum.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "da", float(self.da))
        object.__setattr__(self, "_cum", cum)

    @classmethod
    def constant(cls, value, da=1.0, n=2, extension="constant"):
        return cls(da, np.full(n, float(value)), extension)

    @classmethod
    def from_function(cls, fun, da, a_max, extension="zero"):
        n = int(round(a_max / da)) + 1
        a = np.arange(n) * da
        return cls(da, np.asarray(fun(a), dtype=float) * np.ones(n), extension)

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def a_max(self) -> float:
        return (self.n - 1) * self.da

    @property
    def ages(self) -> np.ndarray:
        return np.arange(self.n) * self.da

    @property
    def tail_value(self) -> float:
        return float(self.values[-1]) if self.extension == "constant" else 0.0

    @property
    def sup(self) -> float:
        """Sup norm over [0, inf) under the extension rule."""
        return float(max(np.max(np.abs(self.values)), abs(self.tail_value)))

    def __call__(self, a):
        a = np.asarray(a, dtype=float)
        if np.any(a < 0):
            raise DomainError("ages must be >= 0")
        if self.n == 1:
            out = np.where(a <= 0, self.values[0], self.tail_value)
        else:
            out = np.interp(a, self.ages, self.values, right=self.tail_value)
            out = np.where(a > self.a_max, self.tail_value, out)
        return float(out) if out.ndim == 0 else out

    def cumulative(self, a):
        """Integral of the profile over [0, a]; exact for the interpolant."""
        a = np.asarray(a, dtype=float)
        if np.any(a < 0):
            raise DomainError("ages must be >= 0")
        x = np.minimum(a, self.a_max)
        i = np.minimum((x / self.da).astype(np.int64), self.n - 1)
        xi = i * self.da
        out = self._cum[i] + 0.5 * (x - xi) * (self.values[i] + self(x))
        out = out + np.maximum(a - self.a_max, 0.0) * self.tail_value
        return float(out) if out.ndim == 0 else out

    def integral(self) -> float:
        """Integral over [0, inf); ``inf`` for a nonzero constant tail."""
        if self.tail_value != 0.0:
            return math.inf if self.tail_value > 0 else -math.inf
        return float(self._cum[-1])

    def laplace(self, lam: float) -> float:
        """Integral of p(a) exp(-lam a) over [0, inf), exact for the
        piecewise-linear interpolant and its extension."""
        if not lam > 0:
            raise DomainError("Laplace parameter must be > 0")
        h, v = self.da, self.values
        x = lam * h
        e1 = -math.expm1(-x) / lam
        if x < 1e-4:
            e2 = (x * x / 2 - x ** 3 / 3 + x ** 4 / 8) / lam ** 2
        else:
            e2 = (-math.expm1(-x) - x * math.exp(-x)) / lam ** 2
        total = 0.0
        if self.n > 1:
            slope = np.diff(v) / h
            w = np.exp(-lam * self.ages[:-1])
            total = math.fsum(w * (v[:-1] * e1 + slope * e2))
        total += self.tail_value * math.exp(-lam * self.a_max) / lam
        return total

    def resample(self, da: float, n: int) -> "AgeProfile":
        """Evaluate on the grid ``i * da``, i < n (keeps the extension rule)."""
        return AgeProfile(da, self(np.arange(n) * da), self.extension)

    def scaled(self, factor: float) -> "AgeProfile":
        return AgeProfile(self.da, self.values * factor, self.extension)


def load_profile(path, extension="zero", da=None, n=None) -> AgeProfile:
    """Read a two-column ``age, value`` text file (comma or whitespace
    separated, ``#`` comments).  Ages must start at 0 and be strictly
    increasing and equally spaced.  With ``da`` and ``n`` the profile is
    resampled onto that grid."""
    text = Path(path).read_text()
    rows = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            rows.append([float(tok) for tok in line.replace(",", " ").split()])
    data = np.asarray(rows, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2 or data.shape[0] < 2:
        raise GridError(f"{path}: expected at least two rows of (age, value)")
    ages, vals = data[:, 0], data[:, 1]
    steps = np.diff(ages)
    if ages[0] != 0.0 or np.any(steps <= 0):
        raise GridError(f"{path}: ages must start at 0 and strictly increase")
    h = steps.mean()
    if np.max(np.abs(steps - h)) > 1e-9 * max(1.0, h):
        raise GridError(f"{path}: ages must be equally spaced")
    prof = AgeProfile(float(h), vals, extension)
    if da is not None:
        prof = prof.resample(da, n if n is not None else int(round(prof.a_max / da)) + 1)
    return prof


# --------------------------------------------------------------------------
# the model
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GridRates:
    """Rate profiles sampled on a solver age grid ``i * da``."""

    da: float
    beta: np.ndarray
    k: np.ndarray
    q: np.ndarray
    B: np.ndarray          # cumulative mortality, exact at the nodes
    ktilde: np.ndarray     # k exp(-B)
    qtilde: np.ndarray     # q exp(-B)


@dataclass(frozen=True, eq=False)
class ChemostatModel:
    """Kinetics ``mu``, mortality ``beta``, birth kernel ``k``, consumption
    kernel ``q`` and the inlet concentration ``S_in``."""

    kinetics: GrowthKinetics
    beta: AgeProfile
    k: AgeProfile
    q: AgeProfile
    S_in: float
    _cache: dict = field(init=False, repr=False, default_factory=dict)

    def __post_init__(self):
        _require_positive(S_in=self.S_in)
        object.__setattr__(self, "S_in", float(self.S_in))

    def mu(self, S):
        return self.kinetics.rate(S)

    @property
    def constants(self) -> GrowthConstants:
        if "constants" not in self._cache:
            self._cache["constants"] = growth_constants(self.kinetics, self.S_in)
        return self._cache["constants"]

    @property
    def k_sup(self) -> float:
        return self.k.sup

    @property
    def q_sup(self) -> float:
        return self.q.sup

    @property
    def beta_sup(self) -> float:
        return self.beta.sup

    def rates_on_grid(self, da: float, n: int) -> GridRates:
        key = ("grid", float(da), int(n))
        if key not in self._cache:
            a = np.arange(n) * da
            B = self.beta.cumulative(a)
            surv = np.exp(-B)
            k, q = self.k(a), self.q(a)
            arrays = dict(beta=self.beta(a), k=k, q=q, B=B,
                          ktilde=k * surv, qtilde=q * surv)
            for v in arrays.values():
                v.setflags(write=False)
            self._cache[key] = GridRates(da=float(da), **arrays)
        return self._cache[key]

    def with_profiles(self, **changes) -> "ChemostatModel":
        kw = dict(kinetics=self.kinetics, beta=self.beta, k=self.k, q=self.q,
                  S_in=self.S_in)
        kw.update(changes)
        return ChemostatModel(**kw)

    @property
    def has_constant_rates(self) -> bool:
        return all(p.extension == "constant" and np.ptp(p.values) == 0
                   for p in (self.beta, self.k, self.q))


def survival(model: ChemostatModel, a1, a2):
    """exp(-integral of beta over [a1, a2])."""
    a1 = np.asarray(a1, dtype=float)
    a2 = np.asarray(a2, dtype=float)
    if np.any(a1 > a2):
        raise DomainError("survival needs a1 <= a2")
    out = np.exp(-(model.beta.cumulative(a2) - model.beta.cumulative(a1)))
    return float(out) if np.ndim(out) == 0 else out


def validate_model(model: ChemostatModel) -> Report:
    """Check the standing assumptions on the model data; report only."""
    rep = Report("model assumptions")
    for name in ("beta", "k", "q"):
        prof = getattr(model, name)
        neg = np.flatnonzero(prof.values < 0)
        rep.add(f"{name} nonnegative", neg.size == 0,
                detail=f"first negative node {int(neg[0])}" if neg.size else "")
        rep.add(f"{name} bounded", np.isfinite(prof.sup), value=prof.sup)
    for name in ("k", "q"):
        total = getattr(model, name).integral()
        rep.add(f"integral of {name}(a)da > 0", total > 0, value=total)
    rep.add("S_in > 0", model.S_in > 0, value=model.S_in)
    return rep
