"""Piecewise-constant dilution-rate inputs with exact integral algebra."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class DilutionSignal:
    """Nonnegative piecewise-constant input D(t).

    ``values[i]`` holds on ``[breakpoints[i], breakpoints[i+1])``; the last
    value holds on the unbounded tail.  Evaluation is right-continuous.

    >>> D = DilutionSignal.from_pairs([(0, 1.0), (2, 0.5)])
    >>> D.at(2.0), D.integral(0, 3)
    (0.5, 2.5)
    """

    breakpoints: tuple
    values: tuple

    def __post_init__(self):
        bp = tuple(float(t) for t in self.breakpoints)
        vals = tuple(float(v) for v in self.values)
        if len(bp) == 0 or len(bp) != len(vals):
            raise DomainError("need one value per breakpoint")
        if bp[0] != 0.0:
            raise DomainError("first breakpoint must be 0")
        if any(b >= c for b, c in zip(bp, bp[1:])):
            raise DomainError("breakpoints must be strictly increasing")
        if any(not math.isfinite(t) for t in bp):
            raise DomainError("breakpoints must be finite")
        if any(not (math.isfinite(v) and v >= 0) for v in vals):
            raise DomainError("dilution values must be finite and >= 0")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, d: float) -> "DilutionSignal":
        return cls((0.0,), (d,))

    @classmethod
    def from_pairs(cls, pairs) -> "DilutionSignal":
        pairs = list(pairs)
        return cls(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))

    def to_pairs(self) -> list:
        return list(zip(self.breakpoints, self.values))

    def _check_time(self, *ts):
        for t in ts:
            if not (t >= 0 and math.isfinite(t)):
                raise DomainError(f"time must be finite and >= 0, got {t!r}")

    def at(self, t: float, left: bool = False) -> float:
        """D(t); with ``left=True`` the left limit D(t-) (t > 0)."""
        self._check_time(t)
        side = "left" if left and t > 0 else "right"
        i = int(np.searchsorted(self.breakpoints, t, side=side)) - 1
        return self.values[max(i, 0)]

    def at_array(self, t, left: bool = False) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise DomainError("times must be >= 0")
        i = np.searchsorted(self.breakpoints, t, side="left" if left else "right") - 1
        return np.asarray(self.values)[np.maximum(i, 0)]

    def integral(self, t1: float, t2: float) -> float:
        """Exact integral of D over [t1, t2]."""
        self._check_time(t1, t2)
        if t1 > t2:
            raise DomainError("integral needs t1 <= t2")
        total = 0.0
        ends = self.breakpoints[1:] + (math.inf,)
        for start, end, v in zip(self.breakpoints, ends, self.values):
            lo, hi = max(t1, start), min(t2, end)
            if hi > lo:
                total += v * (hi - lo)
        return total

    def integrals_from(self, t0: float, times) -> np.ndarray:
        """Vector of ``integral(t0, t0 + s)`` for each ``s`` in ``times``."""
        return np.array([self.integral(t0, t0 + s) for s in np.asarray(times, float)])

    def sup(self, t1: float, t2: float) -> float:
        """Max of D over the half-open interval [t1, t2)."""
        self._check_time(t1, t2)
        if not t1 < t2:
            raise DomainError("sup needs a nonempty interval t1 < t2")
        ends = self.breakpoints[1:] + (math.inf,)
        return max(v for start, end, v in zip(self.breakpoints, ends, self.values)
                   if start < t2 and end > t1)

    def shift(self, tau: float) -> "DilutionSignal":
        """The signal s -> D(tau + s)."""
        self._check_time(tau)
        if tau == 0:
            return self
        i = int(np.searchsorted(self.breakpoints, tau, side="right")) - 1
        bp = (0.0,) + tuple(b - tau for b in self.breakpoints[i + 1:])
        return DilutionSignal(bp, self.values[i:])

    def replaced_after(self, t: float, value: float) -> "DilutionSignal":
        """Equal to this signal on [0, t), constant ``value`` afterwards."""
        self._check_time(t)
        keep = [(b, v) for b, v in self.to_pairs() if b < t]
        if not keep:
            return DilutionSignal.constant(value)
        return DilutionSignal.from_pairs(keep + [(t, value)])

    def breakpoints_in(self, t1: float, t2: float) -> list:
        return [b for b in self.breakpoints[1:] if t1 <= b <= t2]
