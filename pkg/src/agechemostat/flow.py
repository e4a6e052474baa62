"""Global solutions by window concatenation and the flow map of the
control system."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConvergenceError, DomainError, GridError, SpliceError
from .model import ChemostatModel
from .signal import DilutionSignal
from .state import ChemostatState, metric, trapz, write_snapshot
from .window import MAX_ITER, max_window, solve_window

logger = logging.getLogger(__name__)

SHORT_WINDOW_POLICIES = ("single-step", "error")


@dataclass(frozen=True)
class Numerics:
    """Discretisation and iteration settings.

    ``short_window`` decides what happens when the guaranteed window length
    is below ``dt``: ``"single-step"`` runs a one-step window (its measured
    contraction is still checked), ``"error"`` raises :class:`GridError`.
    """

    dt: float
    tol_fp: float | None = None
    max_iter: int = MAX_ITER
    delta_cap: float = 0.5
    tol_compat: float = 1e-8
    eps_tail: float | None = None
    short_window: str = "single-step"

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise DomainError("dt must be finite and > 0")
        if self.short_window not in SHORT_WINDOW_POLICIES:
            raise DomainError(f"short_window must be one of {SHORT_WINDOW_POLICIES}")
        if not self.delta_cap > 0 or self.max_iter < 1:
            raise DomainError("delta_cap must be > 0 and max_iter >= 1")

    def steps(self, t: float) -> int:
        return lattice_steps(t, self.dt)


def lattice_steps(t: float, dt: float) -> int:
    m = int(round(t / dt))
    if m < 0 or abs(t / dt - m) > 1e-9 * max(1.0, abs(t / dt)):
        raise GridError(f"time {t!r} is not on the dt={dt!r} lattice")
    return m


@dataclass(frozen=True)
class WindowRecord:
    start_step: int
    n: int
    Delta: float            # guaranteed length at the window start
    guaranteed: bool        # n * dt <= Delta
    iterations: int
    update_norm: float
    ratio: float
    theory_ratio: float
    R: float
    y: np.ndarray = field(repr=False)
    z: np.ndarray = field(repr=False)


@dataclass(eq=False)
class Trajectory:
    """Node-wise record of a computed solution.

    Row ``j`` of ``f`` is the density at absolute time
    ``(start_step + j) * dt`` on the age grid ``i * dt``.
    """

    dt: float
    start_step: int
    S: np.ndarray
    f: np.ndarray
    windows: list = field(default_factory=list)

    @property
    def steps(self) -> np.ndarray:
        return self.start_step + np.arange(self.S.size)

    @property
    def t(self) -> np.ndarray:
        return self.steps * self.dt

    @property
    def t_rel(self) -> np.ndarray:
        return np.arange(self.S.size) * self.dt

    @property
    def end_step(self) -> int:
        return self.start_step + self.S.size - 1

    @property
    def x(self) -> np.ndarray:
        return self.f[:, 0]

    @property
    def mass(self) -> np.ndarray:
        return trapz(np.abs(self.f), self.dt, axis=1)

    @property
    def total_iterations(self) -> int:
        return sum(w.iterations for w in self.windows)

    @property
    def ratios(self) -> np.ndarray:
        return np.array([w.ratio for w in self.windows])

    def __len__(self):
        return self.S.size

    def state(self, j: int) -> ChemostatState:
        return ChemostatState.from_arrays(self.f[j], self.S[j], self.dt)

    def initial_state(self) -> ChemostatState:
        return self.state(0)

    def terminal_state(self) -> ChemostatState:
        return self.state(-1)

    def index_of(self, t: float) -> int:
        """Row index of absolute time ``t`` (must be a lattice node)."""
        j = lattice_steps(t, self.dt) - self.start_step
        if not 0 <= j < self.S.size:
            raise DomainError(f"t={t!r} outside the trajectory")
        return j

    def sample(self, times) -> list:
        return [self.state(self.index_of(t)) for t in times]

    def head(self, j: int) -> "Trajectory":
        """Rows ``0..j`` and the windows that end by row ``j``."""
        if not 0 <= j < self.S.size:
            raise DomainError(f"row {j} outside the trajectory")
        stop = self.start_step + j
        return Trajectory(dt=self.dt, start_step=self.start_step, S=self.S[: j + 1].copy(),
                          f=self.f[: j + 1].copy(),
                          windows=[w for w in self.windows if w.start_step + w.n <= stop])

    def window_boundaries(self) -> list:
        """Row indices where a window ends (excluding the last row)."""
        return [w.start_step + w.n - self.start_step for w in self.windows[:-1]]

    def summary(self) -> dict:
        return {
            "windows": len(self.windows),
            "total_iterations": self.total_iterations,
            "S_min": float(self.S.min()),
            "S_max": float(self.S.max()),
            "max_ratio": float(self.ratios.max()) if self.windows else 0.0,
            "unguaranteed_windows": sum(not w.guaranteed for w in self.windows),
        }

    @classmethod
    def empty(cls, state: ChemostatState, start_step: int = 0) -> "Trajectory":
        return cls(dt=state.f.da, start_step=start_step, S=np.array([state.S]),
                   f=state.f.values[None, :].copy())


def advance(model: ChemostatModel, D: DilutionSignal, state0: ChemostatState,
            T: float, numerics: Numerics, t0: float = 0.0) -> Trajectory:
    """Solve on ``[t0, t0 + T]`` by consecutive windows.

    Each window starts at a lattice time ``t_w`` and sees the input on
    ``[t_w, t_w + delta]``.  Its length is the guaranteed length for the
    current state, rounded down to a multiple of ``dt``, and capped by
    ``delta_cap`` and the remaining horizon.  The look-ahead sup of D
    stops at the horizon, so the result depends on D only up to
    ``t0 + T``.  ``t0`` must be a lattice time; continuing a run from
    one of its window boundaries gives bit-identical windows.
    """
    dt = numerics.dt
    if abs(state0.f.da - dt) > 1e-12 * dt:
        raise GridError(f"state grid spacing {state0.f.da!r} differs from dt={dt!r}")
    if not 0 < state0.S < model.S_in:
        raise DomainError(f"initial substrate {state0.S!r} outside (0, {model.S_in:g})")
    start = lattice_steps(t0, dt)
    nsteps = lattice_steps(T, dt)
    if nsteps < 1:
        raise DomainError("horizon must be positive")
    end = start + nsteps
    t_end = end * dt
    cap = max(1, int(math.floor(numerics.delta_cap / dt + 1e-9)))
    na = state0.f.n
    if nsteps > 0 and na < 2:
        raise GridError("age grid needs at least two nodes")
    f = np.empty((nsteps + 1, na))
    S = np.empty(nsteps + 1)
    f[0] = state0.f.values
    S[0] = state0.S
    windows = []
    state = state0
    step = start
    while step < end:
        t_w = step * dt
        r = trapz(np.abs(state.f.values), dt) + D.sup(t_w, min(t_w + 1.0, t_end))
        Delta = max_window(model, state.S, r)
        n = min(int(math.floor(Delta / dt + 1e-9)), end - step, cap, na - 1)
        guaranteed = n >= 1
        if not guaranteed:
            if numerics.short_window == "error":
                raise GridError(
                    f"guaranteed window {Delta:.3g} < dt={dt:g} at t={t_w:.17g}; "
                    f"refine dt below {Delta:.3g}")
            n = 1
        try:
            sol = solve_window(model, D, state, n * dt, dt, numerics.tol_fp,
                               numerics.max_iter, t0=t_w)
        except ConvergenceError as exc:
            logger.error("window at t=%.6g failed: %s", t_w, exc)
            raise
        j0 = step - start
        f[j0 + 1: j0 + n + 1] = sol.f[1:]
        S[j0 + 1: j0 + n + 1] = sol.S[1:]
        windows.append(WindowRecord(start_step=step, n=n, Delta=Delta,
                                    guaranteed=guaranteed, iterations=sol.iterations,
                                    update_norm=sol.update_norm, ratio=sol.ratio,
                                    theory_ratio=sol.theory_ratio, R=sol.R,
                                    y=sol.y, z=sol.z))
        state = ChemostatState.from_arrays(f[j0 + n], S[j0 + n], dt)
        step += n
    return Trajectory(dt=dt, start_step=start, S=S, f=f, windows=windows)


def flow_map(model: ChemostatModel, D: DilutionSignal, state0: ChemostatState,
             t: float, numerics: Numerics) -> ChemostatState:
    """The state reached at time ``t`` from ``state0`` under input ``D``."""
    if t < 0:
        raise DomainError("t must be >= 0")
    if lattice_steps(t, numerics.dt) == 0:
        return state0
    return advance(model, D, state0, t, numerics).terminal_state()


def concat(traj1: Trajectory, traj2: Trajectory, tol: float = 1e-12) -> Trajectory:
    """Splice ``traj2`` onto the end of ``traj1``.

    ``traj2`` is re-based so that its first row lands on ``traj1``'s last
    row; the junction states must agree to ``tol`` in the metric.
    """
    if traj2 is None or len(traj2) == 0:
        return traj1
    if abs(traj1.dt - traj2.dt) > 1e-12 * traj1.dt or traj1.f.shape[1] != traj2.f.shape[1]:
        raise SpliceError("trajectories use different grids")
    gap = metric(traj1.terminal_state(), traj2.initial_state())
    if gap > tol:
        raise SpliceError(f"junction mismatch {gap:.3g} exceeds {tol:.3g}")
    if len(traj2) == 1:
        return traj1
    shift = traj1.end_step - traj2.start_step
    windows = list(traj1.windows) + [replace(w, start_step=w.start_step + shift)
                                     for w in traj2.windows]
    return Trajectory(dt=traj1.dt, start_step=traj1.start_step,
                      S=np.concatenate([traj1.S, traj2.S[1:]]),
                      f=np.concatenate([traj1.f, traj2.f[1:]]), windows=windows)


# --------------------------------------------------------------------------
# export
# --------------------------------------------------------------------------

TIMESERIES_COLUMNS = ("t", "S", "N", "x", "D")


def write_timeseries(path, traj: Trajectory, D: DilutionSignal, rows=None) -> Path:
    """Comma-separated ``t,S,N,x,D`` with a single ``#`` header line."""
    path = Path(path)
    idx = range(len(traj)) if rows is None else rows
    t, N = traj.t, traj.mass
    lines = ["# " + ",".join(TIMESERIES_COLUMNS)]
    for j in idx:
        lines.append(",".join(f"{v:.17g}" for v in
                              (t[j], traj.S[j], N[j], traj.x[j], D.at(t[j]))))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_timeseries(path) -> dict:
    data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    return {name: data[:, i] for i, name in enumerate(TIMESERIES_COLUMNS)}


def write_snapshots(directory, traj: Trajectory, times) -> list:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    out = []
    for t in times:
        j = traj.index_of(t)
        out.append(write_snapshot(directory / f"snapshot_t{t:.6g}.csv", traj.state(j),
                                  t=float(traj.t[j])))
    return out
