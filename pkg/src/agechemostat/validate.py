"""Executable checks of the properties a computed solution must have:
renewal and weak-form residuals, moment identities, a priori envelopes,
continuous dependence and the control-system axioms."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError, GridError
from .flow import Numerics, Trajectory, flow_map
from .model import ChemostatModel
from .report import Report
from .signal import DilutionSignal
from .state import ChemostatState, check_membership, metric, renewal_gap, trapz


@dataclass(frozen=True)
class TestFunction:
    """A test function phi(t, a) with its transport derivative
    (d/da + d/dt) phi.

    ``dphi(t, a, left)`` gets ``left=True`` when the left limit in time is
    wanted (only matters for inputs with jumps).  ``dphi_da`` is the age
    derivative, used by the moment identity for age-only functions.
    """

    __test__ = False  # not a pytest class

    name: str
    phi: Callable
    dphi: Callable
    bound_phi: float
    bound_dphi: float
    age_only: bool = False
    dphi_da: Callable | None = None


def _age_only(name, g, dg, bound, dbound):
    return TestFunction(name, lambda t, a: g(a) + 0.0 * t,
                        lambda t, a, left=False: dg(a) + 0.0 * t,
                        bound, dbound, True, dg)


def tf_one():
    return _age_only("one", lambda a: np.ones_like(a), lambda a: np.zeros_like(a), 1.0, 0.0)


def tf_exp():
    return _age_only("exp(-a)", lambda a: np.exp(-a), lambda a: -np.exp(-a), 1.0, 1.0)


def tf_rational():
    return _age_only("1/(1+a)", lambda a: 1.0 / (1.0 + a), lambda a: -1.0 / (1.0 + a) ** 2,
                     1.0, 1.0)


def tf_exp_cos():
    return TestFunction(
        "exp(-a)cos(t)",
        lambda t, a: np.exp(-a) * np.cos(t),
        lambda t, a, left=False: -np.exp(-a) * (np.cos(t) + np.sin(t)),
        1.0, 2.0)


def tf_characteristic(model: ChemostatModel, Dtilde: DilutionSignal, tau: float,
                      g=lambda r: np.exp(-r * r)):
    """Member of the family exp(-int_t^tau Dtilde - int_a^{a+tau-t} beta)
    g(a + tau - t), whose transport derivative is (Dtilde(t) + beta(a)) phi.
    Defined for 0 <= t <= tau."""
    cum = model.beta.cumulative

    def phi(t, a):
        t = np.asarray(t, dtype=float)
        a = np.asarray(a, dtype=float)
        s = a + tau - t
        tu, inv = np.unique(t, return_inverse=True)
        Dint = np.array([Dtilde.integral(min(tt, tau), tau) for tt in tu])[inv]
        Dint = Dint.reshape(np.shape(t))
        return np.exp(-Dint - (cum(s) - cum(a))) * g(s)

    def dphi(t, a, left=False):
        t = np.asarray(t, dtype=float)
        return (Dtilde.at_array(t, left=left) + model.beta(a)) * phi(t, a)

    sup_D = max(Dtilde.values)
    return TestFunction("characteristic(exp(-r^2))", phi, dphi, 1.0,
                        sup_D + model.beta_sup)


def test_battery(model: ChemostatModel, horizon: float,
                 Dtilde: DilutionSignal | None = None) -> list:
    """The fixed battery of five test functions."""
    if Dtilde is None:
        Dtilde = DilutionSignal.from_pairs([(0.0, 0.3), (0.5 * horizon, 0.1)])
    return [tf_one(), tf_exp(), tf_rational(), tf_exp_cos(),
            tf_characteristic(model, Dtilde, horizon)]


test_battery.__test__ = False


# --------------------------------------------------------------------------
# residuals
# --------------------------------------------------------------------------

def renewal_residual(model: ChemostatModel, state: ChemostatState) -> float:
    """|f(0) - mu(S) int k f da|."""
    return abs(renewal_gap(model, state.f, state.S)[0])


def renewal_bound(model: ChemostatModel, state: ChemostatState, tol_fp: float) -> float:
    """Allowed renewal residual: 10 tol_fp plus the quadrature estimate."""
    return 10.0 * tol_fp + renewal_gap(model, state.f, state.S)[1]


def renewal_report(traj: Trajectory, model: ChemostatModel,
                   numerics: Numerics | None = None) -> Report:
    """Renewal residual at every window node of a trajectory.

    The initial state is checked against ``tol_compat`` instead; it is
    data, not solver output.
    """
    rep = Report("renewal condition")
    worst, worst_ratio, where = 0.0, 0.0, None
    for j in range(1, len(traj)):
        st = traj.state(j)
        R = 0.5 * min(st.S, model.S_in - st.S)
        tol_fp = (numerics.tol_fp if numerics and numerics.tol_fp is not None
                  else 1e-12 * (1.0 + R))
        res = renewal_residual(model, st)
        bound = renewal_bound(model, st, tol_fp)
        if res / bound > worst_ratio:
            worst_ratio, worst, where = res / bound, res, float(traj.t[j])
    rep.add("renewal residual within bound at all nodes", worst_ratio <= 1.0,
            value=worst_ratio, detail=f"worst residual {worst:.3g} at t={where}")
    rep.values["max_renewal_residual"] = worst
    return rep


def weak_form_residual(traj: Trajectory, model: ChemostatModel, D: DilutionSignal,
                       phi: TestFunction, t: float) -> float:
    """|LHS - RHS| of the integral identity tested against ``phi`` on
    ``[t0, t]``, with test-function time measured from the trajectory start.

    Inner age integrals are trapezoidal.  The time integral is trapezoidal
    on each step, using one-sided limits of D and of the transport
    derivative inside the step.
    """
    j_end = traj.index_of(t)
    h = traj.dt
    na = traj.f.shape[1]
    a = np.arange(na) * h
    s = traj.t_rel[: j_end + 1]
    f = traj.f[: j_end + 1]
    rates = model.rates_on_grid(h, na)
    f0_term = trapz(f[0] * phi.phi(0.0, a), h)
    if j_end == 0:
        return 0.0
    bnd = trapz(f[:, 0] * phi.phi(s, 0.0 * s), h)
    end_term = trapz(f[j_end] * phi.phi(s[-1], a), h)
    S_, A_ = np.meshgrid(s, a, indexing="ij")
    P = phi.phi(S_, A_)
    tt = traj.t[: j_end + 1]
    Dr = D.at_array(tt[:-1])
    Dl = D.at_array(tt[1:], left=True)
    right = ((rates.beta[None, :] + Dr[:, None]) * P[:-1]
             - phi.dphi(S_[:-1], A_[:-1], left=False)) * f[:-1]
    left = ((rates.beta[None, :] + Dl[:, None]) * P[1:]
            - phi.dphi(S_[1:], A_[1:], left=True)) * f[1:]
    Gr = trapz(right, h, axis=1)
    Gl = trapz(left, h, axis=1)
    body = 0.5 * h * float(np.sum(Gr + Gl))
    return abs(f0_term + bnd - end_term - body)


def moment_residual(traj: Trajectory, model: ChemostatModel, D: DilutionSignal,
                    phi: TestFunction, return_series: bool = False):
    """Max gap in the moment identity for an age-only test function.

    The left side is evaluated by quadrature at each node.  The time
    derivative of the moment uses centred differences.  Nodes whose
    stencil touches a jump of D are skipped, and so are the end nodes.
    """
    if not phi.age_only:
        raise DomainError("moment identity needs an age-only test function")
    n = len(traj)
    if n < 3:
        raise DomainError("need at least 3 nodes")
    h = traj.dt
    na = traj.f.shape[1]
    a = np.arange(na) * h
    rates = model.rates_on_grid(h, na)
    g = phi.phi(0.0, a)
    dg = phi.dphi_da(a)
    m = trapz(traj.f * g[None, :], h, axis=1)
    t = traj.t
    Dn = D.at_array(t)
    lhs = (traj.x * float(phi.phi(0.0, 0.0))
           + trapz((dg[None, :] - (rates.beta[None, :] + Dn[:, None]) * g[None, :]) * traj.f,
                   h, axis=1))
    rhs = (m[2:] - m[:-2]) / (2 * h)
    gap = np.abs(lhs[1:-1] - rhs)
    mask = np.ones(gap.size, dtype=bool)
    for bp in D.breakpoints[1:]:
        mask &= ~((t[:-2] < bp + 1e-12 * h) & (bp - 1e-12 * h < t[2:]))
    gap = np.where(mask, gap, 0.0)
    worst = float(gap.max()) if gap.size else 0.0
    if return_series:
        return worst, t[1:-1], gap, mask
    return worst


# --------------------------------------------------------------------------
# envelopes and dependence
# --------------------------------------------------------------------------

def envelope_check(traj: Trajectory, model: ChemostatModel, D: DilutionSignal,
                 slack_tol: float = -1e-3) -> Report:
    """Mass growth bound and the two substrate envelopes at every node.

    Slack is bound minus value (upper bounds) or value minus bound (lower
    bound); a check passes when its worst slack is ``>= slack_tol``.
    """
    c = model.constants
    M, kk, qq, Gam = c.M_box, model.k_sup, model.q_sup, c.Gamma
    t = traj.t_rel
    N = traj.mass
    N0, S0 = N[0], traj.S[0]
    t_start = traj.start_step * traj.dt
    intD = np.array([D.integral(t_start, tt) for tt in traj.t])
    rate = M * kk
    with np.errstate(over="ignore"):
        growth = np.exp(rate * t)
        mass_bound = growth * N0
        expo = np.where(rate > 0, np.expm1(rate * t) / rate, t)
        lower = S0 * np.exp(-Gam * qq * N0 * expo)
    eD = np.exp(-intD)
    upper = model.S_in * (1.0 - eD) + S0 * eD
    slack_mass = mass_bound - N
    slack_up = upper - traj.S
    slack_lo = traj.S - lower
    rep = Report("a priori envelopes")
    for name, sl in (("mass bound", slack_mass), ("substrate upper bound", slack_up),
                     ("substrate lower bound", slack_lo)):
        w = float(np.min(sl))
        rep.add(name, w >= slack_tol, value=w,
                detail=f"worst at t={float(traj.t[int(np.argmin(sl))]):.6g}")
        if sl.size > 1:
            # the bounds are equalities at the start; this is the informative part
            rep.values[f"{name} slack after start"] = float(np.min(sl[1:]))
    return rep


def gronwall_rate(traj: Trajectory, model: ChemostatModel, D: DilutionSignal) -> float:
    """sup D + (max mass * L_mu + M)(||k|| + ||q||) over the trajectory."""
    c = model.constants
    t = traj.t
    supD = D.sup(float(t[0]), float(t[-1])) if t[-1] > t[0] else D.at(float(t[0]))
    return supD + (float(traj.mass.max()) * c.L_mu + c.M_box) * (model.k_sup + model.q_sup)


def dependence_check(traj: Trajectory, traj2: Trajectory, model: ChemostatModel,
                     D: DilutionSignal, slack: float = 1e-3) -> Report:
    """Check d(t) <= exp(chi t) d(0) (1 + slack) at every node."""
    if (abs(traj.dt - traj2.dt) > 1e-12 * traj.dt or traj.f.shape != traj2.f.shape
            or traj.start_step != traj2.start_step):
        raise GridError("trajectories must share grid, start and horizon")
    chi = gronwall_rate(traj, model, D)
    h = traj.dt
    d = trapz(np.abs(traj.f - traj2.f), h, axis=1) + np.abs(traj.S - traj2.S)
    bound = np.exp(chi * traj.t_rel) * d[0]
    rep = Report("continuous dependence")
    if d[0] == 0:
        amp = 0.0 if np.all(d == 0) else math.inf
    else:
        amp = float(np.max(d / bound))
    rep.add("gronwall bound", np.all(d <= bound * (1 + slack)), value=amp,
            detail="max of d(t) / (exp(chi t) d(0))")
    rep.values.update(chi=chi, d0=float(d[0]), d_end=float(d[-1]),
                      max_amplification=amp)
    return rep


def semigroup_check(model: ChemostatModel, D: DilutionSignal, state0: ChemostatState,
                    t: float, tau: float, numerics: Numerics, tol: float = 5e-6,
                    perturbed_value: float | None = None) -> Report:
    """Identity, causality and semigroup comparisons of the flow map.

    Causality compares runs under D and under D replaced by a different
    constant after ``t + tau``.  The semigroup comparison goes through the
    shifted input.  ``C = distance / dt`` is reported.
    """
    rep = Report("control-system axioms")
    ident = metric(flow_map(model, D, state0, 0.0, numerics), state0)
    rep.add("identity", ident == 0.0, value=ident)
    horizon = t + tau
    full = flow_map(model, D, state0, horizon, numerics)
    if perturbed_value is None:
        perturbed_value = 2.0 * max(D.values) + 1.0
    D_alt = D.replaced_after(horizon, perturbed_value)
    alt = flow_map(model, D_alt, state0, horizon, numerics)
    same = (np.array_equal(full.f.values, alt.f.values) and full.S == alt.S)
    rep.add("causality (bit-identical)", same, value=metric(full, alt))
    mid = flow_map(model, D, state0, tau, numerics)
    two = flow_map(model, D.shift(tau), mid, t, numerics)
    dist = metric(full, two)
    C = dist / numerics.dt
    rep.add("semigroup", dist <= tol, value=dist, detail=f"tol={tol:.3g}, C={C:.3g}")
    rep.values.update(semigroup_distance=dist, C=C)
    return rep


def membership_report(traj: Trajectory, model: ChemostatModel,
                      numerics: Numerics | None = None, eps_tail: float | None = None) -> Report:
    """Membership of every node state of the trajectory."""
    tol_compat = numerics.tol_compat if numerics else 1e-8
    if eps_tail is None:
        eps_tail = numerics.eps_tail if numerics and numerics.eps_tail else None
    if eps_tail is None:
        eps_tail = 1e-10 * float(np.max(traj.f[0]))
    fails = {}
    for j in range(len(traj)):
        r = check_membership(traj.state(j), model, tol_compat, eps_tail)
        for c in r.failures():
            fails.setdefault(c.name, float(traj.t[j]))
    rep = Report("membership along the trajectory")
    for name in ("positivity", "tail decay", "S range", "compatibility"):
        rep.add(name, name not in fails,
                detail=f"first failure at t={fails[name]:.6g}" if name in fails else "")
    return rep


def contraction_report(traj: Trajectory, strict: float = 1.0, typical: float = 0.6,
                       share: float = 0.95) -> Report:
    r = traj.ratios
    rep = Report("Picard contraction")
    rep.add("ratio < 1 in every window", bool(np.all(r < strict)),
            value=float(r.max()) if r.size else 0.0)
    frac = float(np.mean(r < typical)) if r.size else 1.0
    rep.add(f"ratio < {typical} in >= {share:.0%} of windows", frac >= share, value=frac)
    return rep


def validate_trajectory(traj: Trajectory, model: ChemostatModel, D: DilutionSignal,
                        numerics: Numerics | None = None) -> list:
    """The report set written next to every run."""
    return [renewal_report(traj, model, numerics), envelope_check(traj, model, D),
            membership_report(traj, model, numerics), contraction_report(traj)]
