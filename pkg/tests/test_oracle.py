import numpy as np
import pytest

from agechemostat import (AgeProfile, ChemostatState, DilutionSignal, DomainError, GridError,
                          Monod, StabilityError, make_compatible_exponential, metric)
from agechemostat.oracle import MomentOdeParams, moment_ode_oracle, upwind_pde_oracle

from conftest import constant_model, generic_model, run

D_ACC = DilutionSignal.from_pairs([(0, 0.5), (2, 0.2)])


def params(m=None, D=D_ACC):
    return MomentOdeParams.from_model(m or constant_model(), D)


def test_params_validation():
    with pytest.raises(DomainError):
        MomentOdeParams(0.0, 0.1, 1.0, Monod(1, 1), 2.0, D_ACC)
    with pytest.raises(DomainError):
        MomentOdeParams.from_model(generic_model(), D_ACC)
    with pytest.raises(DomainError):
        moment_ode_oracle(params(), 1.0, 1.0, 1.0, 0.0)


def test_rk4_self_convergence_order():
    p = params()
    ends = [moment_ode_oracle(p, 2.0, 1.0, 5.0, dt) for dt in (0.1, 0.05, 0.025)]
    N = [e.N[-1] for e in ends]
    S = [e.S[-1] for e in ends]
    for v in (N, S):
        order = np.log2(abs(v[0] - v[1]) / abs(v[1] - v[2]))
        assert order >= 3.5


def test_rk4_no_dilution_starvation():
    m = constant_model(q=50.0)
    r = moment_ode_oracle(params(m, DilutionSignal.constant(0.0)), 1.0, 1.0, 20.0, 0.01)
    assert np.all(np.diff(r.S) < 0) and r.S[-1] < 1e-2
    rate = np.diff(np.log(r.N)) / 0.01
    assert rate[-1] == pytest.approx(-0.1, abs=0.02)


def test_rk4_substrate_stays_in_range():
    r = moment_ode_oracle(params(), 2.0, 1.0, 10.0, 0.01)
    assert np.all((r.S > 0) & (r.S < 2.0))


def test_rk4_splits_at_breakpoints():
    # a jump inside a step must not smear: compare with two piecewise runs
    p = params(D=DilutionSignal.from_pairs([(0, 0.5), (0.33, 0.2)]))
    whole = moment_ode_oracle(p, 2.0, 1.0, 1.0, 0.1)
    fine = moment_ode_oracle(p, 2.0, 1.0, 1.0, 0.01)
    assert abs(whole.N[-1] - fine.N[-1]) < 1e-6


def test_upwind_pure_shift():
    m = constant_model(beta=0.0)
    k = AgeProfile(0.01, [1.0, 0.0], "zero")          # tiny support at a = 0
    m = m.with_profiles(k=k, kinetics=Monod(1e-12, 1.0))
    dt = 0.01
    f = np.exp(-np.arange(300) * dt) * (np.arange(300) < 250)
    s0 = ChemostatState.from_arrays(f, 1.0, dt)
    r = upwind_pde_oracle(m, DilutionSignal.constant(0.0), s0, dt, dt)
    assert np.array_equal(r.f_final[1:], f[:-1])
    assert r.f_final[0] < 1e-10


def test_upwind_first_order_to_moment_oracle():
    m = constant_model()
    errs = []
    for dt in (0.02, 0.01, 0.005):
        s0 = make_compatible_exponential(m, 1.0, 1.0, dt, horizon=2.0)
        up = upwind_pde_oracle(m, D_ACC, s0, 2.0, dt)
        ref = moment_ode_oracle(params(m), s0.mass, 1.0, 2.0, dt)
        errs.append(max(np.max(np.abs(up.N - ref.N)), np.max(np.abs(up.S - ref.S))))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 0.9)


def test_upwind_gap_to_solver_shrinks(gen_model):
    D = DilutionSignal.from_pairs([(0, 0.4), (1, 0.25)])
    gaps = []
    for dt in (0.02, 0.01):
        s0, tr = run(gen_model, D, T=1.0, dt=dt)
        up = upwind_pde_oracle(gen_model, D, s0, 1.0, dt, keep_density=True)
        assert np.all(up.f >= 0)
        gaps.append(metric(tr.terminal_state(), up.terminal_state()))
    assert gaps[1] < gaps[0]


def test_upwind_guards():
    m = constant_model()
    s0 = make_compatible_exponential(m, 1.0, 1.0, 0.5)
    with pytest.raises(StabilityError):
        upwind_pde_oracle(m, DilutionSignal.constant(5.0), s0, 1.0, 0.5)
    with pytest.raises(GridError):
        upwind_pde_oracle(m, D_ACC, s0, 1.0, 0.25)
