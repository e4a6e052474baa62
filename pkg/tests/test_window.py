import math

import numpy as np
import pytest
from scipy import integrate

from agechemostat import (AgeProfile, ChemostatState, ContractionViolation, ConvergenceError,
                          DilutionSignal, GridError, Monod, make_compatible_exponential,
                          max_window, solve_window, window_constant)
from agechemostat.oracle import MomentOdeParams, moment_ode_oracle
from agechemostat.window import apply_T, contraction_bound, reconstruct_density, window_kernels

from conftest import constant_model, generic_model

D0 = DilutionSignal.constant(0.0)


def test_window_constant_hand_example():
    m = constant_model(beta=0.0)
    assert window_constant(m) == pytest.approx(11.5, rel=1e-15)
    assert max_window(m, 1.0, 0.0) == pytest.approx(1 / 46, rel=1e-15)


def test_window_length_shape():
    m = generic_model()
    rs = np.linspace(0, 20, 50)
    vals = [max_window(m, 0.8, r) for r in rs]
    assert all(a >= b for a, b in zip(vals, vals[1:]))
    assert max_window(m, 1e-9, 1.0) < 1e-9
    assert max_window(m, 2 - 1e-9, 1.0) < 1e-9
    assert 0 < max_window(m, 1.0, 0.0) <= 1.0


def test_kernels_at_zero_and_shift_invariance():
    m = generic_model()
    s = make_compatible_exponential(m, 1.0, 1.0, 0.01, horizon=1.0)
    K = window_kernels(m, D0, s, 0.2, 0.01)
    r = m.rates_on_grid(0.01, s.f.n)
    direct = integrate.trapezoid(r.k * s.f.values, dx=0.01)
    assert K.gbar[0] == pytest.approx(direct, abs=1e-14)
    flat = constant_model(beta=0.0, k=1.7)
    s = make_compatible_exponential(flat, 1.0, 1.0, 0.01, horizon=1.0)
    K = window_kernels(flat, D0, s, 0.5, 0.01)
    assert np.allclose(K.gbar, 1.7 * s.mass, rtol=1e-8)


def _gbar_quad(m, f0, t):
    cum = m.beta.cumulative
    fun = lambda a: m.k(a) * f0(a - t) * math.exp(-(cum(a) - cum(a - t)))
    return integrate.quad(fun, t, t + 40, limit=500)[0]


def test_kernels_second_order_against_quadrature():
    m = generic_model()
    lam = 0.8
    f0 = lambda a: np.exp(-lam * a)
    errs = []
    for dt in (0.02, 0.01):
        n = int(round(40 / dt)) + 1
        s = ChemostatState(AgeProfile(dt, f0(np.arange(n) * dt)), 1.0)
        K = window_kernels(m, D0, s, 0.2, dt)
        ts = np.arange(0, 0.2 + 1e-12, 0.04)
        ref = np.array([_gbar_quad(m, f0, t) for t in ts])
        errs.append(np.max(np.abs(K.gbar[np.rint(ts / dt).astype(int)] - ref)))
    assert errs[1] <= errs[0] / 3.5
    assert errs[0] <= 1e-3


def test_apply_T_zero_iterate_specialization():
    m = generic_model()
    s = make_compatible_exponential(m, 1.0, 1.0, 0.01, horizon=1.0)
    K = window_kernels(m, D0, s, 0.3, 0.01)
    n = K.n
    T1, T2 = apply_T(m, K, np.zeros(n + 1), np.zeros(n + 1))
    mu0 = float(m.mu(1.0))
    # direct loop evaluation of the specialised formulas
    I0 = np.array([integrate.trapezoid(K.qtilde[: j + 1] * mu0 * K.gbar[j::-1], dx=K.dt)
                   if j else 0.0 for j in range(n + 1)])
    T1_ref = np.array([integrate.trapezoid(K.ktilde[: j + 1] * mu0 * K.gbar[j::-1], dx=K.dt)
                       if j else 0.0 for j in range(n + 1)])
    T2_ref = -integrate.cumulative_trapezoid(mu0 * K.hbar + mu0 * I0, dx=K.dt, initial=0)
    assert T1[0] == 0.0 and T2[0] == 0.0
    assert np.allclose(T1, T1_ref, rtol=1e-12, atol=1e-15)
    assert np.allclose(T2, T2_ref, rtol=1e-12, atol=1e-15)


def test_apply_T_second_order_in_dt():
    m = generic_model()
    D = DilutionSignal.constant(0.3)
    lam = 0.8
    out = {}
    for dt in (0.02, 0.01, 0.002):
        n = int(round(30 / dt)) + 1
        s = ChemostatState(AgeProfile(dt, np.exp(-lam * np.arange(n) * dt)), 1.0)
        K = window_kernels(m, D, s, 0.2, dt)
        t = K.t
        out[dt] = apply_T(m, K, 0.05 * np.sin(3 * t), -0.1 * t)
    fine = out[0.002]
    errs = []
    for dt in (0.02, 0.01):
        step = int(round(dt / 0.002))
        errs.append(max(np.max(np.abs(out[dt][i] - fine[i][::step])) for i in range(2)))
    assert errs[1] < errs[0] / 3.0


def test_solve_window_guaranteed_case():
    m = generic_model()
    s = make_compatible_exponential(m, 1.0, 1.0, 0.001, horizon=0.1)
    delta = max_window(m, 1.0, s.mass + 0.4)
    n = int(delta / 0.001)
    sol = solve_window(m, DilutionSignal.constant(0.4), s, n * 0.001, 0.001)
    assert 0 < sol.ratio < 1
    assert sol.theory_ratio < 1
    assert sol.y[0] == 0.0 and sol.z[0] == 0.0 and sol.S[0] == 1.0
    assert sol.x[0] == s.f.values[0]
    assert abs(float(m.mu(1.0)) * (sol.y[0] + window_kernels(
        m, D0, s, n * 0.001, 0.001).gbar[0]) - s.f.values[0]) < 1e-5
    assert np.max(np.abs(sol.y)) + np.max(np.abs(sol.z)) <= sol.R
    assert np.all(sol.f > 0) and np.all(sol.x > 0)


def test_solve_window_against_moment_oracle():
    m = constant_model()
    dt = 1e-3
    s = make_compatible_exponential(m, 1.0, 1.0, dt, horizon=0.1)
    n = int(max_window(m, 1.0, s.mass) / dt)
    sol = solve_window(m, D0, s, n * dt, dt)
    ref = moment_ode_oracle(MomentOdeParams.from_model(m, D0), s.mass, 1.0, n * dt, dt)
    assert np.max(np.abs(sol.S - ref.S)) <= 1e-4
    N = integrate.trapezoid(sol.f, dx=dt, axis=1)
    assert np.max(np.abs(N - ref.N) / ref.N) <= 1e-4


def test_contraction_bound_example():
    m = constant_model(beta=0.0)
    s = make_compatible_exponential(m, 1.0, 0.01, 0.001, horizon=0.1)
    K = window_kernels(m, D0, s, 0.02, 0.001)
    assert contraction_bound(m, K) < 1


def test_reconstruct_density_examples():
    m = constant_model(beta=0.0)
    d = 0.3
    D = DilutionSignal.constant(d)
    dt = 0.01
    s = make_compatible_exponential(m, 1.0, 1.0, dt, horizon=0.5)
    sol = solve_window(m, D, s, 0.02, dt)
    a = np.array([0.0, 0.013, 0.5, 1.234])
    assert np.array_equal(reconstruct_density(m, D, sol.x, s.f, 0.0, a, dt), s.f(a))
    assert reconstruct_density(m, D, sol.x, s.f, 0.02, 0.0, dt) == sol.x[-1]
    old = np.array([0.02, 0.5, 3.3])
    got = reconstruct_density(m, D, sol.x, s.f, 0.02, old, dt)
    assert np.allclose(got, s.f(old - 0.02) * math.exp(-d * 0.02), rtol=1e-14)
    ages = np.arange(s.f.n) * dt
    assert np.allclose(reconstruct_density(m, D, sol.x, s.f, 0.02, ages, dt), sol.f[-1],
                       rtol=1e-12, atol=1e-300)


def test_window_errors():
    m = constant_model()
    s = make_compatible_exponential(m, 1.0, 1.0, 0.01, horizon=0.5)
    with pytest.raises(GridError):
        solve_window(m, D0, s, 0.015, 0.01)
    with pytest.raises(ConvergenceError):
        solve_window(m, D0, s, 0.05, 0.01, tol_fp=1e-300, max_iter=3)
    hot = constant_model(kinetics=Monod(40.0, 0.1), k=20.0, q=20.0)
    s = make_compatible_exponential(hot, 1.0, 1.0, 0.01, horizon=1.0)
    with pytest.raises(ContractionViolation):
        solve_window(hot, D0, s, 1.0, 0.01)
