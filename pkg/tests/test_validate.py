import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from agechemostat import (ChemostatState, DilutionSignal, DomainError, GridError, Numerics,
                          make_compatible_exponential)
from agechemostat.oracle import MomentOdeParams, moment_ode_oracle
from agechemostat.validate import (dependence_check, gronwall_rate, envelope_check,
                                   membership_report, moment_residual, renewal_report,
                                   renewal_residual, semigroup_check, test_battery, tf_characteristic,
                                   tf_exp, tf_exp_cos, tf_one, validate_trajectory,
                                   weak_form_residual)

from conftest import constant_model, generic_model, run


def test_battery_derivatives_by_finite_differences(gen_model):
    D = DilutionSignal.from_pairs([(0, 0.3), (1, 0.1)])
    t = np.array([0.2, 0.7, 1.6])
    a = np.array([0.05, 0.4, 3.0])
    h = 1e-6
    for tf in test_battery(gen_model, 2.0, D):
        fd = (tf.phi(t + h, a + h) - tf.phi(t - h, a - h)) / (2 * h)
        assert np.allclose(tf.dphi(t, a), fd, rtol=1e-6, atol=1e-8), tf.name
        assert np.all(np.abs(tf.phi(t, a)) <= tf.bound_phi + 1e-12)


def test_characteristic_member_at_tau():
    m = generic_model()
    phi = tf_characteristic(m, DilutionSignal.constant(0.2), 1.5)
    a = np.linspace(0, 3, 7)
    assert np.allclose(phi.phi(1.5 + 0 * a, a), np.exp(-a * a))


def test_renewal_residuals(gen_run):
    model, D, s0, tr = gen_run
    assert renewal_report(tr, model).passed
    # doubling the density but not its boundary value: residual by direct quadrature
    f = 2 * s0.f.values
    f[0] = s0.f.values[0]
    st = ChemostatState.from_arrays(f, s0.S, s0.f.da)
    r = model.rates_on_grid(s0.f.da, s0.f.n)
    direct = abs(f[0] - float(model.mu(s0.S)) * trapezoid(r.k * f, dx=s0.f.da))
    assert renewal_residual(model, st) == pytest.approx(direct, rel=1e-12)


def test_weak_form_basic_cases(gen_run):
    model, D, s0, tr = gen_run
    for tf in test_battery(model, 2.0):
        assert weak_form_residual(tr, model, D, tf, 0.0) == 0.0
    assert weak_form_residual(tr, model, D, tf_one(), 2.0) < 1e-4


def test_weak_form_one_is_integrated_mass_balance(gen_run):
    model, D, s0, tr = gen_run
    h = tr.dt
    r = model.rates_on_grid(h, tr.f.shape[1])
    loss_r = trapezoid((r.beta + D.at_array(tr.t)[:, None]) * tr.f, dx=h, axis=1)
    loss_l = trapezoid((r.beta + D.at_array(tr.t, left=True)[:, None]) * tr.f, dx=h, axis=1)
    lhs = tr.mass[-1] - tr.mass[0]
    rhs = trapezoid(tr.x, dx=h) - 0.5 * h * np.sum(loss_r[:-1] + loss_l[1:])
    assert weak_form_residual(tr, model, D, tf_one(), 2.0) == pytest.approx(abs(lhs - rhs),
                                                                          abs=1e-13)


def test_weak_form_refinement_exp_cos(gen_model):
    D = DilutionSignal.from_pairs([(0, 0.4), (1, 0.25)])
    res = [weak_form_residual(run(gen_model, D, dt=dt)[1], gen_model, D, tf_exp_cos(), 2.0)
           for dt in (0.02, 0.01)]
    assert res[0] / res[1] >= 1.7


def test_moment_residual_constant_rates():
    m = constant_model()
    D = DilutionSignal.from_pairs([(0, 0.5), (2, 0.2)])
    _, tr = run(m, D, T=3.0, dt=5e-3)
    assert moment_residual(tr, m, D, tf_one()) <= 1e-3
    with pytest.raises(DomainError):
        moment_residual(tr, m, D, tf_exp_cos())


def test_moment_residual_refines(gen_model):
    D = DilutionSignal.from_pairs([(0, 0.4), (1, 0.25)])
    res = [moment_residual(run(gen_model, D, dt=dt)[1], gen_model, D, tf_exp())
           for dt in (0.02, 0.01)]
    assert res[0] / res[1] >= 1.7


def test_envelopes_without_dilution():
    m = constant_model()
    D = DilutionSignal.constant(0.0)
    _, tr = run(m, D, T=2.0)
    rep = envelope_check(tr, m, D)
    assert rep.passed
    assert np.all(tr.S <= tr.S[0])


def test_mass_bound_is_conservative_against_ode():
    m = constant_model(beta=0.0, k=1.0)
    D = DilutionSignal.constant(0.0)
    s0, tr = run(m, D, T=2.0)
    ode = moment_ode_oracle(MomentOdeParams.from_model(m, D), s0.mass, 1.0, 2.0, 0.01)
    bound = np.exp(m.constants.M_box * m.k_sup * tr.t_rel) * s0.mass
    assert np.all(ode.N <= bound) and envelope_check(tr, m, D)["mass bound"].passed


def test_dependence_trivial_and_perturbed(gen_run):
    model, D, s0, tr = gen_run
    rep = dependence_check(tr, tr, model, D)
    assert rep.passed and rep.values["d_end"] == 0.0
    s1 = make_compatible_exponential(model, 1.001, 1.0, tr.dt, a_max=s0.f.a_max)
    tr2 = run_from(model, D, s1)
    rep = dependence_check(tr, tr2, model, D)
    assert rep.passed and rep.values["max_amplification"] <= 1.0
    assert gronwall_rate(tr, model, D) == rep.values["chi"]
    with pytest.raises(GridError):
        dependence_check(tr, tr.head(5), model, D)


def run_from(model, D, s):
    from agechemostat import advance
    return advance(model, D, s, 2.0, Numerics(0.01))


def test_semigroup_axioms(const_model):
    D = DilutionSignal.from_pairs([(0, 0.5), (0.3, 0.1), (1.2, 0.4)])
    s0 = make_compatible_exponential(const_model, 1.0, 1.0, 0.01, horizon=2.0)
    rep = semigroup_check(const_model, D, s0, 1.0, 1.0, Numerics(0.01))
    assert rep.passed and rep.values["C"] >= 0
    rep = semigroup_check(const_model, D, s0, 1.0, 0.0, Numerics(0.01))
    assert rep["semigroup"].value == 0.0


def test_membership_and_full_validation(gen_run):
    model, D, s0, tr = gen_run
    assert membership_report(tr, model).passed
    assert all(r.passed for r in validate_trajectory(tr, model, D))
