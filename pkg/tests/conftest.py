import numpy as np
import pytest

from agechemostat import (AgeProfile, ChemostatModel, DilutionSignal, Monod, Numerics, advance,
                          make_compatible_exponential)


def constant_model(beta=0.1, k=1.0, q=1.0, kinetics=None, S_in=2.0):
    return ChemostatModel(kinetics or Monod(1.0, 1.0), AgeProfile.constant(beta),
                          AgeProfile.constant(k), AgeProfile.constant(q), S_in)


def generic_model(S_in=2.0):
    """Age-dependent rates, tabulated finely with constant continuation."""
    da, A = 0.0025, 60.0
    k = AgeProfile.from_function(lambda a: 1.5 * a / (0.5 + a), da, A, "constant")
    beta = AgeProfile.from_function(lambda a: 0.05 + 0.1 * a / (1 + a), da, A, "constant")
    q = AgeProfile.from_function(lambda a: 1 + 0.5 * np.exp(-a), da, A, "constant")
    return ChemostatModel(Monod(1.2, 0.8), beta, k, q, S_in)


@pytest.fixture
def const_model():
    return constant_model()


@pytest.fixture
def gen_model():
    return generic_model()


@pytest.fixture
def two_level_D():
    return DilutionSignal.from_pairs([(0, 0.4), (1, 0.25)])


def run(model, D, T=2.0, dt=0.01, S0=1.0, C=1.0):
    s0 = make_compatible_exponential(model, S0, C, dt, horizon=T)
    return s0, advance(model, D, s0, T, Numerics(dt))


@pytest.fixture(scope="session")
def gen_run():
    """One generic trajectory shared by the read-only validation tests."""
    model = generic_model()
    D = DilutionSignal.from_pairs([(0, 0.4), (1, 0.25)])
    s0, traj = run(model, D)
    return model, D, s0, traj


def pytest_terminal_summary(terminalreporter):
    import test_acceptance
    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)
