import math

import pytest
from hypothesis import given, settings, strategies as st

from agechemostat import DilutionSignal, DomainError

D2 = DilutionSignal.from_pairs([(0, 1.0), (2, 0.5)])

# dyadic times and values keep every sum exact in binary floating point
dyadic = st.integers(0, 64 * 8).map(lambda i: i / 64)


@st.composite
def signals(draw):
    n = draw(st.integers(1, 6))
    cuts = sorted(set(draw(st.lists(st.integers(1, 64 * 6), min_size=n - 1, max_size=n - 1))))
    bp = [0.0] + [c / 64 for c in cuts]
    vals = [draw(st.integers(0, 64)) / 16 for _ in bp]
    return DilutionSignal(tuple(bp), tuple(vals))


def test_evaluation_examples():
    assert D2.at(2.0) == 0.5
    assert D2.at(2.0 - 1e-9) == 1.0
    assert D2.at(2.0, left=True) == 1.0
    assert DilutionSignal.constant(0.3).at(17.0) == 0.3


def test_integral_examples():
    assert D2.integral(0, 3) == 2.5
    assert math.exp(-D2.integral(0, 3)) == math.exp(-2.5)
    assert DilutionSignal.constant(0.0).integral(0, 9) == 0.0
    assert D2.integral(1.7, 1.7) == 0.0
    with pytest.raises(DomainError):
        D2.integral(2, 1)


def test_sup_examples():
    assert D2.sup(1.5, 3) == 1.0
    assert D2.sup(2.0, 3) == 0.5     # half-open: the value before 2 is not seen
    assert DilutionSignal.constant(0.2).sup(0, 1) == 0.2
    assert D2.sup(5, 6) == 0.5


def test_shift_examples():
    assert D2.shift(0) is D2
    assert D2.shift(2) == DilutionSignal.constant(0.5)
    assert D2.shift(0.5).to_pairs() == [(0.0, 1.0), (1.5, 0.5)]


def test_invalid_signals():
    with pytest.raises(DomainError):
        DilutionSignal((0.5,), (1.0,))
    with pytest.raises(DomainError):
        DilutionSignal((0.0, 1.0, 1.0), (1.0, 1.0, 2.0))
    with pytest.raises(DomainError):
        DilutionSignal.constant(-0.1)
    with pytest.raises(DomainError):
        D2.at(-1.0)


@settings(max_examples=200)
@given(D=signals(), a=dyadic, b=dyadic, c=dyadic)
def test_integral_additivity_exact(D, a, b, c):
    t1, t2, t3 = sorted((a, b, c))
    assert D.integral(t1, t3) == D.integral(t1, t2) + D.integral(t2, t3)


@settings(max_examples=200)
@given(D=signals(), tau=dyadic, t=dyadic)
def test_shift_compatible_with_integral(D, tau, t):
    assert D.shift(tau).integral(0, t) == D.integral(tau, tau + t)


@settings(max_examples=200)
@given(D=signals(), a=dyadic, b=dyadic, s=dyadic)
def test_shift_composes(D, a, b, s):
    assert D.shift(a).shift(b).at(s) == D.shift(a + b).at(s)


@settings(max_examples=100)
@given(D=signals(), t=dyadic, v=st.floats(0, 5))
def test_replaced_after_agrees_before(D, t, v):
    E = D.replaced_after(t, v)
    for s in (0.0, t / 3, t * 0.999):
        if s < t:
            assert E.at(s) == D.at(s)
    assert E.at(t) == v
