"""
What the validation layer checks
================================

A single run followed by every check the package ships: the renewal
condition at every node, the a priori envelopes, membership in the state
space, Picard contraction, the weak formulation under grid refinement,
continuous dependence and the flow-map axioms.
"""

import numpy as np

from agechemostat import (AgeProfile, ChemostatModel, DilutionSignal, Haldane, Numerics, advance,
                          make_compatible_exponential)
from agechemostat.validate import (dependence_check, semigroup_check, test_battery,
                                   validate_trajectory, weak_form_residual)

model = ChemostatModel(Haldane(2.0, 0.5, 3.0), beta=AgeProfile.constant(0.05),
                       k=AgeProfile.from_function(lambda a: a / (1 + a), 0.005, 30, "constant"),
                       q=AgeProfile.constant(0.8), S_in=3.0)
D = DilutionSignal.from_pairs([(0, 0.3), (0.75, 0.6), (1.5, 0.1)])
T = 2.0
num = Numerics(0.01)

s0 = make_compatible_exponential(model, 1.2, 1.0, num.dt, horizon=T)
traj = advance(model, D, s0, T, num)
for rep in validate_trajectory(traj, model, D, num):
    print(rep, "\n")

# weak formulation: the residual should drop about fourfold per halving
battery = test_battery(model, T)
print("weak-form residuals at t = T")
for dt in (0.02, 0.01, 0.005):
    s = make_compatible_exponential(model, 1.2, 1.0, dt, horizon=T)
    tr = advance(model, D, s, T, Numerics(dt))
    res = [weak_form_residual(tr, model, D, tf, T) for tf in battery]
    print(f"  dt={dt:<6}", "  ".join(f"{r:.2e}" for r in res))

# continuous dependence on the initial state
s1 = make_compatible_exponential(model, 1.21, 1.01, num.dt, a_max=s0.f.a_max)
print()
print(dependence_check(traj, advance(model, D, s1, T, num), model, D))

# identity, causality and semigroup property of the flow map
print()
print(semigroup_check(model, D, s0, 1.0, 1.0, num))
