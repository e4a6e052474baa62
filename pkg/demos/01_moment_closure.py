"""
Constant rates collapse to two ODEs
===================================

With constant birth, death and consumption rates the total biomass
N(t) and the substrate S(t) solve a closed pair of ODEs.  This script runs
the age-structured solver on such a model and compares it with RK4 on the
reduced system.
"""

import time

import numpy as np

from agechemostat import (AgeProfile, ChemostatModel, DilutionSignal, Monod, Numerics, advance,
                          make_compatible_exponential)
from agechemostat.oracle import MomentOdeParams, moment_ode_oracle

model = ChemostatModel(Monod(1.0, 1.0), beta=AgeProfile.constant(0.1),
                       k=AgeProfile.constant(1.0), q=AgeProfile.constant(1.0), S_in=2.0)

# dilution drops from 0.5 to 0.2 at t = 2
D = DilutionSignal.from_pairs([(0, 0.5), (2, 0.2)])

dt, T = 5e-3, 5.0
state0 = make_compatible_exponential(model, S0=1.0, C=1.0, da=dt, horizon=T)
print(f"age grid: {state0.f.n} nodes up to a = {state0.f.a_max:.1f}")

tic = time.perf_counter()
traj = advance(model, D, state0, T, Numerics(dt))
print(f"solved in {time.perf_counter() - tic:.2f} s, {len(traj.windows)} windows, "
      f"{traj.total_iterations} Picard sweeps")

ref = moment_ode_oracle(MomentOdeParams.from_model(model, D), traj.mass[0], 1.0, T, dt)

print("\n    t        N (pde)      N (ode)      S (pde)      S (ode)")
for t in (0.0, 1.0, 2.0, 3.0, 5.0):
    j = traj.index_of(t)
    print(f"{t:5.1f}  {traj.mass[j]:11.7f}  {ref.N[j]:11.7f}  {traj.S[j]:11.7f}  {ref.S[j]:11.7f}")

print("\nmax relative error in N:", np.max(np.abs(traj.mass - ref.N) / ref.N))
print("max relative error in S:", np.max(np.abs(traj.S - ref.S) / ref.S))
