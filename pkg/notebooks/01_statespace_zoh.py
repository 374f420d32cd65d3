"""
Discretizing and simulating a linear model
==========================================

A first-order lag, dx/dt = -x + u, sampled once per second with the input
held constant between samples.
"""

# %%
import math

import numpy as np

from climmap.statespace import StateSpaceModel, dc_gain, discretize_zoh, simulate, steady_state

lag = StateSpaceModel([[-1.0]], [[1.0]], [[1.0]], [[0.0]])
d = discretize_zoh(lag, 1.0)
print("Ad =", d.Ad[0, 0], " exp(-1) =", math.exp(-1))
print("Bd =", d.Bd[0, 0], " 1 - exp(-1) =", 1 - math.exp(-1))

# %%
# Outputs are streamed to a sink in blocks; here we just keep them.
rows = []
simulate(d, np.ones((10, 1)), [0.0], lambda k0, Y: rows.append(Y))
y = np.vstack(rows)[:, 0]
for k, v in enumerate(y):
    print(f"k={k:2d}  y={v:.7f}  closed form={1 - math.exp(-k):.7f}")

# %%
# Static gain and equilibrium come from one linear solve.
print("dc gain:", dc_gain(lag)[0, 0])
x_ss, y_ss = steady_state(lag, [5.0])
print("steady state for u=5:", x_ss, y_ss)
