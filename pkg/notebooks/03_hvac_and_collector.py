"""
The two builtin building systems
================================

An air-handling unit with five temperature states and a brickwork solar
collector with three, both driven by hourly outdoor temperature.
"""

# %%
import numpy as np

from climmap.climate_io import generate_station
from climmap.perf import run_station
from climmap.statespace import dc_gain, steady_state
from climmap.systems import build_hvac, build_solar_collector

hvac = build_hvac()
sc = build_solar_collector()
np.set_printoptions(precision=4, suppress=False)
print("HVAC A =\n", hvac.model.A)
print("eigenvalues:", np.linalg.eigvals(hvac.model.A))

# %%
# Steady state at 10 C outside: supply air temperature T5 and heating power.
u = np.array([10.0, 22.0, 500.0, 2000.0, 500.0])
x_ss, _ = steady_state(hvac.model, u)
print("steady temperatures:", x_ss)
print("performance: %.2f W" % (201.0 * (x_ss[4] - 22.0)))

# %%
# How much each extra kelvin outside changes the indicators.
for spec in (hvac, sc):
    gain = np.dot(spec.indicator.weights, dc_gain(spec.model)[:, 0])
    print(f"{spec.name}: {gain:.4f} W per K of outdoor temperature")

# %%
# One year at one station, past climate and 2 K warmer.
for offset in (0.0, 2.0):
    s = generate_station(4.9, 52.4, 1, offset, seed=3)
    print(f"offset {offset:+.0f} K: hvac {run_station(hvac, s).value:9.3f} W   "
          f"collector {run_station(sc, s).value:8.3f} W")
