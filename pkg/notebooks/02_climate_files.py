"""
Synthetic climate files
=======================

Generate one station, write it in the CLIM1 text format, read it back and
look at a few columns.
"""

# %%
import tempfile
from pathlib import Path

import numpy as np

from climmap.climate_io import generate_station, parse_climate_file, write_climate_file

past = generate_station(lon=13.4, lat=52.5, years=1, scenario_offset_T=0.0, seed=1)
warm = generate_station(lon=13.4, lat=52.5, years=1, scenario_offset_T=2.0, seed=1)
print("hours:", past.n_hours)
print("mean TA past  %.3f C" % past["TA"].mean())
print("mean TA +2 K  %.3f C" % warm["TA"].mean())

# %%
# The daily cycle of global radiation on the longest days.
june = past["ISGH"][24 * 170:24 * 171]
print("ISGH on day 171:", np.round(june).astype(int))

# %%
# Round trip through the file format. ISvar is derived on load, not stored.
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "berlin.clim"
    write_climate_file(past, path)
    print("\n".join(path.read_text().splitlines()[:9]))
    back = parse_climate_file(path)
    print("identical after round trip:", back == past)
    print("ISvar range:", back["ISvar"].min(), back["ISvar"].max())
