"""
From station values to a raster map
===================================

Inverse-distance interpolation onto a lat/lon grid and rendering with the
seven-colour scale.
"""

# %%
import tempfile
from pathlib import Path

import numpy as np

from climmap.maprender import ColorScale, GridSpec, haversine_km, interpolate, render_png
from climmap.pipeline import place_stations

print("Paris to Rome: %.1f km" % haversine_km((2.35, 48.86), (12.50, 41.90)))

# %%
pts = place_stations(40, seed=4)
rng = np.random.default_rng(4)
stations = [(lon, lat, 0.1 * lat + rng.normal(0, 0.3)) for lon, lat in pts]
spec = GridSpec(cell=0.5)
grid = interpolate(stations, spec)
print("raster shape:", grid.values.shape, " masked fraction: %.3f" % grid.masked_fraction)
print("value range: %.3f .. %.3f" % (np.nanmin(grid.values), np.nanmax(grid.values)))

# %%
scale = ColorScale.spanning([v for _, _, v in stations])
print("colour at vmin, middle, vmax:", scale.rgb([scale.vmin, (scale.vmin + scale.vmax) / 2, scale.vmax]).tolist())
with tempfile.TemporaryDirectory() as tmp:
    out = Path(tmp) / "demo.png"
    render_png(grid, scale, pts, out)
    print("wrote", out.stat().st_size, "bytes of PNG")
