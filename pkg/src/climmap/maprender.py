"""Station values to rectangular lat/lon rasters, PNG maps and grid CSV files.

Interpolation is k-nearest inverse-distance weighting with great-circle
distances. Cells far from every station are masked instead of extrapolated.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
from PIL import Image, ImageDraw, ImageFont
from scipy.spatial import cKDTree

from .errors import ArgumentError, ClimmapIOError, EmptyError
from .perf import MapTable

log = logging.getLogger(__name__)

__all__ = [
    "EARTH_RADIUS_KM",
    "GridSpec",
    "MapGrid",
    "ColorScale",
    "IdwInterpolator",
    "haversine_km",
    "interpolate",
    "render_png",
    "write_grid_csv",
    "read_grid_csv",
    "render_five",
    "MAP_FILES",
]

EARTH_RADIUS_KM = 6371.0088
EXACT_KM = 1.0
MASK_RGB = (200, 200, 200)

#: (map-table column, figure title, file stem suffix)
MAP_FILES = (
    ("past", "Past", "Past"),
    ("near", "Near Future", "NearFuture"),
    ("far", "Far Future", "FarFuture"),
    ("diff_near", "Difference Near Future and Past", "DiffNearPast"),
    ("diff_far", "Difference Far Future and Past", "DiffFarPast"),
)


def haversine_km(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Great-circle distance in km between two ``(lon, lat)`` points in degrees."""
    return float(_haversine(np.float64(a[0]), np.float64(a[1]), np.float64(b[0]), np.float64(b[1])))


def _haversine(lon1, lat1, lon2, lat2):
    lon1, lat1, lon2, lat2 = (np.radians(v) for v in (lon1, lat1, lon2, lat2))
    h = (np.sin((lat2 - lat1) / 2.0) ** 2
         + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2.0) ** 2)
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


def _unit_xyz(lon, lat):
    lon, lat = np.radians(lon), np.radians(lat)
    return np.column_stack([np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon), np.sin(lat)])


def _cells(span: float, cell: float) -> int:
    return max(1, int(math.ceil(span / cell - 1e-9)))


@dataclass(frozen=True)
class GridSpec:
    """Raster extent and interpolation settings (degrees, km)."""

    lon_min: float = -12.0
    lon_max: float = 45.0
    lat_min: float = 33.0
    lat_max: float = 72.0
    cell: float = 0.25
    idw_power: float = 2.0
    neighbors: int = 8
    max_distance_km: float = 500.0

    def __post_init__(self):
        if not self.lon_min < self.lon_max:
            raise ArgumentError("lon_min must be < lon_max")
        if not self.lat_min < self.lat_max:
            raise ArgumentError("lat_min must be < lat_max")
        if not self.cell > 0:
            raise ArgumentError("cell must be positive")
        if int(self.neighbors) != self.neighbors or self.neighbors < 1:
            raise ArgumentError("neighbors must be an integer >= 1")
        if not self.max_distance_km > 0 or not self.idw_power >= 0:
            raise ArgumentError("max_distance_km must be positive and idw_power non-negative")

    @property
    def shape(self) -> tuple[int, int]:
        """(rows, cols); rows run north to south."""
        return (_cells(self.lat_max - self.lat_min, self.cell),
                _cells(self.lon_max - self.lon_min, self.cell))

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        rows, cols = self.shape
        lons = self.lon_min + (np.arange(cols) + 0.5) * self.cell
        lats = self.lat_max - (np.arange(rows) + 0.5) * self.cell
        return lons, lats

    def pixel_of(self, lon: float, lat: float) -> tuple[int, int]:
        """(row, col) of the cell containing a point (may fall outside the raster)."""
        return (int(math.floor((self.lat_max - lat) / self.cell)),
                int(math.floor((lon - self.lon_min) / self.cell)))


@dataclass(frozen=True, eq=False)
class MapGrid:
    """Interpolated raster; ``values`` is NaN wherever ``mask`` is True."""

    spec: GridSpec
    values: np.ndarray
    mask: np.ndarray

    @property
    def masked_fraction(self) -> float:
        return float(self.mask.mean())


ANCHORS = np.array([(0, 0, 131), (0, 60, 170), (5, 255, 255), (255, 255, 0),
                    (250, 120, 0), (190, 0, 0), (84, 0, 0)], dtype=float)
ANCHOR_T = np.linspace(0.0, 1.0, len(ANCHORS))


@dataclass(frozen=True)
class ColorScale:
    """Piecewise-linear RGB colormap over ``[vmin, vmax]``.

    A degenerate domain (``vmin == vmax``) maps everything to the midpoint colour.
    """

    vmin: float
    vmax: float

    @classmethod
    def symmetric(cls, values) -> "ColorScale":
        values = np.asarray(values, dtype=float)
        m = float(np.max(np.abs(values))) if values.size else 0.0
        return cls(-m, m)

    @classmethod
    def spanning(cls, values) -> "ColorScale":
        values = np.asarray(values, dtype=float)
        return cls(float(values.min()), float(values.max()))

    def position(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if not self.vmax > self.vmin:
            return np.full(values.shape, 0.5)
        return np.clip((values - self.vmin) / (self.vmax - self.vmin), 0.0, 1.0)

    def rgb_float(self, values) -> np.ndarray:
        t = self.position(values)
        return np.stack([np.interp(t, ANCHOR_T, ANCHORS[:, c]) for c in range(3)], axis=-1)

    def rgb(self, values) -> np.ndarray:
        """uint8 colours, channels rounded half up."""
        # the epsilon keeps exact halves that arrive as x.4999... rounding up
        return np.floor(self.rgb_float(values) + (0.5 + 1e-9)).astype(np.uint8)

    def invert(self, rgb) -> float:
        """Value whose colour is closest to ``rgb``."""
        c = np.asarray(rgb, dtype=float)
        best_t, best_d = 0.0, math.inf
        for i in range(len(ANCHORS) - 1):
            a, b = ANCHORS[i], ANCHORS[i + 1]
            seg = b - a
            s = float(np.clip(np.dot(c - a, seg) / np.dot(seg, seg), 0.0, 1.0))
            d = float(np.sum((a + s * seg - c) ** 2))
            if d < best_d:
                best_d, best_t = d, ANCHOR_T[i] + s * (ANCHOR_T[i + 1] - ANCHOR_T[i])
        return self.vmin + best_t * (self.vmax - self.vmin)


def _merge_duplicates(stations):
    arr = np.asarray(stations, dtype=float).reshape(-1, 3)
    coords, inverse, counts = np.unique(arr[:, :2], axis=0, return_inverse=True, return_counts=True)
    if len(coords) == len(arr):
        return arr
    log.warning("%d stations share coordinates; merged by mean", len(arr) - len(coords))
    sums = np.zeros(len(coords))
    np.add.at(sums, inverse.ravel(), arr[:, 2])
    return np.column_stack([coords, sums / counts])


class IdwInterpolator:
    """Neighbour search and weights for fixed station locations and grid.

    The geometry is computed once; :meth:`__call__` then maps any vector of
    station values to a :class:`MapGrid`. Coincident stations should be merged
    beforehand (see :func:`interpolate`).
    """

    def __init__(self, lonlat, spec: GridSpec):
        lonlat = np.asarray(lonlat, dtype=float).reshape(-1, 2)
        if len(lonlat) == 0:
            raise EmptyError("need at least one station to interpolate")
        self.spec = spec
        self.n_stations = len(lonlat)
        lons, lats = spec.cell_centers()
        glon, glat = np.meshgrid(lons, lats)
        k = min(int(spec.neighbors), self.n_stations)
        # chord length on the unit sphere is monotone in great-circle distance
        tree = cKDTree(_unit_xyz(lonlat[:, 0], lonlat[:, 1]))
        _, idx = tree.query(_unit_xyz(glon.ravel(), glat.ravel()), k=k)
        idx = idx.reshape(-1, k)
        dist = _haversine(glon.ravel()[:, None], glat.ravel()[:, None],
                          lonlat[idx, 0], lonlat[idx, 1])
        order = np.argsort(dist, axis=1, kind="stable")
        self.idx = np.take_along_axis(idx, order, axis=1)
        self.dist = np.take_along_axis(dist, order, axis=1)
        nearest = self.dist[:, 0]
        self.exact = nearest < EXACT_KM
        self.mask = (nearest > spec.max_distance_km) & ~self.exact
        with np.errstate(divide="ignore"):
            w = np.where(self.exact[:, None], 0.0, self.dist ** -float(spec.idw_power))
        self.lam = w / w.sum(axis=1, keepdims=True).clip(min=np.finfo(float).tiny)

    def __call__(self, values) -> MapGrid:
        v = np.asarray(values, dtype=float).reshape(-1)
        if v.size != self.n_stations:
            raise ArgumentError(f"got {v.size} values for {self.n_stations} stations")
        nv = v[self.idx]
        lo, hi = nv.min(axis=1), nv.max(axis=1)
        out = lo + np.sum(self.lam * (nv - lo[:, None]), axis=1)
        out = np.clip(out, lo, hi)
        out = np.where(self.exact, nv[:, 0], out)
        out[self.mask] = np.nan
        rows, cols = self.spec.shape
        return MapGrid(self.spec, out.reshape(rows, cols), self.mask.reshape(rows, cols).copy())


def interpolate(stations: Sequence[tuple[float, float, float]], spec: GridSpec = GridSpec()) -> MapGrid:
    """Inverse-distance interpolation of ``(lon, lat, value)`` stations onto ``spec``.

    A cell within 1 km of a station takes that station's value; a cell whose
    nearest station is beyond ``max_distance_km`` is masked. Stations sharing
    coordinates are merged by mean.
    """
    if len(stations) == 0:
        raise EmptyError("need at least one station to interpolate")
    arr = _merge_duplicates(stations)
    return IdwInterpolator(arr[:, :2], spec)(arr[:, 2])


# ---------------------------------------------------------------------------
# Output files
# ---------------------------------------------------------------------------

def write_grid_csv(grid: MapGrid, path) -> None:
    """``# lon_min,lon_max,lat_min,lat_max,cell`` then one row per raster row, NA for masked."""
    s = grid.spec
    lines = ["# " + ",".join(repr(float(v)) for v in (s.lon_min, s.lon_max, s.lat_min, s.lat_max, s.cell))]
    for vals, msk in zip(grid.values, grid.mask):
        lines.append(",".join("NA" if m else f"{v:.10g}" for v, m in zip(vals, msk)))
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise ClimmapIOError(f"cannot write {path}: {exc}") from exc


def read_grid_csv(path) -> tuple[tuple[float, ...], np.ndarray]:
    """Extent tuple and raster (NaN where masked) from a grid CSV."""
    with open(path, encoding="utf-8") as fh:
        extent = tuple(float(v) for v in fh.readline().lstrip("#").split(","))
        rows = [[math.nan if t == "NA" else float(t) for t in line.strip().split(",")]
                for line in fh if line.strip()]
    return extent, np.array(rows, dtype=float)


def _font():
    try:
        return ImageFont.load_default(size=11)
    except TypeError:  # pragma: no cover - Pillow without FreeType
        return ImageFont.load_default()


def render_png(grid: MapGrid, scale: ColorScale, stations: Sequence[tuple[float, float]], out) -> None:
    """One pixel per cell, grey for masked cells, 3x3 black station markers,
    and a vertical colour bar labelled with the domain on the right."""
    rows, cols = grid.values.shape
    if rows == 0 or cols == 0:
        raise EmptyError("grid is empty")
    font = _font()
    labels = (f"{scale.vmax:.4g}", f"{scale.vmin:.4g}")
    draw_probe = ImageDraw.Draw(Image.new("RGB", (1, 1)))
    text_w = max(draw_probe.textbbox((0, 0), s, font=font)[2] for s in labels)
    bar_x0 = cols + 10
    width = bar_x0 + 20 + 4 + text_w + 4
    height = max(rows, 40)

    img = np.full((height, width, 3), 255, dtype=np.uint8)
    raster = scale.rgb(np.where(grid.mask, 0.0, grid.values))
    raster[grid.mask] = MASK_RGB
    img[:rows, :cols] = raster
    for lon, lat in stations:
        r, c = grid.spec.pixel_of(lon, lat)
        r0, r1 = max(r - 1, 0), min(r + 2, rows)
        c0, c1 = max(c - 1, 0), min(c + 2, cols)
        if r0 < r1 and c0 < c1:
            img[r0:r1, c0:c1] = 0
    bar_t = np.linspace(1.0, 0.0, height)
    bar_vals = scale.vmin + bar_t * (scale.vmax - scale.vmin)
    img[:, bar_x0:bar_x0 + 20] = scale.rgb(bar_vals)[:, None, :]

    pil = Image.fromarray(img, mode="RGB")
    draw = ImageDraw.Draw(pil)
    draw.text((bar_x0 + 24, 0), labels[0], fill=(0, 0, 0), font=font)
    bottom = draw.textbbox((0, 0), labels[1], font=font)[3]
    draw.text((bar_x0 + 24, height - bottom - 1), labels[1], fill=(0, 0, 0), font=font)
    try:
        pil.save(out, format="PNG")
    except OSError as exc:
        raise ClimmapIOError(f"cannot write {out}: {exc}") from exc


class RenderedMap(NamedTuple):
    column: str
    title: str
    png: Path
    grid_csv: Path
    grid: MapGrid
    scale: ColorScale


def render_five(table: MapTable, spec: GridSpec, name: str, out_dir) -> list[RenderedMap]:
    """Interpolate and render the three period maps and the two difference maps.

    The period maps share one colour domain; each difference map gets a domain
    symmetric about zero.
    """
    if len(table) == 0:
        raise EmptyError("map table is empty")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lonlat = np.column_stack([table.column("lon"), table.column("lat")])
    coords, inverse = np.unique(lonlat, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    if len(coords) != len(lonlat):
        log.warning("%d stations share coordinates; merged by mean", len(lonlat) - len(coords))
    interp = IdwInterpolator(coords, spec)

    def merged(values):
        sums = np.zeros(len(coords))
        np.add.at(sums, inverse, values)
        return sums / np.bincount(inverse, minlength=len(coords))

    period_vals = np.concatenate([table.column(c) for c in ("past", "near", "far")])
    period_scale = ColorScale.spanning(period_vals)
    markers = [tuple(p) for p in lonlat]
    out = []
    for column, title, stem in MAP_FILES:
        values = table.column(column)
        scale = period_scale if column in ("past", "near", "far") else ColorScale.symmetric(values)
        grid = interp(merged(values))
        png = out_dir / f"{name}_{stem}.png"
        csv_path = out_dir / f"{name}_{stem}.grid.csv"
        render_png(grid, scale, markers, png)
        write_grid_csv(grid, csv_path)
        out.append(RenderedMap(column, title, png, csv_path, grid, scale))
    return out
