import math

import numpy as np
import pytest
from PIL import Image

from climmap.errors import ArgumentError, EmptyError
from climmap.maprender import (
    ANCHORS, EARTH_RADIUS_KM, MASK_RGB, ColorScale, GridSpec, IdwInterpolator, haversine_km,
    interpolate, read_grid_csv, render_five, render_png, write_grid_csv,
)
from climmap.perf import StationResult, assemble_map_table

SMALL = GridSpec(lon_min=0.0, lon_max=20.0, lat_min=40.0, lat_max=55.0, cell=0.5)


# -- distance --------------------------------------------------------------------

def test_haversine_examples():
    assert haversine_km((3.0, 50.0), (3.0, 50.0)) == 0.0
    # quarter of the equator: pi R / 2 with R = 6371.0088 km
    assert abs(haversine_km((0.0, 0.0), (90.0, 0.0)) - math.pi * EARTH_RADIUS_KM / 2) <= 1e-9
    assert abs(haversine_km((0.0, 0.0), (90.0, 0.0)) - 10007.557) <= 0.01
    a, b = (-7.3, 38.1), (24.9, 61.2)
    assert haversine_km(a, b) == haversine_km(b, a)
    # one degree of latitude
    assert haversine_km((10.0, 45.0), (10.0, 46.0)) == pytest.approx(111.195, abs=1e-3)


# -- grid geometry ---------------------------------------------------------------

def test_default_grid_shape():
    assert GridSpec().shape == (156, 228)
    assert GridSpec(cell=0.4).shape == (math.ceil(39 / 0.4), math.ceil(57 / 0.4))


def test_cell_centers_run_north_to_south():
    lons, lats = SMALL.cell_centers()
    assert lons[0] == 0.25 and lats[0] == 54.75 and lats[-1] == 40.25
    assert SMALL.pixel_of(0.25, 54.75) == (0, 0)


def test_grid_spec_validation():
    for bad in ({"lon_min": 5, "lon_max": 5}, {"lat_min": 60, "lat_max": 50}, {"cell": 0},
                {"neighbors": 0}, {"max_distance_km": -1}):
        with pytest.raises(ArgumentError):
            GridSpec(**bad)


# -- interpolation ---------------------------------------------------------------

def test_single_station_fills_unmasked():
    g = interpolate([(10.0, 47.0, 3.25)], SMALL)
    vals = g.values[~g.mask]
    assert vals.size > 0 and np.all(vals == 3.25)
    assert np.all(np.isnan(g.values[g.mask]))


def test_equidistant_cell_is_mean():
    spec = GridSpec(lon_min=10.0, lon_max=10.25, lat_min=0.0, lat_max=0.25, cell=0.25)
    # cell centre (10.125, 0.125); stations mirrored in longitude at the same latitude
    g = interpolate([(9.125, 0.125, 0.0), (11.125, 0.125, 10.0)], spec)
    assert g.values.shape == (1, 1)
    assert g.values[0, 0] == pytest.approx(5.0, abs=1e-12)


def test_exact_within_one_km():
    lons, lats = SMALL.cell_centers()
    sta = [(lons[7] + 0.005, lats[3], 7.3), (lons[20], lats[20], -1.0), (lons[30], lats[10], 4.0)]
    g = interpolate(sta, SMALL)
    assert g.values[3, 7] == 7.3


def test_masking_beyond_max_distance():
    spec = GridSpec(lon_min=0.0, lon_max=20.0, lat_min=40.0, lat_max=55.0, cell=0.5, max_distance_km=300.0)
    g = interpolate([(1.0, 41.0, 1.0)], spec)
    lons, lats = spec.cell_centers()
    glon, glat = np.meshgrid(lons, lats)
    dist = np.vectorize(lambda a, b: haversine_km((a, b), (1.0, 41.0)))(glon, glat)
    assert np.array_equal(g.mask, dist > 300.0)
    assert 0 < g.masked_fraction < 1


def _random_stations(n, seed):
    rng = np.random.default_rng(seed)
    return [(float(a), float(b), float(v)) for a, b, v in
            zip(rng.uniform(0, 20, n), rng.uniform(40, 55, n), rng.normal(0, 5, n))]


def test_values_bounded_by_neighbours():
    st = _random_stations(40, 0)
    interp = IdwInterpolator([s[:2] for s in st], SMALL)
    v = np.array([s[2] for s in st])
    g = interp(v)
    flat = g.values.reshape(-1)
    nv = v[interp.idx]
    ok = ~g.mask.reshape(-1)
    assert np.all(flat[ok] >= nv.min(axis=1)[ok]) and np.all(flat[ok] <= nv.max(axis=1)[ok])
    assert np.nanmin(g.values) >= v.min() and np.nanmax(g.values) <= v.max()


def test_matches_direct_idw_oracle():
    st = _random_stations(25, 1)
    spec = GridSpec(lon_min=0.0, lon_max=20.0, lat_min=40.0, lat_max=55.0, cell=1.0, neighbors=5)
    g = interpolate(st, spec)
    lons, lats = spec.cell_centers()
    for r in range(0, len(lats), 3):
        for c in range(0, len(lons), 4):
            d = np.array([haversine_km((lons[c], lats[r]), s[:2]) for s in st])
            near = np.argsort(d)[:5]
            if d[near[0]] > 500:
                assert g.mask[r, c]
                continue
            w = d[near] ** -2.0
            expected = np.sum(w * np.array([st[i][2] for i in near])) / w.sum()
            assert g.values[r, c] == pytest.approx(expected, abs=1e-12, rel=1e-12)


@pytest.mark.parametrize("c", [1.0, -37.5, 1e3])
def test_translation_equivariance(c):
    st = _random_stations(30, 2)
    g0 = interpolate(st, SMALL)
    g1 = interpolate([(a, b, v + c) for a, b, v in st], SMALL)
    assert np.array_equal(g0.mask, g1.mask)
    ok = ~g0.mask
    assert np.abs(g1.values[ok] - g0.values[ok] - c).max() <= 1e-12 * max(1.0, abs(c))


def test_duplicate_coordinates_are_merged(caplog):
    g = interpolate([(5.0, 45.0, 1.0), (5.0, 45.0, 3.0)], SMALL)
    assert np.all(g.values[~g.mask] == 2.0)
    assert "share coordinates" in caplog.text


def test_empty_stations():
    with pytest.raises(EmptyError):
        interpolate([], SMALL)


# -- colour scale ----------------------------------------------------------------

def test_colour_endpoints_and_anchors():
    s = ColorScale(-3.0, 9.0)
    assert tuple(s.rgb(-3.0)) == (0, 0, 131)
    assert tuple(s.rgb(9.0)) == (84, 0, 0)
    assert tuple(s.rgb(-100.0)) == (0, 0, 131)  # clamped
    for k, anchor in enumerate(ANCHORS):
        assert tuple(s.rgb(-3.0 + 12.0 * k / 6)) == tuple(anchor)


def test_colour_between_anchors_rounds_half_up():
    s = ColorScale(0.0, 1.0)
    # halfway between the t = 2/6 and t = 3/6 anchors: (130, 255, 127.5)
    assert tuple(s.rgb(5 / 12)) == (130, 255, 128)


def test_symmetric_and_degenerate_domains():
    s = ColorScale.symmetric([-1.0, 4.0, 2.0])
    assert (s.vmin, s.vmax) == (-4.0, 4.0)
    assert tuple(s.rgb(0.0)) == tuple(ANCHORS[3])
    z = ColorScale.symmetric([0.0, 0.0])
    assert tuple(z.rgb(0.0)) == tuple(ANCHORS[3])


def test_invert_within_one_colour_step():
    s = ColorScale(-20.0, 16.0)
    step = (s.vmax - s.vmin) / 360.0
    for v in np.linspace(-20.0, 16.0, 721):
        assert abs(s.invert(s.rgb(v)) - v) <= step


# -- files -----------------------------------------------------------------------

def test_grid_csv_round_trip(tmp_path):
    g = interpolate(_random_stations(10, 3), GridSpec(lon_min=0.0, lon_max=20.0, lat_min=40.0,
                                                       lat_max=55.0, cell=0.5, max_distance_km=150.0))
    write_grid_csv(g, tmp_path / "g.csv")
    first = (tmp_path / "g.csv").read_text().splitlines()[0]
    assert first == "# 0.0,20.0,40.0,55.0,0.5"
    extent, raster = read_grid_csv(tmp_path / "g.csv")
    assert extent == (0.0, 20.0, 40.0, 55.0, 0.5)
    assert np.array_equal(np.isnan(raster), g.mask)
    np.testing.assert_allclose(raster[~g.mask], g.values[~g.mask], rtol=1e-9)


def test_png_layout_and_determinism(tmp_path):
    spec = GridSpec(lon_min=0.0, lon_max=20.0, lat_min=40.0, lat_max=55.0, cell=0.25, max_distance_km=200.0)
    st = [(5.0, 45.0, 1.0), (15.0, 50.0, 3.0)]
    g = interpolate(st, spec)
    scale = ColorScale.spanning([1.0, 3.0])
    render_png(g, scale, [s[:2] for s in st], tmp_path / "a.png")
    render_png(g, scale, [s[:2] for s in st], tmp_path / "b.png")
    assert (tmp_path / "a.png").read_bytes() == (tmp_path / "b.png").read_bytes()
    img = np.asarray(Image.open(tmp_path / "a.png"))
    rows, cols = spec.shape
    assert img.dtype == np.uint8 and img.shape[2] == 3 and img.shape[0] == rows and img.shape[1] > cols + 30
    r, c = spec.pixel_of(5.0, 45.0)
    assert np.all(img[r - 1:r + 2, c - 1:c + 2] == 0)
    assert np.all(img[:rows, :cols][g.mask] == MASK_RGB)
    # colour bar: top is vmax, bottom is vmin
    assert tuple(img[0, cols + 15]) == (84, 0, 0)
    assert tuple(img[rows - 1, cols + 15]) == (0, 0, 131)


def test_png_pixels_decode_to_csv_values(tmp_path):
    spec = GridSpec(lon_min=0.0, lon_max=20.0, lat_min=40.0, lat_max=55.0, cell=0.5)
    st = _random_stations(15, 4)
    g = interpolate(st, spec)
    scale = ColorScale.spanning([s[2] for s in st])
    render_png(g, scale, [], tmp_path / "m.png")
    write_grid_csv(g, tmp_path / "m.csv")
    img = np.asarray(Image.open(tmp_path / "m.png"))
    _, raster = read_grid_csv(tmp_path / "m.csv")
    step = (scale.vmax - scale.vmin) / 360.0
    for r, c in zip(*np.nonzero(~g.mask)):
        assert abs(scale.invert(img[r, c]) - raster[r, c]) <= step


def _table(values_by_station):
    parts = [[StationResult(sid, lon, lat, v[i]) for sid, (lon, lat, v) in values_by_station.items()]
             for i in range(3)]
    return assemble_map_table(*parts)


def test_render_five_files_and_midpoint(tmp_path):
    table = _table({"a": (4.0, 44.0, (1.0, 1.0, 1.0)), "b": (16.0, 52.0, (5.0, 5.0, 5.0))})
    out = render_five(table, SMALL, "hvac", tmp_path)
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == sorted([f"hvac_{s}.png" for s in ("Past", "NearFuture", "FarFuture", "DiffNearPast", "DiffFarPast")]
                           + [f"hvac_{s}.grid.csv" for s in ("Past", "NearFuture", "FarFuture", "DiffNearPast", "DiffFarPast")])
    rows, cols = SMALL.shape
    for m in out[3:]:
        img = np.asarray(Image.open(m.png))[:rows, :cols]
        field = img[~m.grid.mask]
        markers = np.all(field == 0, axis=1)
        assert np.all(field[~markers] == m.scale.rgb(0.0))
        assert tuple(m.scale.rgb(0.0)) == tuple(ANCHORS[3])


def test_render_five_shared_period_scale(tmp_path):
    table = _table({"a": (4.0, 44.0, (1.0, 2.0, 9.0)), "b": (16.0, 52.0, (3.0, 4.0, 5.0))})
    out = render_five(table, SMALL, "sc", tmp_path)
    assert out[0].scale == out[1].scale == out[2].scale == ColorScale(1.0, 9.0)
    assert out[3].scale == ColorScale(-1.0, 1.0) and out[4].scale == ColorScale(-8.0, 8.0)
    assert tuple(out[0].scale.rgb(9.0)) == tuple(out[2].scale.rgb(9.0))
