"""Hourly per-station climate files: CLIM1 format, synthetic generator, period datasets.

CLIM1 layout (UTF-8 text)::

    CLIM1
    LON <v>
    LAT <v>
    HGT <v>
    TZ <v>
    DT <v>
    COLS TA HREL ISGH ISD PSTA RN WD WS CI ILAH ILTH GT GR
    <n_hours rows of 13 space-separated numbers, 6 significant digits>

Lines starting with ``#`` after the first line are comments. Direct horizontal
radiation ``ISvar`` is not stored; it is derived on load as ``max(ISGH - ISD, 0)``.
Years have 365 days (8760 hours), no leap days.
"""

from __future__ import annotations

import io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from .errors import ArgumentError, ClimmapIOError, JoinError, LengthError, ParseError

log = logging.getLogger(__name__)

__all__ = [
    "STORED_CODES",
    "ALL_CODES",
    "HOURS_PER_YEAR",
    "PERIODS",
    "PERIOD_TITLES",
    "GeoHeader",
    "ClimateSeries",
    "PeriodDataset",
    "parse_climate_file",
    "derive_isvar",
    "write_climate_file",
    "generate_station",
    "generate_dataset",
    "load_periods",
]

STORED_CODES = ("TA", "HREL", "ISGH", "ISD", "PSTA", "RN", "WD", "WS",
                "CI", "ILAH", "ILTH", "GT", "GR")
ALL_CODES = STORED_CODES + ("ISvar",)
HOURS_PER_YEAR = 8760
PERIODS = ("past", "near", "far")
PERIOD_TITLES = {"past": "Past", "near": "Near Future", "far": "Far Future"}
CLIM_SUFFIX = ".clim"

_HEADER_KEYS = ("LON", "LAT", "HGT", "TZ", "DT")
_COLS_LINE = "COLS " + " ".join(STORED_CODES)


@dataclass(frozen=True)
class GeoHeader:
    """Station location and sampling metadata."""

    longitude: float
    latitude: float
    height: float = 0.0
    time_zone: float = 0.0
    time_step: float = 1.0

    def __post_init__(self):
        for name in ("longitude", "latitude", "height", "time_zone", "time_step"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ArgumentError(f"{name} must be finite")
            object.__setattr__(self, name, v)
        if not -180.0 < self.longitude <= 180.0:
            raise ArgumentError(f"longitude {self.longitude} outside (-180, 180]")
        if not -90.0 <= self.latitude <= 90.0:
            raise ArgumentError(f"latitude {self.latitude} outside [-90, 90]")
        if self.time_step != 1.0:
            raise ArgumentError(f"only hourly data is supported, got time step {self.time_step}")


def derive_isvar(isgh, isd) -> np.ndarray:
    """Direct horizontal radiation, ``max(ISGH - ISD, 0)`` elementwise."""
    isgh = np.asarray(isgh, dtype=float)
    isd = np.asarray(isd, dtype=float)
    if isgh.shape != isd.shape:
        raise LengthError(f"ISGH has length {isgh.size}, ISD has length {isd.size}")
    return np.maximum(isgh - isd, 0.0)


def _clamp_columns(columns: dict[str, np.ndarray]) -> dict[str, int]:
    counts = {}
    for code, lo, hi in (("HREL", 0.0, 100.0), ("ISGH", 0.0, None),
                         ("ISD", 0.0, None), ("WS", 0.0, None)):
        col = columns[code]
        bad = (col < lo) if hi is None else ((col < lo) | (col > hi))
        n_bad = int(np.count_nonzero(bad))
        if n_bad:
            columns[code] = np.clip(col, lo, hi)
            counts[code] = n_bad
    return counts


@dataclass(frozen=True, eq=False)
class ClimateSeries:
    """One station's header plus its hourly climate columns.

    ``columns`` maps every code in :data:`ALL_CODES` to a read-only float array
    of length ``n_hours``. Build instances with :meth:`from_columns`.
    """

    header: GeoHeader
    columns: Mapping[str, np.ndarray]
    clamp_counts: Mapping[str, int] = field(default_factory=dict)

    @classmethod
    def from_columns(cls, header: GeoHeader, columns: Mapping[str, Sequence[float]],
                     *, clamp: bool = False) -> "ClimateSeries":
        """Validate stored columns, optionally clamp, and derive ISvar."""
        missing = [c for c in STORED_CODES if c not in columns]
        if missing:
            raise LengthError(f"missing climate columns: {', '.join(missing)}")
        cols = {c: np.array(columns[c], dtype=float).reshape(-1) for c in STORED_CODES}
        lengths = {c.size for c in cols.values()}
        if len(lengths) != 1:
            raise LengthError("climate columns have unequal lengths")
        n = lengths.pop()
        if n == 0 or n % HOURS_PER_YEAR:
            raise LengthError(f"{n} hours is not a positive multiple of {HOURS_PER_YEAR}")
        counts = _clamp_columns(cols) if clamp else {}
        cols["ISvar"] = derive_isvar(cols["ISGH"], cols["ISD"])
        for arr in cols.values():
            arr.setflags(write=False)
        return cls(header, cols, counts)

    @property
    def n_hours(self) -> int:
        return self.columns["TA"].size

    def __getitem__(self, code: str) -> np.ndarray:
        return self.columns[code]

    def __eq__(self, other):
        if not isinstance(other, ClimateSeries):
            return NotImplemented
        return (self.header == other.header
                and set(self.columns) == set(other.columns)
                and all(np.array_equal(v, other.columns[k]) for k, v in self.columns.items()))

    __hash__ = None


# ---------------------------------------------------------------------------
# Reading
# ---------------------------------------------------------------------------

def _read_header(lines, path):
    """Consume header lines; returns (GeoHeader, number of lines consumed)."""
    lineno = 0

    def next_line():
        nonlocal lineno
        for raw in lines:
            lineno += 1
            s = raw.strip()
            if lineno > 1 and (not s or s.startswith("#")):
                continue
            return s
        raise ParseError(lineno, "unexpected end of file in header", path)

    if next_line() != "CLIM1":
        raise ParseError(1, "first line must be 'CLIM1'", path)
    values = {}
    for key in _HEADER_KEYS:
        toks = next_line().split()
        if len(toks) != 2 or toks[0] != key:
            raise ParseError(lineno, f"expected '{key} <value>'", path)
        try:
            values[key] = float(toks[1])
        except ValueError:
            raise ParseError(lineno, f"bad number {toks[1]!r} for {key}", path) from None
        if not math.isfinite(values[key]):
            raise ParseError(lineno, f"non-finite value for {key}", path)
    if next_line().split() != _COLS_LINE.split():
        raise ParseError(lineno, f"expected '{_COLS_LINE}'", path)
    try:
        header = GeoHeader(values["LON"], values["LAT"], values["HGT"], values["TZ"], values["DT"])
    except ArgumentError as exc:
        raise ParseError(lineno, str(exc), path) from None
    return header, lineno


def _locate_bad_row(text_lines, first_lineno, path):
    ncol = len(STORED_CODES)
    for offset, raw in enumerate(text_lines):
        s = raw.strip()
        if not s or s.startswith("#"):
            continue
        lineno = first_lineno + offset
        toks = s.split()
        if len(toks) != ncol:
            raise ParseError(lineno, f"expected {ncol} values, found {len(toks)}", path)
        for tok in toks:
            try:
                v = float(tok)
            except ValueError:
                raise ParseError(lineno, f"bad number {tok!r}", path) from None
            if not math.isfinite(v):
                raise ParseError(lineno, f"non-finite value {tok!r}", path)
    raise ParseError(first_lineno, "malformed data section", path)


def parse_climate_file(path) -> ClimateSeries:
    """Read a CLIM1 file, clamp out-of-range values and derive ISvar.

    Raises
    ------
    ParseError
        Malformed header, wrong column count or non-finite value; carries the
        1-based line number.
    LengthError
        Row count is not a positive multiple of 8760.
    """
    path = str(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ClimmapIOError(f"cannot read {path}: {exc}") from exc
    buf = io.StringIO(text)
    header, consumed = _read_header(buf, path)
    body_start = buf.tell()
    data = None
    try:
        frame = pd.read_csv(
            io.StringIO(text[body_start:]), sep=r"\s+", header=None, comment="#",
            dtype=np.float64, engine="c", na_filter=False, skip_blank_lines=True,
        )
        data = frame.to_numpy(dtype=np.float64)
    except (ValueError, pd.errors.ParserError, pd.errors.EmptyDataError):
        data = None
    if data is None or data.ndim != 2 or data.shape[1] != len(STORED_CODES) \
            or not np.all(np.isfinite(data)):
        if data is not None and data.size == 0:
            raise LengthError(f"{path}: no data rows")
        _locate_bad_row(text[body_start:].splitlines(), consumed + 1, path)
    series = ClimateSeries.from_columns(
        header, {c: data[:, i] for i, c in enumerate(STORED_CODES)}, clamp=True)
    if series.clamp_counts:
        log.warning("%s: clamped %s", path,
                    ", ".join(f"{k}={v}" for k, v in sorted(series.clamp_counts.items())))
    return series


# ---------------------------------------------------------------------------
# Writing
# ---------------------------------------------------------------------------

def write_climate_file(series: ClimateSeries, path) -> None:
    """Write ``series`` as CLIM1; ISvar is omitted."""
    h = series.header
    lines = ["CLIM1",
             f"LON {h.longitude!r}", f"LAT {h.latitude!r}", f"HGT {h.height!r}",
             f"TZ {h.time_zone!r}", f"DT {h.time_step!r}", _COLS_LINE]
    data = np.column_stack([series.columns[c] for c in STORED_CODES])
    out = io.StringIO()
    out.write("\n".join(lines) + "\n")
    np.savetxt(out, data, fmt="%.6g", delimiter=" ")
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(out.getvalue())
    except OSError as exc:
        raise ClimmapIOError(f"cannot write {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Synthetic generator
# ---------------------------------------------------------------------------

def _sin_elevation(lat_deg: float, day: np.ndarray, hour: np.ndarray) -> np.ndarray:
    decl = np.radians(-23.44 * np.cos(2 * np.pi * (day + 10) / 365.0))
    hour_angle = np.radians(15.0 * (hour - 12))
    lat = math.radians(lat_deg)
    return math.sin(lat) * np.sin(decl) + math.cos(lat) * np.cos(decl) * np.cos(hour_angle)


def generate_station(lon: float, lat: float, years: int, scenario_offset_T: float,
                     seed: int, *, height: float = 0.0) -> ClimateSeries:
    """Deterministic synthetic hourly climate for one station.

    Values are rounded to fixed decimals (3 for temperatures, radiation,
    humidity, wind; 4 for cloud index) so that they survive the 6-digit
    CLIM1 serialization unchanged. Scenario offsets that are whole multiples
    of 0.001 K therefore shift TA exactly, file round trip included.
    """
    if int(years) != years or years < 1:
        raise ArgumentError(f"years must be a positive integer, got {years}")
    if not -90.0 <= lat <= 90.0:
        raise ArgumentError(f"latitude {lat} outside [-90, 90]")
    years = int(years)
    n = years * HOURS_PER_YEAR
    t = np.arange(n)
    day = (t // 24) % 365 + 1
    hour = t % 24
    rng = np.random.default_rng(seed)
    ta_noise = rng.uniform(-1.5, 1.5, n)
    ci = np.round(rng.uniform(0.0, 1.0, n), 4)
    hrel_noise = rng.uniform(-10.0, 10.0, n)
    ws_noise = rng.uniform(-3.0, 3.0, n)
    wd = np.round(rng.uniform(0.0, 360.0, n), 3)

    dlat = lat - 35.0
    ta_base = ((25.0 - 0.6 * dlat)
               + (8.0 + 0.15 * abs(dlat)) * np.cos(2 * np.pi * (day - 196) / 365.0)
               + 4.0 * np.cos(2 * np.pi * (hour - 14) / 24.0)
               + ta_noise)
    ta = np.round(np.round(ta_base, 3) + scenario_offset_T, 3)

    isgh = np.round(np.maximum(0.0, 950.0 * _sin_elevation(lat, day, hour)) * (1 - 0.75 * ci), 3)
    isd = np.round(isgh * (0.25 + 0.55 * ci), 3)
    hrel = np.round(np.clip(78.0 - 1.1 * (ta - 10.0) + hrel_noise, 5.0, 100.0), 3)
    ws = np.round(np.abs(3.5 + ws_noise), 3)
    gt = np.round(np.repeat(ta.reshape(years, HOURS_PER_YEAR).mean(axis=1), HOURS_PER_YEAR), 3)

    columns = {
        "TA": ta, "HREL": hrel, "ISGH": isgh, "ISD": isd,
        "PSTA": np.full(n, 101325.0), "RN": np.zeros(n), "WD": wd, "WS": ws, "CI": ci,
        "ILAH": np.full(n, 330.0), "ILTH": np.full(n, 330.0), "GT": gt,
        "GR": np.full(n, 0.2),
    }
    header = GeoHeader(lon, lat, height, float(round(lon / 15.0)), 1.0)
    return ClimateSeries.from_columns(header, columns)


def station_seed(seed: int, index: int) -> int:
    """Per-station seed shared by all three periods."""
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class PeriodDataset:
    """Climate files of one scenario period; ``stations`` are sorted by filename."""

    name: str
    directory: Path
    stations: tuple[Path, ...]

    @property
    def title(self) -> str:
        return PERIOD_TITLES[self.name]

    @property
    def station_ids(self) -> tuple[str, ...]:
        return tuple(p.stem for p in self.stations)

    @classmethod
    def from_directory(cls, name: str, directory) -> "PeriodDataset":
        if name not in PERIODS:
            raise ArgumentError(f"unknown period {name!r}; expected one of {PERIODS}")
        directory = Path(directory)
        if not directory.is_dir():
            raise ClimmapIOError(f"period directory {directory} does not exist")
        files = sorted((p for p in directory.iterdir()
                        if p.is_file() and p.suffix == CLIM_SUFFIX), key=lambda p: p.name)
        return cls(name, directory, tuple(files))


def load_periods(dirs: Mapping[str, str | Path]) -> dict[str, PeriodDataset]:
    """Enumerate the three period directories and check they hold the same files."""
    if set(dirs) != set(PERIODS):
        raise ArgumentError(f"need exactly the periods {PERIODS}, got {sorted(dirs)}")
    sets = {k: PeriodDataset.from_directory(k, dirs[k]) for k in PERIODS}
    ref = {p.name for p in sets["past"].stations}
    for key in ("near", "far"):
        names = {p.name for p in sets[key].stations}
        if names != ref:
            odd = sorted(ref.symmetric_difference(names))[0]
            raise JoinError(Path(odd).stem, f"period '{key}' does not match 'past'")
    return sets


def generate_dataset(stations: Sequence[tuple[float, float]], years: int,
                     offsets: Mapping[str, float], seed: int, out_dir,
                     *, names: Sequence[str] | None = None) -> dict[str, PeriodDataset]:
    """Write one CLIM1 file per station per period under ``out_dir/{past,near,far}``.

    Every period of station ``k`` uses the same seed, so periods differ only by
    their temperature offsets (and what follows from them).
    """
    if not stations:
        raise ArgumentError("need at least one station")
    offsets = {"past": 0.0, **dict(offsets)}
    if set(offsets) != set(PERIODS):
        raise ArgumentError(f"offsets must cover {PERIODS}")
    if names is None:
        names = [f"st{k:04d}" for k in range(len(stations))]
    if len(names) != len(stations) or len(set(names)) != len(names):
        raise ArgumentError("station names must be unique, one per station")
    out_dir = Path(out_dir)
    dirs = {}
    for key in PERIODS:
        dirs[key] = out_dir / key
        try:
            dirs[key].mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ClimmapIOError(f"cannot create {dirs[key]}: {exc}") from exc
    for k, ((lon, lat), name) in enumerate(zip(stations, names)):
        s = station_seed(seed, k)
        for key in PERIODS:
            series = generate_station(lon, lat, years, offsets[key], s)
            write_climate_file(series, dirs[key] / f"{name}{CLIM_SUFFIX}")
    return load_periods(dirs)
