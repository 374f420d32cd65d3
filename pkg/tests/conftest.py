import json
from pathlib import Path

import numpy as np
import pytest

from climmap.climate_io import (
    HOURS_PER_YEAR, PERIODS, STORED_CODES, ClimateSeries, GeoHeader, write_climate_file,
)

_ACCEPTANCE: list[tuple[str, str, str]] = []


def constant_series(lon=5.0, lat=50.0, years=1, **values) -> ClimateSeries:
    """Series with every column constant; defaults are mild, in-range values."""
    base = {"TA": 10.0, "HREL": 70.0, "ISGH": 0.0, "ISD": 0.0, "PSTA": 101325.0, "RN": 0.0,
            "WD": 180.0, "WS": 3.0, "CI": 0.5, "ILAH": 330.0, "ILTH": 330.0, "GT": 10.0, "GR": 0.2}
    base.update(values)
    n = years * HOURS_PER_YEAR
    cols = {c: np.full(n, float(base[c])) for c in STORED_CODES}
    return ClimateSeries.from_columns(GeoHeader(lon, lat), cols)


def write_periods(root: Path, series_by_station: dict[str, dict[str, ClimateSeries]]) -> dict[str, Path]:
    """Write ``{station: {period: series}}`` under ``root/{past,near,far}``."""
    dirs = {p: root / p for p in PERIODS}
    for d in dirs.values():
        d.mkdir(parents=True, exist_ok=True)
    for sid, by_period in series_by_station.items():
        for p in PERIODS:
            write_climate_file(by_period[p], dirs[p] / f"{sid}.clim")
    return dirs


def write_config(path: Path, name: str, dirs: dict[str, Path], **extra) -> Path:
    cfg = {"name": name,
           "periods": [{"key": k, "dir": str(v)} for k, v in dirs.items()],
           "out_dir": str(path.parent / f"out_{name}"),
           "grid": {"cell": 1.0}}
    cfg.update(extra)
    path.write_text(json.dumps(cfg))
    return path


@pytest.fixture
def acceptance_record():
    def record(criterion: str, passed: bool, detail: str = ""):
        _ACCEPTANCE.append((criterion, "PASS" if passed else "FAIL", detail))
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, status, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"[{status}] {criterion}" + (f"  ({detail})" if detail else ""))
