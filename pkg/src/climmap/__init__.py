"""Map the performance of building systems under past and future hourly climates.

Continuous-time linear state-space models are driven hour by hour by station
climate files for three periods, each run is reduced to one performance value
per station, and the values are interpolated into five maps.
"""

from .climate_io import (
    ALL_CODES, PERIODS, STORED_CODES, ClimateSeries, GeoHeader, PeriodDataset,
    derive_isvar, generate_dataset, generate_station, load_periods,
    parse_climate_file, write_climate_file,
)
from .errors import (
    ArgumentError, ClimmapError, ClimmapIOError, ConfigError, DimensionError,
    DivergenceError, EmptyError, JoinError, LengthError, NumericError, ParseError,
    SingularError,
)
from .maprender import ColorScale, GridSpec, MapGrid, haversine_km, interpolate, render_five, render_png
from .perf import (
    MapTable, PerformanceIndicator, StationResult, assemble_map_table, climate_stat,
    reduce_stream, run_station,
)
from .pipeline import load_config, parse_config, place_stations, run_pipeline
from .statespace import DiscreteModel, StateSpaceModel, dc_gain, discretize_zoh, expm, simulate, steady_state
from .systems import (
    Climate, Constant, HvacConstants, ScConstants, SystemSpec, assemble_inputs,
    build_from_config, build_hvac, build_solar_collector, spec_to_config,
)

__version__ = "0.1.0"
