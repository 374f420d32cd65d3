"""Building-system models: the builtin HVAC and solar-collector models, generic
matrix models from config, and input bindings to climate columns.

Builtin model configs look like::

    {"builtin": "hvac", "constants": {"Q2": 2500}}

and generic ones like::

    {"matrices": {"A": [[-1e-4]], "B": [[1e-4]], "C": [[1]], "D": [[0]]},
     "bindings": [{"channel": "u0", "source": "climate:TA"}],
     "x0": "steady",
     "indicator": {"weights": [1], "offset": 0, "statistic": "mean"}}
"""

from __future__ import annotations

import re
from dataclasses import dataclass, fields
from typing import Any, Iterator, Mapping, Sequence

import numpy as np

from .climate_io import ALL_CODES, ClimateSeries
from .errors import ArgumentError, ConfigError, DimensionError, NumericError, SingularError
from .perf import PerformanceIndicator, indicator_from_config, indicator_to_config
from .statespace import DEFAULT_BLOCK, StateSpaceModel, steady_state

__all__ = [
    "HvacConstants",
    "ScConstants",
    "Climate",
    "Constant",
    "SystemSpec",
    "build_hvac",
    "build_solar_collector",
    "build_from_config",
    "spec_to_config",
    "assemble_inputs",
    "STEADY",
]

STEADY = "steady"
_NAME_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_.-]*$")


@dataclass(frozen=True)
class Climate:
    """Input channel fed from a climate column."""

    code: str

    def __post_init__(self):
        if self.code not in ALL_CODES:
            raise ArgumentError(f"unknown climate variable {self.code!r}")

    def __str__(self):
        return f"climate:{self.code}"


@dataclass(frozen=True)
class Constant:
    """Input channel held at a fixed value."""

    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))
        if not np.isfinite(self.value):
            raise ArgumentError("constant input must be finite")

    def __str__(self):
        return f"const:{self.value!r}"


Binding = Climate | Constant


@dataclass(frozen=True)
class HvacConstants:
    """Air-handling unit constants (SI units).

    Volumes ``V1..V5`` give state capacities ``Cn = c * rho * Vn``. ``f`` (valve 2)
    is carried for completeness but enters no equation.
    """

    c: float = 1005.0
    rho: float = 1.2
    V1: float = 5.0
    V2: float = 5.0
    V3: float = 5.0
    V4: float = 5.0
    V5: float = 5.0
    mdot: float = 0.2
    k: float = 1.0
    f: float = 1.0
    K: float = 200.0
    Q1: float = 500.0
    Q2: float = 2000.0
    Q3: float = 500.0
    Ti: float = 22.0

    def __post_init__(self):
        for f_ in fields(self):
            v = float(getattr(self, f_.name))
            object.__setattr__(self, f_.name, v)
            if not np.isfinite(v) or v <= 0 and f_.name != "k":
                raise ArgumentError(f"HVAC constant {f_.name} must be positive, got {v}")
        if not 0.0 <= self.k <= 1.0:
            raise ArgumentError(f"valve position k must lie in [0, 1], got {self.k}")

    def capacities(self) -> tuple[float, ...]:
        return tuple(self.c * self.rho * v for v in (self.V1, self.V2, self.V3, self.V4, self.V5))


@dataclass(frozen=True)
class ScConstants:
    """Brickwork solar-collector constants (SI units)."""

    S: float = 2.0
    c: float = 4200.0
    C1: float = 100000.0
    C2: float = 15000.0
    C3: float = 300000.0
    h: float = 25.0
    mdot: float = 0.016
    R1: float = 0.1
    R2: float = 3.0
    alpha: float = 0.9
    Tsup: float = 10.0

    def __post_init__(self):
        for f_ in fields(self):
            v = float(getattr(self, f_.name))
            object.__setattr__(self, f_.name, v)
            if not np.isfinite(v) or v <= 0:
                raise ArgumentError(f"collector constant {f_.name} must be positive, got {v}")
        if self.alpha > 1.0:
            raise ArgumentError(f"absorption coefficient must be <= 1, got {self.alpha}")


@dataclass(frozen=True, eq=False)
class SystemSpec:
    """Everything needed to simulate one building system at one station.

    ``x0`` is either an explicit state vector or :data:`STEADY`, meaning the
    equilibrium for the first input sample (zeros when ``A`` is singular).
    """

    name: str
    model: StateSpaceModel
    bindings: tuple[Binding, ...]
    x0: tuple[float, ...] | str
    indicator: PerformanceIndicator
    builtin: str | None = None

    def __post_init__(self):
        if not self.name or not _NAME_RE.match(self.name):
            raise ArgumentError(f"system name {self.name!r} is not filesystem-safe")
        bindings = tuple(self.bindings)
        if len(bindings) != self.model.n_inputs:
            raise DimensionError(
                f"{len(bindings)} bindings for a model with {self.model.n_inputs} inputs")
        object.__setattr__(self, "bindings", bindings)
        if self.x0 != STEADY:
            x0 = tuple(float(v) for v in self.x0)
            if len(x0) != self.model.n_states:
                raise DimensionError(f"x0 has length {len(x0)}, expected {self.model.n_states}")
            object.__setattr__(self, "x0", x0)
        if len(self.indicator.weights) != self.model.n_outputs:
            raise DimensionError(
                f"indicator has {len(self.indicator.weights)} weights, "
                f"model has {self.model.n_outputs} outputs")

    def __eq__(self, other):
        if not isinstance(other, SystemSpec):
            return NotImplemented
        return (self.name == other.name and self.model == other.model
                and self.bindings == other.bindings and self.x0 == other.x0
                and self.indicator == other.indicator)

    __hash__ = None

    def input_blocks(self, series: ClimateSeries, block: int = DEFAULT_BLOCK) -> Iterator[np.ndarray]:
        return assemble_inputs(self.bindings, series, block=block)

    def initial_state(self, series: ClimateSeries) -> np.ndarray:
        if self.x0 != STEADY:
            return np.array(self.x0)
        u0 = next(assemble_inputs(self.bindings, series, block=1))[0]
        try:
            return steady_state(self.model, u0)[0]
        except SingularError:
            return np.zeros(self.model.n_states)

    def channel_for(self, code: str) -> int | None:
        """Index of the first input channel bound to climate column ``code``."""
        for i, b in enumerate(self.bindings):
            if isinstance(b, Climate) and b.code == code:
                return i
        return None


# ---------------------------------------------------------------------------
# Builtin models
# ---------------------------------------------------------------------------

def hvac_model(consts: HvacConstants) -> StateSpaceModel:
    c = consts
    C1, C2, C3, C4, C5 = c.capacities()
    kmc = c.k * c.mdot * c.c
    mc = c.mdot * c.c
    hK = c.K / 2.0
    A = [
        [-kmc / C1, 0.0, 0.0, 0.0, 0.0],
        [(kmc - hK) / C2, (-kmc - hK) / C2, hK / C2, 0.0, 0.0],
        [hK / C3, hK / C3, (-kmc - hK) / C3, 0.0, 0.0],
        [0.0, kmc / C4, 0.0, -mc / C4, 0.0],
        [0.0, 0.0, 0.0, mc / C5, -mc / C5],
    ]
    B = [
        [kmc / C1, 0.0, 1.0 / C1, 0.0, 0.0],
        [0.0, hK / C2, 0.0, 0.0, 0.0],
        [0.0, (kmc - hK) / C3, 0.0, 0.0, 0.0],
        [0.0, (1.0 - c.k) * mc / C4, 0.0, 1.0 / C4, 0.0],
        [0.0, 0.0, 0.0, 0.0, -1.0 / C5],
    ]
    return StateSpaceModel(
        A, B, np.eye(5), np.zeros((5, 5)),
        state_names=("T1", "T2", "T3", "T4", "T5"),
        input_names=("Te", "Ti", "Q1", "Q2", "Q3"),
        output_names=("T1", "T2", "T3", "T4", "T5"),
    )


def build_hvac(consts: HvacConstants = HvacConstants(), *, name: str = "hvac") -> SystemSpec:
    """Five-state air-handling unit; performance ``mdot*c*(T5 - Ti)`` in W, averaged."""
    mc = consts.mdot * consts.c
    indicator = PerformanceIndicator(weights=(0.0, 0.0, 0.0, 0.0, mc), offset=-mc * consts.Ti)
    bindings = (Climate("TA"), Constant(consts.Ti), Constant(consts.Q1),
                Constant(consts.Q2), Constant(consts.Q3))
    return SystemSpec(name, hvac_model(consts), bindings, STEADY, indicator, builtin="hvac")


def sc_model(consts: ScConstants) -> StateSpaceModel:
    c = consts
    mc = c.mdot * c.c
    g1, g2 = 1.0 / c.R1, 1.0 / c.R2
    hS = c.h * c.S
    A = [
        [(-hS - g1) / c.C1, g1 / c.C1, 0.0],
        [g1 / c.C2, (-mc - g1 - g2) / c.C2, g2 / c.C2],
        [0.0, g2 / c.C3, -g2 / c.C3],
    ]
    B = [
        [hS / c.C1, 0.0, c.alpha * c.S / c.C1],
        [0.0, mc / c.C2, 0.0],
        [0.0, 0.0, 0.0],
    ]
    C = np.zeros((3, 3))
    C[1, 1] = mc
    D = np.zeros((3, 3))
    D[1, 1] = -mc
    return StateSpaceModel(
        A, B, C, D,
        state_names=("T1", "T2", "T3"),
        input_names=("Te", "Tsup", "Irrad"),
        output_names=("y1", "Pheat", "y3"),
    )


def build_solar_collector(consts: ScConstants = ScConstants(), *, name: str = "sc") -> SystemSpec:
    """Three-node brickwork collector; performance is the mean heat added to the water, W."""
    indicator = PerformanceIndicator(weights=(0.0, 1.0, 0.0), offset=0.0)
    bindings = (Climate("TA"), Constant(consts.Tsup), Climate("ISGH"))
    return SystemSpec(name, sc_model(consts), bindings, STEADY, indicator, builtin="sc")


_BUILTINS = {
    "hvac": (HvacConstants, build_hvac),
    "sc": (ScConstants, build_solar_collector),
}


# ---------------------------------------------------------------------------
# Config
# ---------------------------------------------------------------------------

def _parse_source(text: Any, path: str) -> Binding:
    if not isinstance(text, str) or ":" not in text:
        raise ConfigError(path, "source must be 'climate:CODE' or 'const:VALUE'")
    kind, _, arg = text.partition(":")
    if kind == "climate":
        if arg not in ALL_CODES:
            raise ConfigError(path, f"unknown climate variable {arg!r}")
        return Climate(arg)
    if kind == "const":
        try:
            return Constant(float(arg))
        except (ValueError, ArgumentError):
            raise ConfigError(path, f"bad constant {arg!r}") from None
    raise ConfigError(path, f"unknown source kind {kind!r}")


def _parse_bindings(items: Any, model: StateSpaceModel, path: str) -> tuple[Binding, ...]:
    if not isinstance(items, list):
        raise ConfigError(path, "bindings must be a list")
    slots: list[Binding | None] = [None] * model.n_inputs
    for i, item in enumerate(items):
        ipath = f"{path}[{i}]"
        if not isinstance(item, Mapping) or "channel" not in item or "source" not in item:
            raise ConfigError(ipath, "binding needs 'channel' and 'source'")
        ch = item["channel"]
        if isinstance(ch, bool):
            raise ConfigError(f"{ipath}.channel", "channel must be a name or index")
        if isinstance(ch, int):
            idx = ch
        elif ch in model.input_names:
            idx = model.input_names.index(ch)
        else:
            raise ConfigError(f"{ipath}.channel", f"unknown input channel {ch!r}")
        if not 0 <= idx < model.n_inputs:
            raise ConfigError(f"{ipath}.channel", f"channel index {idx} out of range")
        if slots[idx] is not None:
            raise ConfigError(f"{ipath}.channel", f"channel {ch!r} bound twice")
        slots[idx] = _parse_source(item["source"], f"{ipath}.source")
    missing = [model.input_names[i] for i, s in enumerate(slots) if s is None]
    if missing:
        raise ConfigError(path, f"unbound input channels: {', '.join(missing)}")
    return tuple(slots)


def _parse_matrices(cfg: Any, path: str) -> StateSpaceModel:
    if not isinstance(cfg, Mapping):
        raise ConfigError(path, "matrices must be an object with A, B, C, D")
    mats = {}
    for key in "ABCD":
        rows = cfg.get(key)
        if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
            raise ConfigError(f"{path}.{key}", "must be a non-empty list of rows")
        if len({len(r) for r in rows}) != 1:
            raise ConfigError(f"{path}.{key}", "rows have unequal lengths")
        try:
            mats[key] = np.array(rows, dtype=float)
        except (TypeError, ValueError):
            raise ConfigError(f"{path}.{key}", "entries must be numbers") from None
        if not np.all(np.isfinite(mats[key])):
            raise ConfigError(f"{path}.{key}", "entries must be finite")
    A, B, C, D = (mats[k] for k in "ABCD")
    n = A.shape[0]
    if A.shape[1] != n:
        raise ConfigError(f"{path}.A", f"A must be square, got {A.shape[0]}x{A.shape[1]}")
    if B.shape[0] != n:
        raise ConfigError(f"{path}.B", f"B rows ({B.shape[0]}) != n ({n})")
    if C.shape[1] != n:
        raise ConfigError(f"{path}.C", f"C columns ({C.shape[1]}) != n ({n})")
    if D.shape != (C.shape[0], B.shape[1]):
        raise ConfigError(f"{path}.D", f"D must be {C.shape[0]}x{B.shape[1]}, got {D.shape[0]}x{D.shape[1]}")
    names = {}
    for key, count in (("state_names", n), ("input_names", B.shape[1]), ("output_names", C.shape[0])):
        if key in cfg:
            if not isinstance(cfg[key], list) or len(cfg[key]) != count:
                raise ConfigError(f"{path}.{key}", f"need {count} labels")
            names[key] = tuple(str(s) for s in cfg[key])
    try:
        return StateSpaceModel(A, B, C, D, **names)
    except (DimensionError, NumericError) as exc:
        raise ConfigError(path, str(exc)) from None


def build_from_config(cfg: Mapping[str, Any], *, name: str | None = None,
                      path: str = "system") -> SystemSpec:
    """Validate a model config and return a :class:`SystemSpec`.

    All dimension checks happen here, before any simulation starts.

    Raises
    ------
    ConfigError
        With the dotted path of the offending field.
    """
    if not isinstance(cfg, Mapping):
        raise ConfigError(path, "system must be an object")
    name = cfg.get("name", name)
    if "builtin" in cfg and "matrices" in cfg:
        raise ConfigError(path, "give either 'builtin' or 'matrices', not both")
    if "builtin" in cfg:
        key = cfg["builtin"]
        if key not in _BUILTINS:
            raise ConfigError(f"{path}.builtin", f"unknown builtin {key!r}; expected one of {sorted(_BUILTINS)}")
        const_cls, builder = _BUILTINS[key]
        overrides = cfg.get("constants", {})
        if not isinstance(overrides, Mapping):
            raise ConfigError(f"{path}.constants", "must be an object")
        allowed = {f_.name for f_ in fields(const_cls)}
        for k in overrides:
            if k not in allowed:
                raise ConfigError(f"{path}.constants.{k}", f"unknown constant for {key}")
        try:
            spec = builder(const_cls(**overrides), name=name or key)
        except (ArgumentError, TypeError) as exc:
            raise ConfigError(f"{path}.constants", str(exc)) from None
        model, name = spec.model, spec.name
        bindings, x0, indicator = spec.bindings, spec.x0, spec.indicator
    elif "matrices" in cfg:
        model = _parse_matrices(cfg["matrices"], f"{path}.matrices")
        if "bindings" not in cfg:
            raise ConfigError(f"{path}.bindings", "required for matrix models")
        if "indicator" not in cfg:
            raise ConfigError(f"{path}.indicator", "required for matrix models")
        bindings, x0, indicator = None, STEADY, None
        if not name:
            raise ConfigError(f"{path}.name", "matrix models need a name")
    else:
        raise ConfigError(path, "need 'builtin' or 'matrices'")

    if "bindings" in cfg:
        bindings = _parse_bindings(cfg["bindings"], model, f"{path}.bindings")
    if "x0" in cfg:
        x0 = cfg["x0"]
        if x0 != STEADY:
            if not isinstance(x0, list) or len(x0) != model.n_states:
                raise ConfigError(f"{path}.x0", f"must be 'steady' or a list of {model.n_states} numbers")
            try:
                x0 = tuple(float(v) for v in x0)
            except (TypeError, ValueError):
                raise ConfigError(f"{path}.x0", "entries must be numbers") from None
    if "indicator" in cfg:
        indicator = indicator_from_config(cfg["indicator"], f"{path}.indicator")
        if len(indicator.weights) != model.n_outputs:
            raise ConfigError(f"{path}.indicator.weights",
                              f"need {model.n_outputs} weights, got {len(indicator.weights)}")
    try:
        return SystemSpec(name, model, bindings, x0, indicator,
                          builtin=cfg.get("builtin"))
    except (ArgumentError, DimensionError) as exc:
        raise ConfigError(path, str(exc)) from None


def spec_to_config(spec: SystemSpec) -> dict[str, Any]:
    """Explicit-matrix config that :func:`build_from_config` maps back to ``spec``."""
    m = spec.model
    return {
        "name": spec.name,
        "matrices": {
            "A": m.A.tolist(), "B": m.B.tolist(), "C": m.C.tolist(), "D": m.D.tolist(),
            "state_names": list(m.state_names), "input_names": list(m.input_names),
            "output_names": list(m.output_names),
        },
        "bindings": [{"channel": ch, "source": str(b)} for ch, b in zip(m.input_names, spec.bindings)],
        "x0": spec.x0 if spec.x0 == STEADY else list(spec.x0),
        "indicator": indicator_to_config(spec.indicator),
    }


# ---------------------------------------------------------------------------
# Inputs
# ---------------------------------------------------------------------------

def assemble_inputs(bindings: Sequence[Binding], series: ClimateSeries,
                    *, block: int = DEFAULT_BLOCK) -> Iterator[np.ndarray]:
    """Yield input blocks of shape ``(rows, m)`` built from climate columns and constants.

    Only one block is alive at a time, so long series never need an N x m buffer.
    """
    sources = []
    for i, b in enumerate(bindings):
        if isinstance(b, Climate):
            if b.code not in series.columns:
                raise ConfigError(f"bindings[{i}]", f"climate column {b.code} not in series")
            sources.append(series.columns[b.code])
        else:
            sources.append(b.value)
    n = series.n_hours
    for k0 in range(0, n, block):
        k1 = min(k0 + block, n)
        U = np.empty((k1 - k0, len(sources)))
        for j, src in enumerate(sources):
            U[:, j] = src[k0:k1] if isinstance(src, np.ndarray) else src
        yield U

