import json

import numpy as np
import pytest

from climmap.errors import ArgumentError, ConfigError
from climmap.statespace import dc_gain, discretize_zoh, simulate, steady_state
from climmap.systems import (
    STEADY, Climate, Constant, HvacConstants, ScConstants, SystemSpec, assemble_inputs,
    build_from_config, build_hvac, build_solar_collector, spec_to_config,
)

from conftest import constant_series


# -- HVAC ------------------------------------------------------------------------

def test_hvac_matrix_entries():
    m = build_hvac().model
    assert m.A[0, 0] == pytest.approx(-201 / 6030, rel=1e-15)
    assert m.A[0, 0] == pytest.approx(-0.03333333, abs=1e-8)
    assert m.B[4, 4] == pytest.approx(-1 / 6030, rel=1e-15)
    assert m.B[4, 4] == pytest.approx(-1.6584e-4, abs=1e-8)
    assert m.B[3, 1] == 0.0
    assert build_hvac(HvacConstants(k=0.5)).model.B[3, 1] == pytest.approx(0.5 * 201 / 6030)
    assert np.array_equal(m.C, np.eye(5)) and not m.D.any()
    assert m.input_names == ("Te", "Ti", "Q1", "Q2", "Q3")


def test_hvac_bindings_and_indicator():
    spec = build_hvac()
    assert spec.bindings == (Climate("TA"), Constant(22), Constant(500), Constant(2000), Constant(500))
    assert spec.indicator.weights == (0, 0, 0, 0, 201.0)
    assert spec.indicator.offset == pytest.approx(-201.0 * 22)
    assert spec.indicator.statistic == "mean"
    assert spec.x0 == STEADY


@pytest.mark.parametrize("k", [0.0, 0.3, 1.0])
def test_hvac_energy_balance_rows(k):
    c = HvacConstants(k=k)
    m = build_hvac(c).model
    caps = np.array(c.capacities())
    temp_cols = np.hstack([m.A, m.B[:, :2]])  # T1..T5, Te, Ti
    assert np.abs(temp_cols.sum(axis=1) * caps).max() < 1e-12


def test_sc_matrix_entries():
    c = ScConstants()
    m = build_solar_collector(c).model
    assert c.mdot * c.c == pytest.approx(67.2, rel=1e-15)
    assert m.A[2, 2] == pytest.approx(-(1 / 3.0) / 300000, rel=1e-15)
    assert m.A[2, 2] == pytest.approx(-1.1111e-6, abs=1e-10)
    assert m.C[1, 1] == pytest.approx(67.2) and np.count_nonzero(m.C) == 1
    assert m.D[1, 1] == pytest.approx(-67.2) and np.count_nonzero(m.D) == 1


def test_sc_energy_balance_rows():
    c = ScConstants()
    m = build_solar_collector(c).model
    caps = np.array([c.C1, c.C2, c.C3])
    temp_cols = np.hstack([m.A, m.B[:, :2]])  # T1..T3, Te, Tsup
    assert np.abs(temp_cols.sum(axis=1) * caps).max() < 1e-12


def test_sc_uniform_equilibrium():
    m = build_solar_collector().model
    x = np.full(3, 10.0)
    u = np.array([10.0, 10.0, 0.0])
    assert np.abs(m.A @ x + m.B @ u).max() < 1e-15
    d = discretize_zoh(m, 3600.0)
    out = []
    simulate(d, np.tile(u, (500, 1)), x, lambda k0, Y: out.append(Y))
    assert np.abs(np.vstack(out)[:, 1]).max() <= 1e-9


def test_sc_dc_gain_te_positive():
    m = build_solar_collector().model
    oracle = -m.C @ np.linalg.solve(m.A, m.B) + m.D
    g = dc_gain(m)
    assert g[1, 0] > 0
    np.testing.assert_allclose(g, oracle, rtol=1e-9, atol=1e-12)


def test_constants_validation():
    with pytest.raises(ArgumentError):
        HvacConstants(k=1.5)
    with pytest.raises(ArgumentError):
        HvacConstants(V1=0.0)
    with pytest.raises(ArgumentError):
        ScConstants(alpha=1.2)
    with pytest.raises(ArgumentError):
        ScConstants(R1=-1.0)
    assert HvacConstants(k=0.0).k == 0.0


def test_hvac_converges_from_perturbed_state():
    spec = build_hvac()
    u0 = np.array([10.0, 22.0, 500.0, 2000.0, 500.0])
    x_ss, _ = steady_state(spec.model, u0)
    x0 = x_ss + np.array([5.0, -3.0, 4.0, -2.0, 6.0])
    xN = simulate(discretize_zoh(spec.model, 3600.0), np.tile(u0, (72, 1)), x0)
    assert np.abs(xN - x_ss).max() <= 1e-6
    assert np.all(np.linalg.eigvals(spec.model.A).real < 0)


# -- spec and config -------------------------------------------------------------

def test_spec_validation():
    base = build_hvac()
    with pytest.raises(ArgumentError):
        SystemSpec("bad/name", base.model, base.bindings, STEADY, base.indicator)
    with pytest.raises(Exception):
        SystemSpec("ok", base.model, base.bindings[:4], STEADY, base.indicator)
    with pytest.raises(Exception):
        SystemSpec("ok", base.model, base.bindings, (0.0, 0.0), base.indicator)


def test_config_builtin_delegates():
    assert build_from_config({"builtin": "hvac"}) == build_hvac()
    assert build_from_config({"builtin": "sc"}) == build_solar_collector()


def test_config_constant_override():
    spec = build_from_config({"builtin": "sc", "constants": {"Tsup": 15}})
    assert spec.bindings[1] == Constant(15.0)
    assert spec.indicator == build_solar_collector().indicator


def test_config_rejects_bad_b_rows():
    cfg = {"name": "one", "matrices": {"A": [[-1]], "B": [[1], [1]], "C": [[1]], "D": [[0]]},
           "bindings": [{"channel": 0, "source": "climate:TA"}],
           "indicator": {"weights": [1]}}
    with pytest.raises(ConfigError) as info:
        build_from_config(cfg)
    assert info.value.field == "system.matrices.B"
    assert "B rows" in str(info.value)


@pytest.mark.parametrize("cfg,field", [
    ({"builtin": "boiler"}, "system.builtin"),
    ({"builtin": "hvac", "constants": {"Z": 1}}, "system.constants.Z"),
    ({"builtin": "hvac", "bindings": [{"channel": "Te", "source": "climate:XX"}]},
     "system.bindings[0].source"),
    ({"builtin": "hvac", "x0": [1, 2]}, "system.x0"),
    ({"builtin": "hvac", "indicator": {"weights": [1, 2]}}, "system.indicator.weights"),
    ({}, "system"),
])
def test_config_errors_name_field(cfg, field):
    with pytest.raises(ConfigError) as info:
        build_from_config(cfg)
    assert info.value.field == field


def test_config_binding_override():
    spec = build_from_config({"builtin": "sc", "bindings": [
        {"channel": "Te", "source": "climate:TA"}, {"channel": "Tsup", "source": "const:12"},
        {"channel": "Irrad", "source": "climate:ISvar"}]})
    assert spec.bindings == (Climate("TA"), Constant(12.0), Climate("ISvar"))


@pytest.mark.parametrize("builder", [build_hvac, build_solar_collector])
def test_serialize_round_trip(builder):
    spec = builder()
    cfg = json.loads(json.dumps(spec_to_config(spec)))
    assert build_from_config(cfg) == spec


def test_serialize_round_trip_explicit_x0():
    spec = build_from_config({"builtin": "sc", "x0": [1, 2, 3],
                              "indicator": {"weights": [0, 1, 0], "statistic": "percentile", "q": 90}})
    assert build_from_config(json.loads(json.dumps(spec_to_config(spec)))) == spec


# -- inputs ----------------------------------------------------------------------

def test_assemble_hvac_inputs():
    U = next(assemble_inputs(build_hvac().bindings, constant_series(TA=5.0)))
    assert U[0].tolist() == [5.0, 22.0, 500.0, 2000.0, 500.0]


def test_assemble_sc_inputs():
    U = next(assemble_inputs(build_solar_collector().bindings, constant_series(TA=12.0, ISGH=480.0)))
    assert U[0].tolist() == [12.0, 10.0, 480.0]


def test_assemble_constant_only_and_blocking():
    s = constant_series(years=2)
    blocks = list(assemble_inputs((Constant(1.0), Constant(-2.0)), s, block=5000))
    assert [b.shape for b in blocks] == [(5000, 2), (5000, 2), (5000, 2), (2520, 2)]
    U = np.vstack(blocks)
    assert np.all(U == U[0])


def test_assemble_missing_column():
    s = constant_series()
    del s.columns["WS"]
    with pytest.raises(ConfigError):
        next(assemble_inputs((Climate("WS"),), s))


def test_initial_state_policy():
    s = constant_series(TA=10.0)
    spec = build_solar_collector()
    np.testing.assert_allclose(spec.initial_state(s), [10.0, 10.0, 10.0], atol=1e-12)
    singular = build_from_config({"name": "integ", "matrices": {"A": [[0]], "B": [[1]], "C": [[1]], "D": [[0]]},
                                  "bindings": [{"channel": 0, "source": "const:1"}],
                                  "indicator": {"weights": [1]}})
    assert singular.initial_state(s).tolist() == [0.0]
