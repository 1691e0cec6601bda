# test_runconfig.py
import importlib.util
import json
import pathlib

import numpy as np
import pytest

from core import ConfigError, DecoherenceParams, ValidationError
from helpers import read_csv
from runconfig import (
    CsvTable,
    TimeSeries,
    config_fingerprint,
    format_value,
    load_config,
    parse_config,
    serialize_config,
    standard_metadata,
)


def _parse(doc):
    return parse_config(json.dumps(doc))


# ─── Parsing ───────────────────────────────────────────────────────────────────
def test_reference_config_parses(reference_doc):
    cfg = _parse(reference_doc)
    assert cfg.dim == 2
    assert cfg.params == DecoherenceParams(tau1=0.1, tau2=0.1)
    assert cfg.times.values[-1] == 2.0 and cfg.times.spacing == pytest.approx(0.1)
    assert [obs.name for obs in cfg.observables] == ["sx", "energy"]
    assert cfg.track_elements == ((0, 1), (1, 1))
    assert cfg.seed == 20240601
    assert cfg.rho0.entries[0, 1] == pytest.approx(0.5)


def test_tau_order_is_reported_at_tau1(reference_doc):
    reference_doc["tau1"] = 0.2
    with pytest.raises(ConfigError, match="tau1 <= tau2") as info:
        _parse(reference_doc)
    assert info.value.path == "tau1"


def test_out_of_range_element_is_reported(reference_doc):
    reference_doc["track_elements"] = [[0, 5]]
    with pytest.raises(ConfigError, match="index out of range") as info:
        _parse(reference_doc)
    assert info.value.path == "track_elements[0]"


def test_non_hermitian_hamiltonian_is_reported(reference_doc):
    reference_doc["hamiltonian"] = {"matrix": {"re": [[0.0, 5.0], [0.0, 0.0]]}}
    with pytest.raises(ConfigError, match="not Hermitian") as info:
        _parse(reference_doc)
    assert info.value.path == "hamiltonian.matrix"


def test_bad_matrix_entry_carries_its_index(reference_doc):
    reference_doc["initial_state"] = {"matrix": {"re": [[1.0, 0.0], [0.0, "x"]]}}
    with pytest.raises(ConfigError) as info:
        _parse(reference_doc)
    assert info.value.path == "initial_state.matrix.re[1][1]"


def test_invalid_density_matrix_is_reported(reference_doc):
    reference_doc["initial_state"] = {"matrix": {"re": [[0.7, 0.0], [0.0, 0.7]]}}
    with pytest.raises(ConfigError, match="trace") as info:
        _parse(reference_doc)
    assert info.value.path == "initial_state.matrix"


def test_malformed_json():
    with pytest.raises(ConfigError, match="malformed JSON"):
        parse_config('{"tau1": 0.1,')


def test_unknown_field_is_rejected(reference_doc):
    reference_doc["tau3"] = 1.0
    with pytest.raises(ConfigError, match="unknown field") as info:
        _parse(reference_doc)
    assert info.value.path == "tau3"


def test_seed_must_fit_in_64_bits(reference_doc):
    reference_doc["seed"] = 2 ** 64
    with pytest.raises(ConfigError, match="64 bits"):
        _parse(reference_doc)


def test_duplicate_observable_names(reference_doc):
    reference_doc["observables"][1]["name"] = "sx"
    with pytest.raises(ConfigError) as info:
        _parse(reference_doc)
    assert info.value.path == "observables[1].name"


def test_unknown_observable_lookup(reference_doc):
    cfg = _parse(reference_doc)
    np.testing.assert_array_equal(cfg.observable("sx").matrix, [[0, 1], [1, 0]])
    with pytest.raises(ConfigError, match="unknown observable"):
        cfg.observable("sz")


def test_coherent_initial_state(reference_doc):
    reference_doc["hamiltonian"] = {"eigenvalues": [n + 0.5 for n in range(44)]}
    reference_doc["initial_state"] = {"coherent": {"alpha_re": 2.0}}
    reference_doc["observables"] = []
    reference_doc["track_elements"] = [[1, 0]]
    cfg = _parse(reference_doc)
    assert cfg.rho0.dim == 44
    assert cfg.document["initial_state"]["coherent"] == {"alpha_re": 2.0, "alpha_im": 0.0, "dim": 44}


def test_load_config_reports_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(str(tmp_path / "absent.json"))


def test_round_trip_and_fingerprint(reference_doc, write_config):
    cfg = load_config(write_config(reference_doc))
    again = parse_config(serialize_config(cfg))
    assert again.document == cfg.document
    assert config_fingerprint(again) == config_fingerprint(cfg)
    assert len(config_fingerprint(cfg)) == 64
    reference_doc["tau2"] = 0.2
    assert config_fingerprint(_parse(reference_doc)) != config_fingerprint(cfg)


# ─── CSV Artifacts ─────────────────────────────────────────────────────────────
def test_format_value():
    assert format_value(0.1) == "0.10000000000000001"
    assert format_value(True) == "1"
    assert format_value(np.int64(7)) == "7"
    assert format_value("sx") == "sx"


def test_table_renders_metadata_then_rows():
    table = CsvTable(columns=["omega", "gamma"])
    table.add_row([1.0, 0.5])
    table.add_row({"gamma": 0.25, "omega": 2.0})
    standard_metadata(table, DecoherenceParams(0.1, 0.2), seed=3)
    text = table.render()
    assert text.startswith("# library_version: ")
    metadata, rows = read_csv(text)
    assert metadata["tau2"] == "0.20000000000000001"
    assert metadata["seed"] == "3"
    assert rows == [{"omega": "1", "gamma": "0.5"}, {"omega": "2", "gamma": "0.25"}]
    with pytest.raises(ValidationError):
        table.add_row([1.0])


def test_time_series_splits_complex_channels():
    series = TimeSeries(times=[0.0, 0.5, 1.0])
    series.add("rho_0_1", np.array([0.5, 0.25j, -1.0]))
    series.add("sx", [1.0, 0.5, 0.0])
    table = series.table()
    assert table.columns == ["time", "rho_0_1_re", "rho_0_1_im", "sx"]
    assert table.rows[1] == [0.5, 0.0, 0.25, 0.5]
    with pytest.raises(ValidationError, match="duplicate"):
        series.add("sx", [0.0, 0.0, 0.0])


def test_time_series_needs_increasing_times():
    with pytest.raises(ValidationError, match="strictly increasing"):
        TimeSeries(times=[0.0, 1.0, 1.0])
    with pytest.raises(ValidationError):
        TimeSeries(times=[0.0, 1.0]).add("x", [1.0])


def test_shipped_reference_configs_parse(tmp_path):
    script = pathlib.Path(__file__).resolve().parent.parent / "scripts" / "make_reference_configs.py"
    spec = importlib.util.spec_from_file_location("make_reference_configs", script)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    paths = module.write_reference_configs(str(tmp_path))
    assert len(paths) == len(module.reference_configs())
    for path in paths:
        cfg = load_config(path)
        assert cfg.seed is not None
        assert all(n < cfg.dim and m < cfg.dim for n, m in cfg.track_elements)
