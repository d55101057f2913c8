import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nvccdd import io as nio
from nvccdd.analysis import damped_sinusoid, fit
from nvccdd.errors import InvalidParameterError
from nvccdd.protocols import TimeTrace


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=50))
def test_table_round_trip_exact(tmp_path_factory, vals):
    p = tmp_path_factory.mktemp("t") / "x.csv"
    nio.write_table(p, ("a", "b"), (vals, vals[::-1]))
    back = nio.read_table(p)
    assert back["a"].tolist() == vals
    assert back["b"].tolist() == vals[::-1]


def test_trace_and_sidecar(tmp_path):
    t = np.linspace(0, 1e-6, 5)
    tr = TimeTrace(t, t + 1, t - 1, 2 * t, metadata={"kind": "rabi", "n": np.int64(3)})
    csv_path, meta = nio.write_trace(tmp_path / "r.csv", tr, seed=4)
    assert csv_path.read_text().splitlines()[0] == "t_s,signal_plus,signal_minus,differential"
    side = json.loads(meta.read_text())
    assert side["schema_version"] == nio.SCHEMA_VERSION
    assert side["n"] == 3 and side["seed"] == 4
    back = nio.read_trace(csv_path)
    assert np.array_equal(back.differential, tr.differential)


def test_writes_are_byte_stable(tmp_path):
    data = {"b": np.float64(0.1), "a": [np.float32(1.5), np.inf], "c": np.bool_(True)}
    nio.write_json(tmp_path / "1.json", data)
    nio.write_json(tmp_path / "2.json", dict(reversed(list(data.items()))))
    assert (tmp_path / "1.json").read_bytes() == (tmp_path / "2.json").read_bytes()
    assert json.loads((tmp_path / "1.json").read_text())["a"][1] == "inf"


def test_bad_tables(tmp_path):
    with pytest.raises(InvalidParameterError):
        nio.write_table(tmp_path / "x.csv", ("a", "b"), ([1, 2], [1]))
    (tmp_path / "e.csv").write_text("")
    with pytest.raises(InvalidParameterError):
        nio.read_table(tmp_path / "e.csv")
    (tmp_path / "s.csv").write_text("a,b\n1,x\n")
    with pytest.raises(InvalidParameterError):
        nio.read_table(tmp_path / "s.csv")
    (tmp_path / "m.csv").write_text("a,b\n1,2\n")
    with pytest.raises(InvalidParameterError):
        nio.read_trace(tmp_path / "m.csv")


def test_fit_report(tmp_path):
    t = np.arange(100) * 1e-7
    m = damped_sinusoid(p=1.0)
    r = fit(m, t, m(t, [0.01, 3e-6, 1.0, 2e6, 0.1, 0.0]))
    rep = json.loads(nio.write_fit_report(tmp_path / "f.json", r, input="x.csv").read_text())
    assert rep["schema_version"] == nio.SCHEMA_VERSION
    assert rep["input"] == "x.csv"
    assert {p["name"] for p in rep["parameters"]} == set(m.names)
