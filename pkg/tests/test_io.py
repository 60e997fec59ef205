import json
import math

import numpy as np
import pytest

from latgas.errors import ValidationError
from latgas.io import (read_path_binary, read_path_csv, read_profile_csv, to_jsonable,
                       write_json, write_path_binary, write_path_csv)
from latgas.pde import Grid, SpaceTimePath


def _path(periodic=False, loc="node"):
    g = Grid(20, periodic)
    n = g.coords(loc).size
    t = np.linspace(0, 0.3, 4)
    frames = np.random.default_rng(1).uniform(size=(4, n))
    return SpaceTimePath(g, t, frames, "density" if loc == "node" else "current", loc)


@pytest.mark.parametrize("periodic,loc", [(False, "node"), (True, "node"), (False, "cell")])
def test_binary_round_trip(tmp_path, periodic, loc):
    p = _path(periodic, loc)
    write_path_binary(p, tmp_path / "p.bin")
    q = read_path_binary(tmp_path / "p.bin")
    assert q.grid == p.grid and q.kind == p.kind and q.loc == p.loc
    assert np.array_equal(q.frames, p.frames)
    assert np.allclose(q.times, p.times)


def test_binary_bad_magic(tmp_path):
    (tmp_path / "x.bin").write_bytes(b"\0" * 128)
    with pytest.raises(ValidationError):
        read_path_binary(tmp_path / "x.bin")


def test_csv_round_trip(tmp_path):
    p = _path()
    write_path_csv(p, tmp_path / "p.csv")
    q = read_path_csv(tmp_path / "p.csv", 20)
    assert np.array_equal(q.frames, p.frames)
    assert np.array_equal(q.times, p.times)


def test_profile_csv_interpolates(tmp_path):
    f = tmp_path / "g.csv"
    f.write_text("u,value\n0,0.2\n0.5,0.6\n1,0.8\n")
    g = read_profile_csv(f, Grid(16))
    assert g.values[0] == 0.2 and g.values[8] == pytest.approx(0.6) and g.values[-1] == 0.8
    f.write_text("0,0.2\n1,0.8\n")
    assert read_profile_csv(f, Grid(16)).values[8] == pytest.approx(0.5)


def test_profile_csv_rejects_unsorted(tmp_path):
    f = tmp_path / "g.csv"
    f.write_text("0,0.2\n0.7,0.5\n0.3,0.8\n")
    with pytest.raises(ValidationError):
        read_profile_csv(f, Grid(16))


def test_json_special_values(tmp_path):
    obj = {"a": np.float64(math.nan), "b": math.inf, "c": np.arange(3), "d": np.bool_(True)}
    assert to_jsonable(obj) == {"a": None, "b": "inf", "c": [0, 1, 2], "d": True}
    write_json(obj, tmp_path / "o.json")
    assert json.loads((tmp_path / "o.json").read_text())["b"] == "inf"
