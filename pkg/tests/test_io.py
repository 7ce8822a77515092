from __future__ import annotations

import json

import numpy as np
import pytest

from lpstab.errors import FormatError
from lpstab.io import dumps_matrix, loads_matrix, read_matrix, write_matrix, write_report
from lpstab.space import explicit, tree, z_interval, zd_box
from lpstab.zoo import dilation_matrix, polynomial_decay_matrix, random_thin_sparse, staircase_matrix

CASES = [
    lambda: dilation_matrix(8, 1.2),
    lambda: staircase_matrix(1.5, 9),
    lambda: polynomial_decay_matrix(z_interval(15), 2.5, seed=3),
    lambda: random_thin_sparse(zd_box((5, 6)), 1, 4, 0.7, seed=1),
    lambda: random_thin_sparse(tree(3, 2), 1, None, 0.7, seed=1),
    lambda: random_thin_sparse(explicit([[0, 1, 2], [1, 0, 1], [2, 1, 0]]), 1, None, 0.9, seed=0),
]


@pytest.mark.parametrize("make", CASES)
def test_round_trip_byte_identical(make, tmp_path):
    A = make()
    text = dumps_matrix(A)
    B = loads_matrix(text)
    assert B == A
    assert dumps_matrix(B) == text
    path = write_matrix(tmp_path / "m.json", A)
    assert path.read_text() == text
    assert read_matrix(path) == A


def test_values_survive_exactly():
    A = polynomial_decay_matrix(z_interval(20), 2.2, seed=0)
    B = loads_matrix(dumps_matrix(A))
    assert np.array_equal(A.todense(), B.todense())


def _err(text):
    with pytest.raises(FormatError) as exc:
        loads_matrix(text)
    return exc.value


def test_parse_errors_carry_lines():
    good = dumps_matrix(staircase_matrix(1, 3))
    lines = good.splitlines()
    bad = "\n".join(lines[:6] + ["    [9, 0, 1.0],"] + lines[6:])
    e = _err(bad)
    assert e.line == 7 and "out of range" in str(e)
    e = _err(good.replace("[1, 1,", "[1, 1, 2,", 1))
    assert e.line is not None
    e = _err(good[:-5])
    assert e.line is not None


def test_rejects_duplicates_and_nonfinite():
    base = {"space": {"kind": "z_interval", "n": 2}, "rows": "same"}
    assert "duplicate" in str(_err(json.dumps({**base, "entries": [[0, 0, 1], [0, 0, 2]]})))
    assert "finite" in str(_err(json.dumps({**base, "entries": [[0, 0, 1e999]]})))
    assert "rows" in str(_err(json.dumps({**base, "rows": -1, "entries": []})))
    assert "missing" in str(_err(json.dumps({"space": base["space"]})))


def test_atomic_report_leaves_no_temp(tmp_path):
    write_report(tmp_path / "r.json", {"x": float("inf"), "y": np.float64(2.5), "z": np.arange(3)})
    assert [p.name for p in tmp_path.iterdir()] == ["r.json"]
    assert json.loads((tmp_path / "r.json").read_text()) == {"x": "inf", "y": 2.5, "z": [0, 1, 2]}
