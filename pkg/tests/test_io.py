import json

import numpy as np
import pytest

from qmetop import io


def test_matrix_json_roundtrip_is_bit_exact(tmp_path, rng):
    M = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    path = io.write_matrix(tmp_path / "m.json", M, "Gamma", "zmp", note="x")
    back, meta = io.read_matrix(path)
    assert np.array_equal(back, M)
    assert meta["basis_order"] == "zmp" and meta["kind"] == "Gamma" and meta["note"] == "x"


def test_matrix_json_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(io.FormatError):
        io.read_matrix(bad)
    bad.write_text(json.dumps({"shape": [2, 2], "data": [[[1, 0]]]}))
    with pytest.raises(io.FormatError):
        io.read_matrix(bad)


def test_table_separators(tmp_path):
    t = tmp_path / "t.txt"
    t.write_text("# basis_order: zpm\n1 & 2 \\\\\n3 | 4\n")
    M, meta = io.load_table(t)
    assert np.array_equal(M, [[1, 2], [3, 4]]) and meta["basis_order"] == "zpm"
    t.write_text("1 2\n3\n")
    with pytest.raises(io.FormatError):
        io.load_table(t)
    t.write_text("1 a\n3 4\n")
    with pytest.raises(io.FormatError):
        io.load_table(t)


def test_reference_table_shape():
    M, meta = io.load_table(io.reference_gamma_path())
    assert M.shape == (15, 15)
    assert np.allclose(M, M.T)
    assert meta["basis_order"] == "zmp"


def test_digest_ignores_key_order_and_wall_time():
    a = io.RunManifest("x", {"a": 1, "b": [1, 2]}, {"t": 1e-9}, wall_time=1.0)
    b = io.RunManifest("x", {"b": [1, 2], "a": 1}, {"t": 1e-9}, wall_time=5.0)
    assert a.digest == b.digest
    assert a.digest != io.RunManifest("y", a.config, a.numerics).digest
    assert io.digest({"v": np.float64(1.5)}) == io.digest({"v": 1.5})
