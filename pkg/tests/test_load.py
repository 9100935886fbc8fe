import warnings

import numpy as np
import pandas as pd
import pytest

from bsd2dtn.assembly import assemble
from bsd2dtn.geometry import build_box_mesh, make_field
from bsd2dtn.helpers import ConfigError
from bsd2dtn.load import (
    load_spectral,
    read_field_csv,
    read_matrix,
    save_spectral,
    write_matrix,
)
from bsd2dtn.load.binary import MAGIC, SYMMETRIC
from bsd2dtn.spectral import eigensolve


warnings.simplefilter("ignore")

mesh = build_box_mesh(2, 4)
op = assemble(mesh, make_field("metric", "identity", dict(alpha=2.0), mesh))
sd = eigensolve(op, 5)


def test_matrix_file(tmp_path):
    A = np.arange(6.0).reshape(2, 3)
    path = write_matrix(str(tmp_path / "a.bsdm"), A)
    B, flags = read_matrix(path, return_flags=True)
    np.testing.assert_array_equal(A, B)
    assert flags == 0
    with open(path, "rb") as f:
        assert f.read(4) == MAGIC


def test_symmetric_flag(tmp_path):
    S = np.array([[2.0, 1.0], [1.0, 3.0]])
    _, flags = read_matrix(write_matrix(str(tmp_path / "s.bsdm"), S), return_flags=True)
    assert flags & SYMMETRIC


def test_bad_files(tmp_path):
    bad = tmp_path / "bad.bsdm"
    bad.write_bytes(b"XXXX" + bytes(12))
    with pytest.raises(ConfigError):
        read_matrix(str(bad))
    path = write_matrix(str(tmp_path / "t.bsdm"), np.ones((3, 3)))
    with open(path, "rb") as f:
        raw = f.read()
    short = tmp_path / "short.bsdm"
    short.write_bytes(raw[:-8])
    with pytest.raises(ConfigError):
        read_matrix(str(short))
    with pytest.raises(ConfigError):
        write_matrix(str(tmp_path / "cube.bsdm"), np.ones((2, 2, 2)))


def test_field_from_csv(tmp_path):
    values = 1 + 0.1 * mesh.vertices[:, 0]
    frame = pd.DataFrame(dict(vertex=np.arange(mesh.n_vertices), value=values))
    path = tmp_path / "field.csv"
    # order of the rows does not matter
    frame.iloc[::-1].to_csv(path, index=False)
    field = read_field_csv(str(path), "conformal", dict(alpha=2.0), mesh)
    np.testing.assert_allclose(field.values, values)

    frame.iloc[1:].to_csv(path, index=False)
    with pytest.raises(ConfigError):
        read_field_csv(str(path), "conformal", dict(alpha=2.0), mesh)
    frame.rename(columns=dict(vertex="node")).to_csv(path, index=False)
    with pytest.raises(ConfigError):
        read_field_csv(str(path), "conformal", dict(alpha=2.0), mesh)


def test_metric_from_csv(tmp_path):
    columns = dict(vertex=np.arange(mesh.n_vertices))
    columns.update(g11=1.0, g12=0.0, g21=0.0, g22=1.0)
    path = tmp_path / "metric.csv"
    pd.DataFrame(columns).to_csv(path, index=False)
    field = read_field_csv(str(path), "metric", dict(alpha=2.0), mesh)
    expected = np.eye(2)[None].repeat(mesh.n_vertices, 0)
    np.testing.assert_allclose(field.metric_tensor(), expected)


def test_spectral_records(tmp_path):
    paths = save_spectral(sd, str(tmp_path))
    assert paths[0].endswith(".json")
    back = load_spectral(str(tmp_path))
    assert back.K == sd.K
    np.testing.assert_array_equal(back.lambdas, sd.lambdas)
    np.testing.assert_array_equal(back.psis, sd.psis)
    np.testing.assert_array_equal(back.eigvecs, sd.eigvecs)
    assert back.mesh_signature == sd.mesh_signature
    with pytest.raises(ConfigError):
        load_spectral(str(tmp_path), prefix="missing")
