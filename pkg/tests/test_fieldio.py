from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from minigraph.fieldio import FieldFormatError, format_field, read_field, write_field
from minigraph.fields import ScalarField, box_mesh, polar_mesh

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@given(arrays(np.float64, (7, 8), elements=finite))
def test_box_round_trip_is_bit_exact(tmp_path_factory, values):
    mesh = box_mesh([[-1.3, 2.7], [0.1, 0.9]], (7, 8))
    path = tmp_path_factory.mktemp("io") / "f.csv"
    write_field(path, ScalarField(mesh, values))
    back = read_field(path)
    assert np.array_equal(back.values, values)
    assert back.mesh.same_as(mesh)
    assert np.array_equal(back.values.view(np.int64), values.view(np.int64))


def test_polar_round_trip_recovers_mesh(tmp_path):
    mesh = polar_mesh(1.05, 4.0, 9, 7)
    field = ScalarField.from_function(mesh, lambda r, t: np.arccosh(r) + 1e-3 * np.cos(t))
    write_field(tmp_path / "p.csv", field)
    back = read_field(tmp_path / "p.csv", mesh)
    assert np.array_equal(back.values, field.values)
    assert back.mesh.same_as(mesh)
    assert back.mesh.periodic == (False, True)


def test_header_layout():
    mesh = box_mesh([[0, 1], [0, 1]], (7, 7))
    text = format_field(ScalarField(mesh, np.zeros((7, 7))))
    lines = text.splitlines()
    assert lines[0] == "# minigraph-field v1, mesh=box, dims=7x7"
    assert lines[1] == "i,j,x1,x2,value"
    assert len(lines) == 2 + 49


def test_wrong_dims_rejected(tmp_path):
    mesh = box_mesh([[0, 1], [0, 1]], (7, 7))
    write_field(tmp_path / "f.csv", ScalarField(mesh, np.ones((7, 7))))
    with pytest.raises(FieldFormatError, match="dims"):
        read_field(tmp_path / "f.csv", box_mesh([[0, 1], [0, 1]], (9, 9)))


def test_row_count_must_match_header(tmp_path):
    mesh = box_mesh([[0, 1], [0, 1]], (7, 7))
    text = format_field(ScalarField(mesh, np.ones((7, 7)))).replace("dims=7x7", "dims=7x8")
    (tmp_path / "f.csv").write_text(text)
    with pytest.raises(FieldFormatError):
        read_field(tmp_path / "f.csv")


def test_v0_header_rejected_with_migration_hint(tmp_path):
    (tmp_path / "old.csv").write_text("# minigraph-field v0, mesh=box, dims=7x7\n0.0\n")
    with pytest.raises(FieldFormatError, match="migrate"):
        read_field(tmp_path / "old.csv")


def test_garbage_header_rejected(tmp_path):
    (tmp_path / "x.csv").write_text("hello\n")
    with pytest.raises(FieldFormatError):
        read_field(tmp_path / "x.csv")
