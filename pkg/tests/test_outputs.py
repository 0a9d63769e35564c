import os

import numpy as np
import pytest

from nozzleflow import build_mesh, newton_solve
from nozzleflow.outputs import (
    format_float,
    load_snapshot,
    nodal_velocity,
    save_snapshot,
    write_csv,
    write_vtk,
)


@pytest.fixture()
def solved(unit_cylinder, relation, trunc):
    mesh = build_mesh(unit_cylinder, 2.0, 4, 16)
    m0 = relation.momentum(0.5)
    phi, _ = newton_solve(mesh, trunc, m0)
    return mesh, phi


class TestSnapshot:
    def test_round_trip_exact(self, solved, tmp_path):
        mesh, phi = solved
        path = tmp_path / "solution_snapshot.txt"
        save_snapshot(str(path), mesh, phi, config_hash="cafe01")
        meta, coords, values = load_snapshot(str(path))
        assert meta["config_hash"] == "cafe01"
        assert int(meta["N_t"]) == mesh.N_t and int(meta["N_a"]) == mesh.N_a
        assert np.array_equal(values, phi)  # 17 significant digits are exact
        assert np.abs(coords - mesh.node_coords_phys()).max() == 0.0

    def test_resave_is_bitwise_identical(self, solved, tmp_path):
        mesh, phi = solved
        a, b = tmp_path / "a.txt", tmp_path / "b.txt"
        save_snapshot(str(a), mesh, phi, config_hash="x")
        _, _, values = load_snapshot(str(a))
        save_snapshot(str(b), mesh, values, config_hash="x")
        assert a.read_bytes() == b.read_bytes()

    def test_no_partial_files_left(self, solved, tmp_path):
        mesh, phi = solved
        save_snapshot(str(tmp_path / "s.txt"), mesh, phi)
        leftovers = [p for p in os.listdir(tmp_path) if p.endswith(".part")]
        assert leftovers == []


class TestCsv:
    def test_full_precision_and_headers(self, tmp_path):
        path = tmp_path / "table.csv"
        write_csv(str(path), ["a", "b", "flag"], [(1.0 / 3.0, 2, True)])
        lines = path.read_text().splitlines()
        assert lines[0] == "a,b,flag"
        assert lines[1].split(",")[0] == format_float(1.0 / 3.0)
        assert "0.33333333333333331" == lines[1].split(",")[0]
        assert lines[1].split(",")[1:] == ["2", "1"]


class TestVtk:
    def test_structure_2d(self, solved, trunc, tmp_path):
        mesh, phi = solved
        path = tmp_path / "solution.vtk"
        write_vtk(str(path), mesh, trunc, phi)
        lines = path.read_text().splitlines()
        assert lines[0] == "# vtk DataFile Version 3.0"
        assert lines[2] == "ASCII"
        assert lines[3] == "DATASET STRUCTURED_GRID"
        assert lines[4] == f"DIMENSIONS {mesh.N_t + 1} 1 {mesh.N_a + 1}"
        assert lines[5] == f"POINTS {mesh.n_nodes} double"
        assert f"POINT_DATA {mesh.n_nodes}" in lines
        assert "SCALARS phi double 1" in lines
        assert "VECTORS velocity double" in lines
        assert "SCALARS mach double 1" in lines
        # header + points + point-data sections
        n_data_rows = sum(1 for l in lines if l and not l[0].isalpha() and not l.startswith("#"))
        assert n_data_rows == 4 * mesh.n_nodes

    def test_structure_3d(self, trunc, tmp_path):
        from nozzleflow import Cylinder

        mesh = build_mesh(Cylinder(r0=0.5, dim=3), 1.0, 2, 4)
        path = tmp_path / "solution3d.vtk"
        write_vtk(str(path), mesh, trunc, mesh.ramp_field(0.2))
        lines = path.read_text().splitlines()
        assert lines[4] == f"DIMENSIONS {mesh.N_t + 1} {mesh.N_t + 1} {mesh.N_a + 1}"
        assert lines[5] == f"POINTS {mesh.n_nodes} double"

    def test_nodal_velocity_of_ramp(self, unit_cylinder):
        mesh = build_mesh(unit_cylinder, 2.0, 4, 8)
        q = 0.37
        vel = nodal_velocity(mesh, mesh.ramp_field(q))
        assert np.abs(vel[:, 0]).max() < 1e-13
        assert np.abs(vel[:, 1] - q).max() < 1e-13
