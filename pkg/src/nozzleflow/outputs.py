"""Snapshot, CSV, and legacy-VTK writers.

Everything is plain text written atomically (temp file + rename), floats
carry 17 significant digits so identical runs produce byte-identical files
and snapshots round-trip exactly.
"""

from __future__ import annotations

import os
import tempfile

import numpy as np

from .gas import TruncatedDensity
from .mesh import Mesh, _basis_tables

__all__ = [
    "atomic_write_text",
    "format_float",
    "write_csv",
    "save_snapshot",
    "load_snapshot",
    "write_vtk",
    "nodal_velocity",
]


def format_float(x) -> str:
    return format(float(x), ".17g")


def atomic_write_text(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str, header, rows) -> None:
    """CSV with a documented stable header; floats at 17 significant digits."""
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for item in row:
            if isinstance(item, (bool, np.bool_)):
                cells.append("1" if item else "0")
            elif isinstance(item, (int, np.integer)):
                cells.append(str(int(item)))
            elif isinstance(item, str):
                cells.append(item)
            else:
                cells.append(format_float(item))
        lines.append(",".join(cells))
    atomic_write_text(path, "\n".join(lines) + "\n")


# -- solution snapshots -------------------------------------------------------


def save_snapshot(path: str, mesh: Mesh, phi: np.ndarray, config_hash: str = "") -> None:
    """Text snapshot: header with the config hash, then node coords and phi."""
    coords = mesh.node_coords_phys()
    lines = [
        "# nozzleflow snapshot",
        f"# config-hash: {config_hash}",
        f"# n={mesh.n} N_t={mesh.N_t} N_a={mesh.N_a} L={format_float(mesh.L)}",
        "# columns: " + " ".join(f"x{d + 1}" for d in range(mesh.n)) + " phi",
    ]
    for row, value in zip(coords, phi):
        lines.append(" ".join(format_float(v) for v in row) + " " + format_float(value))
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_snapshot(path: str):
    """Parse a snapshot; returns (meta dict, coords array, phi array)."""
    meta: dict = {}
    coords = []
    values = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line.lstrip("#").strip()
                if body.startswith("config-hash:"):
                    meta["config_hash"] = body.split(":", 1)[1].strip()
                elif "=" in body and not body.startswith("columns"):
                    for tok in body.split():
                        if "=" in tok:
                            k, v = tok.split("=", 1)
                            meta[k] = v
                continue
            parts = line.split()
            coords.append([float(p) for p in parts[:-1]])
            values.append(float(parts[-1]))
    return meta, np.array(coords), np.array(values)


# -- VTK ----------------------------------------------------------------------


def nodal_velocity(mesh: Mesh, phi: np.ndarray) -> np.ndarray:
    """Node-averaged physical gradient (cell-corner values averaged)."""
    signs = mesh._signs
    _, grads_ref = _basis_tables(signs, signs)  # basis gradients at corners
    scale = np.array([2.0 / mesh.h_t] * (mesh.n - 1) + [2.0 / mesh.h_a])
    dN = grads_ref * scale[None, None, :]
    corner_ref = mesh.node_coords_ref()[mesh.conn]  # (ncells, nn, n)
    M, _ = mesh._geometry_matrix(corner_ref[..., -1], corner_ref[..., :-1])
    grad_y = np.einsum("pkj,ck->cpj", dN, phi[mesh.conn])
    grad_x = np.einsum("cpij,cpj->cpi", M, grad_y)
    out = np.zeros((mesh.n_nodes, mesh.n))
    count = np.zeros(mesh.n_nodes)
    np.add.at(out, mesh.conn, grad_x)
    np.add.at(count, mesh.conn, 1.0)
    return out / count[:, None]


def write_vtk(path: str, mesh: Mesh, trunc: TruncatedDensity, phi: np.ndarray) -> None:
    """Legacy ASCII structured grid with phi, velocity, and Mach point data."""
    coords = mesh.node_coords_phys()
    vel = nodal_velocity(mesh, phi)
    q2 = np.sum(vel**2, axis=1)
    rho_eff = np.asarray(trunc.theta(q2))
    gamma = trunc.base.gamma
    c = np.sqrt(rho_eff ** (gamma - 1.0))
    mach = np.sqrt(q2) / c
    if mesh.n == 2:
        dims = (mesh.N_t + 1, 1, mesh.N_a + 1)
        pts = np.column_stack([coords[:, 0], np.zeros(mesh.n_nodes), coords[:, 1]])
        vec = np.column_stack([vel[:, 0], np.zeros(mesh.n_nodes), vel[:, 1]])
    else:
        dims = (mesh.N_t + 1, mesh.N_t + 1, mesh.N_a + 1)
        pts = coords
        vec = vel
    lines = [
        "# vtk DataFile Version 3.0",
        "nozzleflow solution",
        "ASCII",
        "DATASET STRUCTURED_GRID",
        f"DIMENSIONS {dims[0]} {dims[1]} {dims[2]}",
        f"POINTS {mesh.n_nodes} double",
    ]
    lines.extend(" ".join(format_float(v) for v in p) for p in pts)
    lines.append(f"POINT_DATA {mesh.n_nodes}")
    lines.append("SCALARS phi double 1")
    lines.append("LOOKUP_TABLE default")
    lines.extend(format_float(v) for v in phi)
    lines.append("VECTORS velocity double")
    lines.extend(" ".join(format_float(v) for v in p) for p in vec)
    lines.append("SCALARS mach double 1")
    lines.append("LOOKUP_TABLE default")
    lines.extend(format_float(v) for v in mach)
    atomic_write_text(path, "\n".join(lines) + "\n")
