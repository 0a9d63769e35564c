"""Energy, weak-form residual, Jacobian, and flux integrals on a mesh.

The discrete energy is

    J_h(phi) = sum_qp wJ * F(|grad_x phi|^2)  -  m0 * <outlet_load, phi>,

with the physical gradient obtained through the precomputed pullback tables.
The residual is its exact gradient with respect to the free coefficients and
the Jacobian the exact derivative of the residual, so finite-difference
consistency holds to quadrature roundoff.  Dirichlet rows and columns are
eliminated symmetrically (zeroed, unit diagonal); the pinned value is zero,
so no lifting terms appear.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend
from .gas import TruncatedDensity, truncated_density_array
from .mesh import Mesh

__all__ = [
    "SparseSystem",
    "assemble_energy",
    "assemble_residual",
    "assemble_jacobian",
    "assemble_residual_jacobian",
    "flux_through_section",
    "flux_profile",
    "gradients_at_quadrature",
    "speed_sq_at_quadrature",
]


@dataclass
class SparseSystem:
    """Symmetric CSR matrix plus the Newton right-hand side."""

    indptr: np.ndarray
    indices: np.ndarray
    values: np.ndarray
    rhs: np.ndarray
    diag_slots: np.ndarray

    @property
    def n(self) -> int:
        return self.indptr.shape[0] - 1

    def diagonal(self) -> np.ndarray:
        return self.values[self.diag_slots]

    def matvec(self, x: np.ndarray) -> np.ndarray:
        out = np.empty_like(x)
        backend.kernels().csr_matvec(self.indptr, self.indices, self.values, x, out)
        return out

    def to_scipy(self):
        from scipy import sparse

        return sparse.csr_matrix(
            (self.values, self.indices, self.indptr), shape=(self.n, self.n)
        )

    def symmetry_defect(self) -> float:
        a = self.to_scipy()
        d = a - a.T
        return float(np.abs(d.data).max()) if d.nnz else 0.0


def assemble_energy(mesh: Mesh, trunc: TruncatedDensity, phi: np.ndarray, m0: float) -> float:
    """Truncated-domain energy of a coefficient vector."""
    vol = backend.kernels().energy(mesh.conn, phi, mesh.G, mesh.wJ, trunc.kernel_params())
    return vol - m0 * float(mesh.outlet_load @ phi)


def assemble_residual(mesh: Mesh, trunc: TruncatedDensity, phi: np.ndarray, m0: float) -> np.ndarray:
    """Gradient of the energy w.r.t. free coefficients (Dirichlet rows zero)."""
    out = np.zeros(mesh.n_nodes)
    backend.kernels().residual_volume(
        mesh.conn, phi, mesh.G, mesh.wJ, trunc.kernel_params(), out
    )
    out -= m0 * mesh.outlet_load
    out[mesh.dirichlet] = 0.0
    return out


def assemble_jacobian(mesh: Mesh, trunc: TruncatedDensity, phi: np.ndarray,
                      rhs: np.ndarray | None = None) -> SparseSystem:
    """Second derivative of the energy, symmetrically Dirichlet-eliminated."""
    vals = np.zeros(mesh.nnz)
    backend.kernels().jacobian_csr(
        mesh.conn, phi, mesh.G, mesh.wJ, trunc.kernel_params(), mesh.emap, vals
    )
    vals[mesh.bc_zero_slots] = 0.0
    vals[mesh.bc_diag_slots] = 1.0
    if rhs is None:
        rhs = np.zeros(mesh.n_nodes)
    return SparseSystem(mesh.indptr, mesh.indices, vals, rhs, mesh.diag_slots)


def assemble_residual_jacobian(mesh: Mesh, trunc: TruncatedDensity, phi: np.ndarray, m0: float):
    """Residual and linearized system with rhs = -residual (Newton step)."""
    res = assemble_residual(mesh, trunc, phi, m0)
    system = assemble_jacobian(mesh, trunc, phi, rhs=-res)
    return res, system


def gradients_at_quadrature(mesh: Mesh, phi: np.ndarray) -> np.ndarray:
    """Physical gradients at every volume quadrature point, (ncells, nq, n)."""
    return np.einsum("cqkd,ck->cqd", mesh.G, phi[mesh.conn])


def speed_sq_at_quadrature(mesh: Mesh, phi: np.ndarray) -> np.ndarray:
    g = gradients_at_quadrature(mesh, phi)
    return np.einsum("cqd,cqd->cq", g, g)


def _layer_flux(mesh: Mesh, trunc: TruncatedDensity, phi: np.ndarray, cells: slice) -> float:
    conn = mesh.conn[cells]
    grads = np.einsum("cqkd,ck->cqd", mesh.Gm[cells], phi[conn])
    t = np.einsum("cqd,cqd->cq", grads, grads)
    th = truncated_density_array(t, trunc.kernel_params())
    return float(np.sum(mesh.wm[cells] * th * grads[..., -1]))


def flux_through_section(mesh: Mesh, trunc: TruncatedDensity, phi: np.ndarray,
                         station: float) -> float:
    """Mass flux through the cross-section nearest to the given axial station.

    Evaluated at the axial midplane of the nearest cell layer, where the
    axial gradient of a multilinear field is single-valued.
    """
    layer = mesh.layer_of_station(station)
    return _layer_flux(mesh, trunc, phi, mesh.layer_cells(layer))


def flux_profile(mesh: Mesh, trunc: TruncatedDensity, phi: np.ndarray) -> np.ndarray:
    """Mass flux through every axial midplane, shape (N_a,)."""
    grads = np.einsum("cqkd,ck->cqd", mesh.Gm, phi[mesh.conn])
    t = np.einsum("cqd,cqd->cq", grads, grads)
    th = truncated_density_array(t, trunc.kernel_params())
    per_cell = np.sum(mesh.wm * th * grads[..., -1], axis=1)
    return per_cell.reshape(mesh.N_a, mesh.cells_per_layer).sum(axis=1)
