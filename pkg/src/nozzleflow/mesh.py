"""Structured tensor mesh on the truncated reference cylinder.

Multilinear elements on axis-aligned boxes in reference coordinates
y = (y', y_n) in (-1, 1)^(n-1) x (-L, L).  The mesh precomputes everything
assembly needs so the hot kernels only see flat arrays:

* ``G[c, q, k, :]``   physical gradient of basis function k at volume
                      quadrature point q of cell c (nozzle map folded in),
* ``wJ[c, q]``        quadrature weight times the pullback volume element,
* ``Gm`` / ``wm``     the same data on axial cell midplanes (flux integrals),
* CSR sparsity of the multilinear stencil plus the cell-to-slot scatter map,
* the inlet Dirichlet mask and the outlet load vector.

Node ordering is transverse-fastest, axial-slowest; cell c of axial layer
``ia`` satisfies ``ia = c // cells_per_layer`` with layer cells contiguous.
"""

from __future__ import annotations

import numpy as np

from .nozzle import NozzleMap, Profile

__all__ = ["Mesh", "build_mesh", "InvalidResolutionError", "StationError"]

_GAUSS = 1.0 / np.sqrt(3.0)


class InvalidResolutionError(ValueError):
    """Mesh resolution parameters outside the supported range."""


class StationError(ValueError):
    """Axial station outside the truncated domain."""


def _corner_signs(n: int) -> np.ndarray:
    """(2^n, n) table of +-1 corner signs, bit d of row k giving dim d."""
    k = np.arange(2**n)
    bits = (k[:, None] >> np.arange(n)[None, :]) & 1
    return 2.0 * bits - 1.0


def _basis_tables(signs: np.ndarray, pts: np.ndarray):
    """Values and reference gradients of the 2^n multilinear basis functions.

    Returns V[q, k] and dN[q, k, d] at the given reference points
    pts[q, d] in [-1, 1]^n.
    """
    nq, n = pts.shape
    nn = signs.shape[0]
    factors = 0.5 * (1.0 + signs[None, :, :] * pts[:, None, :])  # (nq, nn, n)
    vals = factors.prod(axis=2)
    grads = np.empty((nq, nn, n))
    for d in range(n):
        others = np.delete(factors, d, axis=2).prod(axis=2)
        grads[:, :, d] = 0.5 * signs[None, :, d] * others
    return vals, grads


class Mesh:
    """Tensor-product multilinear mesh for one nozzle and truncation length."""

    def __init__(self, profile: Profile, L: float, N_t: int, N_a: int):
        if L <= 0.0:
            raise InvalidResolutionError(f"axial half-length must be positive, got {L}")
        if N_t < 2 or N_a < 4:
            raise InvalidResolutionError(
                f"need N_t >= 2 and N_a >= 4, got N_t={N_t}, N_a={N_a}"
            )
        self.profile = profile
        self.nozzle_map = NozzleMap(profile)
        self.n = profile.dim
        self.L = float(L)
        self.N_t = int(N_t)
        self.N_a = int(N_a)
        self.h_t = 2.0 / N_t
        self.h_a = 2.0 * L / N_a
        n = self.n
        self.y_t = np.linspace(-1.0, 1.0, N_t + 1)
        self.y_a = np.linspace(-L, L, N_a + 1)
        self.y_a_centers = 0.5 * (self.y_a[:-1] + self.y_a[1:])
        self.n_nodes = (N_t + 1) ** (n - 1) * (N_a + 1)
        self.n_cells = N_t ** (n - 1) * N_a
        self.cells_per_layer = N_t ** (n - 1)
        self.nodes_per_plane = (N_t + 1) ** (n - 1)

        r_nodes = np.asarray(profile.half_width(self.y_a), dtype=float)
        if np.any(r_nodes <= 0.0):
            raise InvalidResolutionError("nozzle half-width is not positive on the mesh")

        self._build_connectivity()
        self._build_quadrature()
        self._build_sparsity()
        self._build_boundary()

    # -- topology ---------------------------------------------------------

    def _cell_multi_index(self):
        """Per-cell transverse indices it[d] and axial index ia."""
        c = np.arange(self.n_cells)
        rem = c
        it = []
        for _ in range(self.n - 1):
            it.append(rem % self.N_t)
            rem = rem // self.N_t
        return it, rem

    def _build_connectivity(self):
        n = self.n
        node_strides = [(self.N_t + 1) ** d for d in range(n - 1)]
        axial_stride = (self.N_t + 1) ** (n - 1)
        it, ia = self._cell_multi_index()
        base = ia * axial_stride
        for d in range(n - 1):
            base = base + it[d] * node_strides[d]
        signs = _corner_signs(n)
        bits = ((signs + 1.0) / 2.0).astype(np.int64)
        offsets = bits[:, n - 1] * axial_stride
        for d in range(n - 1):
            offsets = offsets + bits[:, d] * node_strides[d]
        self.conn = (base[:, None] + offsets[None, :]).astype(np.int64)
        self._signs = signs
        self._node_strides = node_strides
        self._axial_stride = axial_stride

    def node_multi_index(self):
        """Per-node transverse indices and axial index, transverse-fastest."""
        node = np.arange(self.n_nodes)
        rem = node
        idx = []
        for _ in range(self.n - 1):
            idx.append(rem % (self.N_t + 1))
            rem = rem // (self.N_t + 1)
        return idx, rem

    def node_coords_ref(self) -> np.ndarray:
        """Reference coordinates of every node, shape (n_nodes, n)."""
        idx, ia = self.node_multi_index()
        out = np.empty((self.n_nodes, self.n))
        for d in range(self.n - 1):
            out[:, d] = self.y_t[idx[d]]
        out[:, -1] = self.y_a[ia]
        return out

    def node_coords_phys(self) -> np.ndarray:
        """Physical coordinates of every node, shape (n_nodes, n)."""
        y = self.node_coords_ref()
        r = np.asarray(self.profile.half_width(y[:, -1]), dtype=float)
        c = self.profile.offset(y[:, -1])
        x = np.empty_like(y)
        x[:, :-1] = c + r[:, None] * y[:, :-1]
        x[:, -1] = y[:, -1]
        return x

    # -- quadrature and pullback tables -----------------------------------

    def _geometry_matrix(self, y_ax, y_tr):
        """Gradient pullback matrix M[i, j] = d y_j / d x_i at given points.

        y_ax: (...,) axial coordinates; y_tr: (..., n-1) transverse reference
        coordinates of the same points.
        """
        n = self.n
        r = np.asarray(self.profile.half_width(y_ax), dtype=float)
        dr = np.asarray(self.profile.half_width_prime(y_ax), dtype=float)
        dc = self.profile.offset_prime(y_ax)
        M = np.zeros(y_ax.shape + (n, n))
        for a in range(n - 1):
            M[..., a, a] = 1.0 / r
            M[..., n - 1, a] = -(dc[..., a] + dr * y_tr[..., a]) / r
        M[..., n - 1, n - 1] = 1.0
        return M, r

    def _build_quadrature(self):
        n = self.n
        nn = 2**n
        signs = self._signs
        it, ia = self._cell_multi_index()
        t_centers = 0.5 * (self.y_t[:-1] + self.y_t[1:])

        # Volume rule: 2-point Gauss per direction.
        pts = signs * _GAUSS  # (nq, n) with nq = 2^n
        vals, grads = _basis_tables(signs, pts)
        scale = np.array([2.0 / self.h_t] * (n - 1) + [2.0 / self.h_a])
        dN = grads * scale[None, None, :]  # reference-cell -> reference-domain
        nq = pts.shape[0]

        qy_ax = self.y_a_centers[ia][:, None] + 0.5 * self.h_a * pts[None, :, n - 1]
        qy_tr = np.empty((self.n_cells, nq, n - 1))
        for d in range(n - 1):
            qy_tr[:, :, d] = t_centers[it[d]][:, None] + 0.5 * self.h_t * pts[None, :, d]
        M, r = self._geometry_matrix(qy_ax, qy_tr)
        self.G = np.einsum("cqij,qkj->cqki", M, dN)
        w0 = (0.5 * self.h_t) ** (n - 1) * (0.5 * self.h_a)
        self.wJ = w0 * r ** (n - 1)
        self.qp_axial = qy_ax
        self.qp_transverse = qy_tr
        self.basis_values = vals  # (nq, nn) for field evaluation at volume qp

        # Midplane rule: 2-point Gauss transversally, axial coordinate at the
        # cell center so the axial gradient is single-valued.
        signs_m = _corner_signs(n - 1) if n > 1 else np.zeros((1, 0))
        nqm = 2 ** (n - 1)
        pts_m = np.zeros((nqm, n))
        pts_m[:, : n - 1] = signs_m * _GAUSS
        vals_m, grads_m = _basis_tables(signs, pts_m)
        dNm = grads_m * scale[None, None, :]
        my_ax = np.broadcast_to(self.y_a_centers[ia][:, None], (self.n_cells, nqm)).copy()
        my_tr = np.empty((self.n_cells, nqm, n - 1))
        for d in range(n - 1):
            my_tr[:, :, d] = t_centers[it[d]][:, None] + 0.5 * self.h_t * pts_m[None, :, d]
        Mm, rm = self._geometry_matrix(my_ax, my_tr)
        self.Gm = np.einsum("cqij,qkj->cqki", Mm, dNm)
        self.wm = (0.5 * self.h_t) ** (n - 1) * rm ** (n - 1)
        self._nn = nn
        self._nq = nq

    # -- sparsity ----------------------------------------------------------

    def _build_sparsity(self):
        n = self.n
        N = self.n_nodes
        idx, ia = self.node_multi_index()
        dims = [self.N_t + 1] * (n - 1) + [self.N_a + 1]
        coords = idx + [ia]
        shifts = np.array(
            np.meshgrid(*([[-1, 0, 1]] * n), indexing="ij")
        ).reshape(n, -1).T  # (3^n, n)
        rows_all = []
        cols_all = []
        strides = self._node_strides + [self._axial_stride]
        for sh in shifts:
            valid = np.ones(N, dtype=bool)
            col = np.zeros(N, dtype=np.int64)
            for d in range(n):
                nb = coords[d] + sh[d]
                valid &= (nb >= 0) & (nb < dims[d])
                col += np.where(valid, nb, 0) * strides[d]
            rows_all.append(np.arange(N)[valid])
            cols_all.append(col[valid])
        rows = np.concatenate(rows_all)
        cols = np.concatenate(cols_all)
        order = np.lexsort((cols, rows))
        rows, cols = rows[order], cols[order]
        self.indptr = np.zeros(N + 1, dtype=np.int64)
        np.add.at(self.indptr, rows + 1, 1)
        np.cumsum(self.indptr, out=self.indptr)
        self.indices = cols
        self.nnz = cols.size
        keys = rows * N + cols
        self.diag_slots = np.searchsorted(keys, np.arange(N) * N + np.arange(N))
        qk = (self.conn[:, :, None] * N + self.conn[:, None, :]).ravel()
        self.emap = np.searchsorted(keys, qk).reshape(self.conn.shape[0], self._nn, self._nn)
        self._csr_rows = rows

    # -- boundary data -----------------------------------------------------

    def _build_boundary(self):
        n = self.n
        idx, ia = self.node_multi_index()
        self.dirichlet = ia == 0  # inlet plane y_n = -L
        outlet = ia == self.N_a
        w1d = np.full(self.N_t + 1, self.h_t)
        w1d[0] = w1d[-1] = 0.5 * self.h_t
        load = np.where(outlet, 1.0, 0.0)
        for d in range(n - 1):
            load = load * w1d[idx[d]]
        # Normalized so that sum(load) = 1: the outlet datum enters the
        # energy as m0 * mean of the potential over the reference face.
        self.outlet_load = load / 2 ** (n - 1)
        self.bc_zero_slots = np.flatnonzero(
            self.dirichlet[self._csr_rows] | self.dirichlet[self.indices]
        )
        self.bc_diag_slots = self.diag_slots[self.dirichlet]

    # -- helpers -----------------------------------------------------------

    def layer_of_station(self, station: float) -> int:
        """Axial cell layer whose midplane is nearest to the given station."""
        if not (-self.L < station < self.L):
            raise StationError(
                f"station {station} outside the open interval (-{self.L}, {self.L})"
            )
        return int(np.argmin(np.abs(self.y_a_centers - station)))

    def layer_cells(self, layer: int) -> slice:
        lo = layer * self.cells_per_layer
        return slice(lo, lo + self.cells_per_layer)

    def zero_field(self) -> np.ndarray:
        return np.zeros(self.n_nodes)

    def ramp_field(self, slope: float) -> np.ndarray:
        """Nodal interpolant of slope * (y_n + L); satisfies the inlet pin."""
        _, ia = self.node_multi_index()
        return slope * (self.y_a[ia] + self.L)

    def apply_dirichlet(self, phi: np.ndarray) -> np.ndarray:
        phi = np.array(phi, dtype=float, copy=True)
        phi[self.dirichlet] = 0.0
        return phi

    def contains_nodes(self) -> bool:
        """Every node maps into the closed physical nozzle."""
        y = self.node_coords_ref()
        x = self.nozzle_map.map_inverse(y)
        r = np.asarray(self.profile.half_width(x[:, -1]), dtype=float)
        c = self.profile.offset(x[:, -1])
        return bool(np.all(np.abs(x[:, :-1] - c) <= r[:, None] * (1.0 + 1e-12)))


def build_mesh(profile: Profile, L: float, N_t: int, N_a: int) -> Mesh:
    """Tensor mesh of (-1,1)^(n-1) x (-L, L) pulled back through the nozzle."""
    return Mesh(profile, L, N_t, N_a)
