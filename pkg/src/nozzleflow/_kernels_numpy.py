"""Reference assembly kernels: pure vectorized numpy.

Signature-identical to the jitted set in ``_kernels_numba``; accumulation
uses ``np.add.at`` which applies updates in index order, so results are
deterministic for a fixed build.
"""

from __future__ import annotations

import numpy as np

from .gas import (
    energy_density_array,
    truncated_density_array,
    truncated_density_prime_array,
)

NAME = "numpy"


def _gradients(conn, phi, G):
    pe = phi[conn]  # (ncells, nn)
    grads = np.einsum("cqkd,ck->cqd", G, pe)
    t = np.einsum("cqd,cqd->cq", grads, grads)
    return grads, t


def energy(conn, phi, G, wJ, P) -> float:
    _, t = _gradients(conn, phi, G)
    return float(np.sum(wJ * energy_density_array(t, P)))


def residual_volume(conn, phi, G, wJ, P, out) -> None:
    grads, t = _gradients(conn, phi, G)
    th = truncated_density_array(t, P)
    re = np.einsum("cq,cqkd,cqd->ck", wJ * th, G, grads)
    np.add.at(out, conn, re)


def jacobian_csr(conn, phi, G, wJ, P, emap, vals) -> None:
    grads, t = _gradients(conn, phi, G)
    th = truncated_density_array(t, P)
    thp = truncated_density_prime_array(t, P)
    Gg = np.einsum("cqkd,cqd->cqk", G, grads)
    Ke = np.einsum("cq,cqkd,cqld->ckl", wJ * th, G, G)
    Ke += 2.0 * np.einsum("cq,cqk,cql->ckl", wJ * thp, Gg, Gg)
    np.add.at(vals, emap, Ke)


def csr_matvec(indptr, indices, vals, x, out) -> None:
    # Rows of the multilinear stencil are never empty, so reduceat is safe.
    out[:] = np.add.reduceat(vals * x[indices], indptr[:-1])
