"""Jitted assembly kernels: per-element loops under numba.

Scalar replicas of the closed forms in ``gas``; parity with the reference
kernels is pinned by tests.  Serial element loops keep the accumulation
order deterministic, and ``nogil`` lets independent solves overlap in
threads.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .gas import (
    A_,
    B_,
    C6,
    E1,
    E2,
    EG,
    FA,
    FB,
    G0,
    G1,
    GAMMA,
    JQA,
    KEXP,
    MEXP,
    QA,
    RHOB,
    TA,
    TB,
    W,
)

NAME = "numba"

_OPTS = dict(cache=True, nogil=True)


@njit(**_OPTS)
def _blend_slope(u, P):
    return P[G0] * (1.0 - u) ** P[KEXP] + P[G1] * u ** P[MEXP] + P[C6] * u * (1.0 - u)


@njit(**_OPTS)
def _blend_integral(u, P):
    k = P[KEXP]
    m = P[MEXP]
    return (
        P[G0] * (1.0 - (1.0 - u) ** (k + 1.0)) / (k + 1.0)
        + P[G1] * u ** (m + 1.0) / (m + 1.0)
        + P[C6] * (0.5 * u * u - u * u * u / 3.0)
    )


@njit(**_OPTS)
def _blend_integral2(u, P):
    k = P[KEXP]
    m = P[MEXP]
    return (
        P[G0] * (u - (1.0 - (1.0 - u) ** (k + 2.0)) / (k + 2.0)) / (k + 1.0)
        + P[G1] * u ** (m + 2.0) / ((m + 1.0) * (m + 2.0))
        + P[C6] * (u**3 / 6.0 - u**4 / 12.0)
    )


@njit(**_OPTS)
def theta_scalar(t, P):
    if t <= P[TA]:
        return (P[A_] - P[B_] * t) ** P[E1]
    if t >= P[TB]:
        return P[RHOB]
    q = np.sqrt(t)
    u = (q - P[QA]) / P[W]
    return (P[JQA] + P[W] * _blend_integral(u, P)) / q


@njit(**_OPTS)
def theta_prime_scalar(t, P):
    if t <= P[TA]:
        return -0.5 * (P[A_] - P[B_] * t) ** P[E2]
    if t >= P[TB]:
        return 0.0
    q = np.sqrt(t)
    u = (q - P[QA]) / P[W]
    j = P[JQA] + P[W] * _blend_integral(u, P)
    return (q * _blend_slope(u, P) - j) / (2.0 * q * q * q)


@njit(**_OPTS)
def energy_density_scalar(t, P):
    if t <= P[TA]:
        return (P[A_] ** P[EG] - (P[A_] - P[B_] * t) ** P[EG]) / P[GAMMA]
    if t >= P[TB]:
        return P[FB] + 0.5 * P[RHOB] * (t - P[TB])
    q = np.sqrt(t)
    u = (q - P[QA]) / P[W]
    return P[FA] + P[JQA] * (q - P[QA]) + P[W] * P[W] * _blend_integral2(u, P)


@njit(**_OPTS)
def energy(conn, phi, G, wJ, P):
    ncells, nq, nn, nd = G.shape
    total = 0.0
    grad = np.empty(nd)
    for c in range(ncells):
        for q in range(nq):
            for d in range(nd):
                grad[d] = 0.0
            for k in range(nn):
                pk = phi[conn[c, k]]
                for d in range(nd):
                    grad[d] += G[c, q, k, d] * pk
            t = 0.0
            for d in range(nd):
                t += grad[d] * grad[d]
            total += wJ[c, q] * energy_density_scalar(t, P)
    return total


@njit(**_OPTS)
def residual_volume(conn, phi, G, wJ, P, out):
    ncells, nq, nn, nd = G.shape
    grad = np.empty(nd)
    for c in range(ncells):
        for q in range(nq):
            for d in range(nd):
                grad[d] = 0.0
            for k in range(nn):
                pk = phi[conn[c, k]]
                for d in range(nd):
                    grad[d] += G[c, q, k, d] * pk
            t = 0.0
            for d in range(nd):
                t += grad[d] * grad[d]
            coef = wJ[c, q] * theta_scalar(t, P)
            for k in range(nn):
                acc = 0.0
                for d in range(nd):
                    acc += G[c, q, k, d] * grad[d]
                out[conn[c, k]] += coef * acc


@njit(**_OPTS)
def jacobian_csr(conn, phi, G, wJ, P, emap, vals):
    ncells, nq, nn, nd = G.shape
    grad = np.empty(nd)
    gg = np.empty(nn)
    for c in range(ncells):
        for q in range(nq):
            for d in range(nd):
                grad[d] = 0.0
            for k in range(nn):
                pk = phi[conn[c, k]]
                for d in range(nd):
                    grad[d] += G[c, q, k, d] * pk
            t = 0.0
            for d in range(nd):
                t += grad[d] * grad[d]
            w_th = wJ[c, q] * theta_scalar(t, P)
            w_thp = 2.0 * wJ[c, q] * theta_prime_scalar(t, P)
            for k in range(nn):
                acc = 0.0
                for d in range(nd):
                    acc += G[c, q, k, d] * grad[d]
                gg[k] = acc
            for k in range(nn):
                for l in range(nn):
                    dot = 0.0
                    for d in range(nd):
                        dot += G[c, q, k, d] * G[c, q, l, d]
                    vals[emap[c, k, l]] += w_th * dot + w_thp * gg[k] * gg[l]


@njit(**_OPTS)
def csr_matvec(indptr, indices, vals, x, out):
    n = indptr.shape[0] - 1
    for i in range(n):
        acc = 0.0
        for s in range(indptr[i], indptr[i + 1]):
            acc += vals[s] * x[indices[s]]
        out[i] = acc
