"""Linear solvers for the SPD Newton systems.

Jacobi-preconditioned conjugate gradients with Ritz-value tracking is the
workhorse; tiny systems go through a dense factorization, and a sparse LU
(scipy) backs CG up if it ever stalls.  The Ritz estimates come from the
Lanczos tridiagonal reconstructed from the CG coefficients and double as a
positive-definiteness certificate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import SparseSystem

__all__ = ["CGResult", "jacobi_pcg", "dense_solve", "lu_solve", "solve_linear", "LinearSolveError"]


class LinearSolveError(RuntimeError):
    pass


@dataclass
class CGResult:
    x: np.ndarray
    converged: bool
    iterations: int
    residual_norm: float
    ritz_min: float | None = None
    ritz_max: float | None = None


def _ritz_from_cg(alphas, betas):
    """Extremal eigenvalue estimates of the preconditioned operator."""
    k = len(alphas)
    if k == 0:
        return None, None
    diag = np.empty(k)
    off = np.empty(max(k - 1, 0))
    diag[0] = 1.0 / alphas[0]
    for j in range(1, k):
        diag[j] = 1.0 / alphas[j] + betas[j - 1] / alphas[j - 1]
        off[j - 1] = np.sqrt(max(betas[j - 1], 0.0)) / alphas[j - 1]
    if k == 1:
        return float(diag[0]), float(diag[0])
    from scipy.linalg import eigvalsh_tridiagonal

    ev = eigvalsh_tridiagonal(diag, off)
    return float(ev[0]), float(ev[-1])


def jacobi_pcg(
    system: SparseSystem,
    b: np.ndarray | None = None,
    rtol: float = 1e-12,
    atol: float = 0.0,
    maxiter: int | None = None,
    x0: np.ndarray | None = None,
) -> CGResult:
    """Conjugate gradients with diagonal preconditioning on a CSR system."""
    if b is None:
        b = system.rhs
    n = system.n
    if maxiter is None:
        maxiter = max(500, 4 * n)
    diag = system.diagonal()
    if np.any(diag <= 0.0):
        raise LinearSolveError("nonpositive diagonal entry; system is not SPD")
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float, copy=True)
    r = b - system.matvec(x) if x0 is not None else b.copy()
    bnorm = float(np.linalg.norm(b))
    stop = max(atol, rtol * bnorm)
    rnorm = float(np.linalg.norm(r))
    if rnorm <= stop:
        return CGResult(x, True, 0, rnorm)
    z = r / diag
    p = z.copy()
    rz = float(r @ z)
    alphas: list[float] = []
    betas: list[float] = []
    it = 0
    for it in range(1, maxiter + 1):
        q = system.matvec(p)
        pq = float(p @ q)
        if pq <= 0.0:
            raise LinearSolveError("nonpositive curvature encountered in CG")
        alpha = rz / pq
        x += alpha * p
        r -= alpha * q
        alphas.append(alpha)
        rnorm = float(np.linalg.norm(r))
        if rnorm <= stop:
            break
        z = r / diag
        rz_new = float(r @ z)
        beta = rz_new / rz
        betas.append(beta)
        rz = rz_new
        p = z + beta * p
    ritz_min, ritz_max = _ritz_from_cg(alphas, betas)
    return CGResult(x, rnorm <= stop, it, rnorm, ritz_min, ritz_max)


def dense_solve(system: SparseSystem, b: np.ndarray | None = None) -> np.ndarray:
    if b is None:
        b = system.rhs
    return np.linalg.solve(system.to_scipy().toarray(), b)


def lu_solve(system: SparseSystem, b: np.ndarray | None = None) -> np.ndarray:
    if b is None:
        b = system.rhs
    from scipy.sparse.linalg import splu

    return splu(system.to_scipy().tocsc()).solve(b)


def solve_linear(
    system: SparseSystem,
    b: np.ndarray | None = None,
    method: str = "auto",
    dense_limit: int = 2000,
    cg_rtol: float = 1e-12,
    cg_maxiter: int | None = None,
):
    """Solve an SPD system by the configured method.

    Returns (x, stats).  'auto' uses a dense factorization below the size
    limit and Jacobi-PCG otherwise; a CG stall falls back to sparse LU.
    """
    if b is None:
        b = system.rhs
    if method not in ("auto", "cg", "dense", "lu"):
        raise ValueError(f"unknown linear solver {method!r}")
    if method == "dense" or (method == "auto" and system.n <= dense_limit):
        return dense_solve(system, b), {"method": "dense", "iterations": 0}
    if method == "lu":
        return lu_solve(system, b), {"method": "lu", "iterations": 0}
    res = jacobi_pcg(system, b, rtol=cg_rtol, maxiter=cg_maxiter)
    stats = {
        "method": "cg",
        "iterations": res.iterations,
        "residual": res.residual_norm,
        "ritz_min": res.ritz_min,
        "ritz_max": res.ritz_max,
    }
    if not res.converged:
        x = lu_solve(system, b)
        stats["method"] = "cg+lu-fallback"
        return x, stats
    return res.x, stats
