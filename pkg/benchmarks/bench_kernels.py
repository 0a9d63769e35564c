#!/usr/bin/env python3
"""Benchmark the jitted kernels against the pure-numpy reference path.

Times energy/residual/Jacobian assembly, the CSR mat-vec, and a full Newton
solve on a representative nozzle, for both backends.  The same switch is
available at runtime via NOZZLEFLOW_DISABLE_NUMBA=1.

Usage: python benchmarks/bench_kernels.py [--nt 32] [--na 256] [--repeat 5]
"""

import argparse
import time

import numpy as np

from nozzleflow import (
    DensityRelation,
    GasLaw,
    TanhExpansion,
    TruncatedDensity,
    backend,
    build_mesh,
    solve_flow,
)
from nozzleflow.assembly import (
    assemble_energy,
    assemble_residual,
    assemble_residual_jacobian,
)


def _best_of(repeat, fn):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run(nt: int, na: int, repeat: int):
    profile = TanhExpansion(r_in=0.5, r_out=1.0, length=1.0, dim=2)
    relation = DensityRelation(GasLaw(1.4))
    trunc = TruncatedDensity(relation, 0.05)
    mesh = build_mesh(profile, 8.0, nt, na)
    rng = np.random.default_rng(0)
    phi = mesh.apply_dirichlet(0.5 * rng.standard_normal(mesh.n_nodes))
    m0 = 0.3

    print(f"mesh: {nt} x {na} cells, {mesh.n_nodes} nodes, {mesh.nnz} matrix entries")
    header = f"{'kernel':<22}" + "".join(f"{name:>14}" for name in ("numpy", "numba"))
    rows: dict[str, dict[str, float]] = {}
    for name in ("numpy", "numba"):
        try:
            backend.select(name)
        except ValueError:
            continue
        # warm once so jit compilation is not timed
        assemble_energy(mesh, trunc, phi, m0)
        assemble_residual(mesh, trunc, phi, m0)
        _, system = assemble_residual_jacobian(mesh, trunc, phi, m0)
        system.matvec(phi)

        rows.setdefault("energy", {})[name] = _best_of(
            repeat, lambda: assemble_energy(mesh, trunc, phi, m0)
        )
        rows.setdefault("residual", {})[name] = _best_of(
            repeat, lambda: assemble_residual(mesh, trunc, phi, m0)
        )
        rows.setdefault("jacobian", {})[name] = _best_of(
            repeat, lambda: assemble_residual_jacobian(mesh, trunc, phi, m0)
        )
        rows.setdefault("csr matvec", {})[name] = _best_of(
            repeat, lambda: system.matvec(phi)
        )
        rows.setdefault("newton solve", {})[name] = _best_of(
            max(1, repeat // 2), lambda: solve_flow(mesh, trunc, m0)
        )

    print(header)
    for kernel, times in rows.items():
        cells = [f"{times.get(n, float('nan')) * 1e3:>11.2f} ms" for n in ("numpy", "numba")]
        line = f"{kernel:<22}" + "".join(cells)
        if "numpy" in times and "numba" in times and times["numba"] > 0:
            line += f"   x{times['numpy'] / times['numba']:.1f}"
        print(line)
    backend._active = None


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--nt", type=int, default=32, help="transverse cells")
    parser.add_argument("--na", type=int, default=256, help="axial cells")
    parser.add_argument("--repeat", type=int, default=5, help="timing repeats")
    args = parser.parse_args()
    run(args.nt, args.na, args.repeat)
