"""Batch front end: ``nozzleflow <config> [--output-dir DIR] [--override k=v ...]``.

Exit codes: 0 success (certified where applicable), 2 converged but not
certified, 1 solver failure or invalid configuration.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import analysis
from .assembly import flux_profile, gradients_at_quadrature
from .config import ConfigError, RunConfig, load_config
from .gas import DensityRelation, GasLaw, TruncatedDensity
from .mesh import build_mesh
from .outputs import save_snapshot, write_csv, write_vtk
from .solver import FlowProblem, NoConvergenceError, continue_in_L, solve_flow

__all__ = ["main"]

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_UNCERTIFIED = 2


def _setup(cfg: RunConfig):
    profile = cfg.profile()
    relation = DensityRelation(GasLaw(cfg.gamma))
    trunc = TruncatedDensity(relation, cfg.delta0)
    mesh = build_mesh(profile, cfg.L, cfg.N_t, cfg.N_a)
    return profile, relation, trunc, mesh


def _write_solution(cfg: RunConfig, mesh, trunc, phi, report):
    out = cfg.output_dir
    save_snapshot(os.path.join(out, "solution_snapshot.txt"), mesh, phi,
                  cfg.config_hash())
    write_vtk(os.path.join(out, "solution.vtk"), mesh, trunc, phi)
    fluxes = flux_profile(mesh, trunc, phi)
    m0 = cfg.m0 or 0.0
    write_csv(
        os.path.join(out, "flux_by_station.csv"),
        ["station", "flux", "abs_error", "rel_error"],
        [
            (s, f, abs(f - m0), abs(f - m0) / m0 if m0 > 0 else abs(f))
            for s, f in zip(mesh.y_a_centers, fluxes)
        ],
    )
    write_csv(
        os.path.join(out, "convergence.csv"),
        ["iteration", "residual", "energy"],
        [
            (i, r, e)
            for i, (r, e) in enumerate(zip(report.residual_history, report.energy_history))
        ],
    )


def _certification_exit(report) -> int:
    return EXIT_OK if report.truncation_certified else EXIT_UNCERTIFIED


def _mode_solve(cfg: RunConfig) -> int:
    if cfg.L_schedule:
        # Continuation in the truncation length: mesh.N_a fixes the axial
        # spacing on the first length; the final field is the solution.
        profile = cfg.profile()
        relation = DensityRelation(GasLaw(cfg.gamma))
        trunc = TruncatedDensity(relation, cfg.delta0)
        result = continue_in_L(
            profile, trunc, cfg.m0, cfg.L_schedule, cfg.N_t, cfg.N_a,
            config=cfg.solver,
        )
        mesh, phi, report = result.meshes[-1], result.fields[-1], result.reports[-1]
        write_csv(
            os.path.join(cfg.output_dir, "l_stability.csv"),
            ["L_from", "L_to", "interior_gradient_change"],
            [
                (a, b, change)
                for a, b, change in zip(
                    result.lengths, result.lengths[1:], result.interior_changes
                )
            ],
        )
        worst = max(result.interior_changes, default=0.0)
        print(
            f"solve: continuation over L = {result.lengths}, interior gradient "
            f"change <= {worst:.3e}"
        )
    else:
        _, relation, trunc, mesh = _setup(cfg)
        phi, report = solve_flow(mesh, trunc, cfg.m0, config=cfg.solver)
    _write_solution(cfg, mesh, trunc, phi, report)
    print(
        f"solve: converged in {report.iterations} iterations, "
        f"Q = {report.q_max:.12g}, certified = {report.truncation_certified}, "
        f"max station flux error = {report.flux_abs_error:.3e}"
    )
    return _certification_exit(report)


def _mode_validate_cylinder(cfg: RunConfig) -> int:
    if cfg.nozzle_kind != "cylinder":
        print("validate-cylinder requires nozzle.kind = cylinder", file=sys.stderr)
        return EXIT_FAILURE
    profile, relation, trunc, mesh = _setup(cfg)
    measure = profile.section_measure_plus
    m0 = cfg.m0 if cfg.m0 is not None else relation.momentum(0.5) * measure
    cfg.m0 = m0
    phi, report = solve_flow(mesh, trunc, m0, config=cfg.solver)
    q_star = relation.solve_q_from_flux(m0 / measure)
    grads = gradients_at_quadrature(mesh, phi)
    exact = np.zeros(mesh.n)
    exact[-1] = q_star
    err = float(np.linalg.norm(grads - exact, axis=-1).max())
    _write_solution(cfg, mesh, trunc, phi, report)
    write_csv(
        os.path.join(cfg.output_dir, "validation.csv"),
        ["m0", "q_star", "max_gradient_error", "max_flux_error"],
        [(m0, q_star, err, report.flux_abs_error)],
    )
    ok = err < 1e-8 and report.truncation_certified
    print(f"validate-cylinder: max gradient error = {err:.3e} "
          f"({'pass' if ok else 'FAIL'})")
    return EXIT_OK if ok else EXIT_FAILURE


def _mode_far_field(cfg: RunConfig) -> int:
    _, relation, trunc, mesh = _setup(cfg)
    phi, report = solve_flow(mesh, trunc, cfg.m0, config=cfg.solver)
    ff = analysis.far_field_check(mesh, relation, phi, cfg.m0, offsets=cfg.probe_offsets)
    _write_solution(cfg, mesh, trunc, phi, report)
    write_csv(
        os.path.join(cfg.output_dir, "far_field.csv"),
        ["side", "station", "q_bar", "q_limit", "deviation", "rel_deviation",
         "transverse_sup"],
        [
            (p.side, p.station, p.q_bar, p.q_limit, p.deviation, p.rel_deviation,
             p.transverse_sup)
            for p in ff.probes
        ],
    )
    print(
        f"far-field: q- = {ff.q_minus:.12g}, q+ = {ff.q_plus:.12g}, "
        f"worst relative deviation = {ff.worst_rel_deviation():.3e}"
    )
    return _certification_exit(report)


def _mode_uniqueness(cfg: RunConfig) -> int:
    _, relation, trunc, mesh = _setup(cfg)
    result = analysis.uniqueness_check(mesh, trunc, cfg.m0, config=cfg.solver)
    write_csv(
        os.path.join(cfg.output_dir, "uniqueness.csv"),
        ["m0", "grad_sup_diff", "certified_zero_init", "certified_ramp_init"],
        [(cfg.m0, result.grad_sup_diff,
          result.report_zero.truncation_certified,
          result.report_ramp.truncation_certified)],
    )
    print(f"uniqueness: sup gradient discrepancy = {result.grad_sup_diff:.3e}")
    both = (result.report_zero.truncation_certified
            and result.report_ramp.truncation_certified)
    return EXIT_OK if both else EXIT_UNCERTIFIED


def _mode_sweep(cfg: RunConfig) -> int:
    profile, relation, trunc, mesh = _setup(cfg)
    sweep = analysis.flux_sweep(mesh, trunc, cfg.m0_values, config=cfg.solver,
                                parallel=True)
    measure = profile.section_measure_plus
    rows = []
    for p in sweep.points:
        try:
            q_oracle = relation.solve_q_from_flux(p.m0 / measure)
        except Exception:
            q_oracle = float("nan")
        rows.append((p.m0, p.q_max, q_oracle, p.certified, p.converged,
                     p.flux_rel_error))
    write_csv(
        os.path.join(cfg.output_dir, "q_vs_m0.csv"),
        ["m0", "q_max", "q_outlet_oracle", "certified", "converged", "flux_rel_error"],
        rows,
    )
    n_ok = sum(p.converged for p in sweep.points)
    n_cert = sum(p.certified for p in sweep.points)
    print(f"sweep: {n_ok}/{len(sweep.points)} converged, {n_cert} certified")
    if n_ok < len(sweep.points):
        return EXIT_FAILURE
    return EXIT_OK if n_cert == len(sweep.points) else EXIT_UNCERTIFIED


def _mode_critical_flux(cfg: RunConfig) -> int:
    problem = FlowProblem(cfg.profile(), cfg.L, cfg.N_t, cfg.N_a,
                          gamma=cfg.gamma, delta0=cfg.delta0)
    result = analysis.critical_flux_search(
        problem, delta0_schedule=cfg.delta0_schedule,
        bisections=cfg.bisections, config=cfg.solver,
    )
    write_csv(
        os.path.join(cfg.output_dir, "critical_flux.csv"),
        ["delta0", "m_lo", "m_hi", "q_at_m_lo", "bisections"],
        [(b.delta0, b.m_lo, b.m_hi, b.q_lo, b.iterations) for b in result.brackets],
    )
    write_csv(
        os.path.join(cfg.output_dir, "critical_flux_probes.csv"),
        ["delta0", "m0", "converged", "certified", "q_max"],
        [
            (b.delta0, p.m0, p.converged, p.certified, p.q_max)
            for b in result.brackets
            for p in b.points
        ],
    )
    print(
        f"critical-flux: estimate = {result.estimate:.12g} "
        f"(+{result.uncertainty:.3e}), nested = {result.nested}"
    )
    return EXIT_OK if result.estimate > 0.0 else EXIT_FAILURE


_DISPATCH = {
    "solve": _mode_solve,
    "validate-cylinder": _mode_validate_cylinder,
    "far-field": _mode_far_field,
    "uniqueness": _mode_uniqueness,
    "sweep": _mode_sweep,
    "critical-flux": _mode_critical_flux,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nozzleflow",
        description="Uniformly subsonic nozzle flow: solve, sweep, and certify.",
    )
    parser.add_argument("config", help="path to a key = value configuration file")
    parser.add_argument("--output-dir", help="override output.dir")
    parser.add_argument(
        "--override", action="append", default=[], metavar="KEY=VALUE",
        help="override a config entry (repeatable)",
    )
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, overrides=args.override)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    if args.output_dir:
        cfg.output_dir = args.output_dir
    os.makedirs(cfg.output_dir, exist_ok=True)
    try:
        return _DISPATCH[cfg.mode](cfg)
    except NoConvergenceError as exc:
        print(f"error: solver failed: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
