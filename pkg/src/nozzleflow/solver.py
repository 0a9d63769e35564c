"""Damped Newton minimization of the truncated energy and L-continuation.

The linearized operator is SPD for any field (uniform ellipticity of the
surrogate), so the Newton direction is a descent direction for the energy
and Armijo backtracking gives global convergence.  A converged field is
*certified* when its largest quadrature-point speed stays below the exact
range of the surrogate, in which case it solves the untruncated problem on
the discrete level (the coefficients agree identically at every quadrature
point).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .assembly import (
    assemble_energy,
    assemble_jacobian,
    assemble_residual,
    flux_profile,
    speed_sq_at_quadrature,
)
from .gas import DensityRelation, GasLaw, TruncatedDensity, truncated_density_array
from .linalg import solve_linear
from .mesh import Mesh, build_mesh
from .nozzle import Profile

__all__ = [
    "NewtonConfig",
    "SolverReport",
    "Certification",
    "NoConvergenceError",
    "newton_solve",
    "solve_flow",
    "certify_subsonic",
    "continue_in_L",
    "ContinuationResult",
    "FlowProblem",
]


@dataclass(frozen=True)
class NewtonConfig:
    rtol: float = 1e-10          # residual tolerance relative to the initial one
    atol: float = 1e-12          # absolute residual floor
    max_iter: int = 50
    armijo_slope: float = 1e-4
    backtrack: float = 0.5
    min_step: float = 1e-8
    linear_solver: str = "auto"  # auto | cg | dense | lu
    dense_limit: int = 2000
    cg_rtol: float = 1e-12
    cg_maxiter: int | None = None
    ramp_steps: int = 4          # flux continuation stages used on failure

    def __post_init__(self):
        if min(self.rtol, self.atol, self.cg_rtol, self.min_step) <= 0.0:
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not 0.0 < self.backtrack < 1.0 or not 0.0 < self.armijo_slope < 0.5:
            raise ValueError("line search parameters out of range")


@dataclass
class Certification:
    certified: bool
    q_max: float
    q2_max: float
    threshold: float
    margin: float
    coefficient_defect: float

    @property
    def coefficients_match(self) -> bool:
        return self.certified and self.coefficient_defect == 0.0


@dataclass
class SolverReport:
    converged: bool
    iterations: int
    residual_history: list[float]
    energy_history: list[float]
    energy: float
    q_max: float
    certification: Certification | None
    flux_abs_error: float
    flux_rel_error: float
    wall_time: float
    convergence_order: float | None
    linear_stats: dict = field(default_factory=dict)
    message: str = ""

    @property
    def truncation_certified(self) -> bool:
        return bool(self.certification and self.certification.certified)


class NoConvergenceError(RuntimeError):
    """Newton failed; carries the partial report for diagnostics."""

    def __init__(self, message: str, report: SolverReport | None = None):
        super().__init__(message)
        self.report = report


def certify_subsonic(mesh: Mesh, trunc: TruncatedDensity, phi: np.ndarray) -> Certification:
    """Check that the surrogate was inactive on the converged field.

    Certified iff the maximal quadrature-point squared speed stays at or
    below 1 - 2*delta0; in that case the surrogate and the physical density
    coincide identically at every quadrature point and the field solves the
    untruncated discrete problem.
    """
    t = speed_sq_at_quadrature(mesh, phi)
    q2_max = float(t.max()) if t.size else 0.0
    threshold = trunc.certified_q2
    certified = q2_max <= threshold
    defect = np.inf
    if certified:
        theta_vals = truncated_density_array(t, trunc.kernel_params())
        rho_vals = trunc.base.density(t)
        defect = float(np.abs(theta_vals - rho_vals).max()) if t.size else 0.0
    return Certification(
        certified=certified,
        q_max=float(np.sqrt(q2_max)),
        q2_max=q2_max,
        threshold=threshold,
        margin=threshold - q2_max,
        coefficient_defect=defect,
    )


def _convergence_order(history: list[float]) -> float | None:
    """Order estimate from the last residual triple above the float floor."""
    usable = [r for r in history if r > 1e-14]
    if len(usable) < 3:
        return None
    r0, r1, r2 = usable[-3:]
    if not (r0 > r1 > r2 > 0.0):
        return None
    denom = np.log(r1 / r0)
    if denom == 0.0:
        return None
    return float(np.log(r2 / r1) / denom)


def _flux_errors(mesh, trunc, phi, m0):
    fluxes = flux_profile(mesh, trunc, phi)
    abs_err = float(np.abs(fluxes - m0).max())
    rel_err = abs_err / m0 if m0 > 0.0 else abs_err
    return abs_err, rel_err


def newton_solve(
    mesh: Mesh,
    trunc: TruncatedDensity,
    m0: float,
    init: np.ndarray | None = None,
    config: NewtonConfig | None = None,
):
    """Minimize the truncated energy at fixed mass flux.

    Returns (phi, report); raises NoConvergenceError after the iteration
    budget or a failed line search.  Every accepted step strictly decreases
    the energy (enforced), which is what guarantees global convergence.
    """
    cfg = config or NewtonConfig()
    t0 = time.perf_counter()
    phi = mesh.zero_field() if init is None else mesh.apply_dirichlet(init)
    res = assemble_residual(mesh, trunc, phi, m0)
    rnorm = float(np.linalg.norm(res))
    tol = max(cfg.atol, cfg.rtol * rnorm)
    energy = assemble_energy(mesh, trunc, phi, m0)
    history = [rnorm]
    energies = [energy]
    lin_stats: dict = {}
    it = 0
    while rnorm > tol:
        if it >= cfg.max_iter:
            report = _final_report(
                mesh, trunc, phi, m0, False, it, history, energies, t0, lin_stats,
                message=f"no convergence in {cfg.max_iter} iterations",
            )
            raise NoConvergenceError(report.message, report)
        system = assemble_jacobian(mesh, trunc, phi, rhs=-res)
        step, lin_stats = solve_linear(
            system,
            method=cfg.linear_solver,
            dense_limit=cfg.dense_limit,
            cg_rtol=cfg.cg_rtol,
            cg_maxiter=cfg.cg_maxiter,
        )
        slope = float(res @ step)
        if slope >= 0.0:
            report = _final_report(
                mesh, trunc, phi, m0, False, it, history, energies, t0, lin_stats,
                message="Newton direction is not a descent direction",
            )
            raise NoConvergenceError(report.message, report)
        # The Armijo decrease demanded near the minimum can drop below what a
        # floating-point energy evaluation resolves; past that floor the step
        # is judged by residual decrease, which stays meaningful to eps.
        noise_floor = 64.0 * np.finfo(float).eps * (1.0 + abs(energy))
        alpha = 1.0
        trial_res = None
        by_energy = True
        while True:
            trial = phi + alpha * step
            trial_energy = assemble_energy(mesh, trunc, trial, m0)
            if trial_energy <= energy + cfg.armijo_slope * alpha * slope:
                by_energy = True
                break
            if -cfg.armijo_slope * alpha * slope <= noise_floor:
                trial_res = assemble_residual(mesh, trunc, trial, m0)
                if float(np.linalg.norm(trial_res)) < rnorm:
                    by_energy = False
                    break
                trial_res = None
            alpha *= cfg.backtrack
            if alpha < cfg.min_step:
                report = _final_report(
                    mesh, trunc, phi, m0, False, it, history, energies, t0, lin_stats,
                    message="line search failed below the minimal step",
                )
                raise NoConvergenceError(report.message, report)
        if by_energy and not trial_energy < energy:
            report = _final_report(
                mesh, trunc, phi, m0, False, it, history, energies, t0, lin_stats,
                message="energy failed to decrease on an accepted step",
            )
            raise NoConvergenceError(report.message, report)
        phi = trial
        energy = trial_energy
        res = trial_res if trial_res is not None else assemble_residual(mesh, trunc, phi, m0)
        rnorm = float(np.linalg.norm(res))
        history.append(rnorm)
        energies.append(energy)
        it += 1
    report = _final_report(
        mesh, trunc, phi, m0, True, it, history, energies, t0, lin_stats
    )
    return phi, report


def _final_report(mesh, trunc, phi, m0, converged, iterations, history, energies,
                  t0, lin_stats, message="") -> SolverReport:
    cert = certify_subsonic(mesh, trunc, phi)
    abs_err, rel_err = _flux_errors(mesh, trunc, phi, m0)
    return SolverReport(
        converged=converged,
        iterations=iterations,
        residual_history=list(history),
        energy_history=list(energies),
        energy=energies[-1],
        q_max=cert.q_max,
        certification=cert,
        flux_abs_error=abs_err,
        flux_rel_error=rel_err,
        wall_time=time.perf_counter() - t0,
        convergence_order=_convergence_order(history),
        linear_stats=dict(lin_stats),
        message=message,
    )


def solve_flow(
    mesh: Mesh,
    trunc: TruncatedDensity,
    m0: float,
    init: np.ndarray | None = None,
    config: NewtonConfig | None = None,
):
    """newton_solve with automatic flux continuation on failure.

    If the direct solve fails, the flux is ramped from m0/ramp_steps to m0,
    warm-starting each stage from the previous one.
    """
    cfg = config or NewtonConfig()
    try:
        return newton_solve(mesh, trunc, m0, init=init, config=cfg)
    except NoConvergenceError:
        if cfg.ramp_steps < 2 or m0 == 0.0:
            raise
    phi = init
    report = None
    for stage in range(1, cfg.ramp_steps + 1):
        mk = m0 * stage / cfg.ramp_steps
        phi, report = newton_solve(mesh, trunc, mk, init=phi, config=cfg)
    report.message = f"converged via {cfg.ramp_steps}-step flux continuation"
    return phi, report


@dataclass
class ContinuationResult:
    lengths: list[float]
    meshes: list[Mesh]
    fields: list[np.ndarray]
    reports: list[SolverReport]
    interior_changes: list[float]
    window_halfwidth: float


def _extend_field(old_mesh: Mesh, phi_old: np.ndarray, new_mesh: Mesh) -> np.ndarray:
    """Initial guess on a longer domain by constant axial gradient extension.

    The old potential is copied onto the common interior; beyond it the
    one-sided axial gradient at each end is extrapolated.  The trace on the
    new inlet plane is subtracted so the Dirichlet pin holds exactly.
    """
    per_plane = old_mesh.nodes_per_plane
    old = phi_old.reshape(old_mesh.N_a + 1, per_plane)
    pad = int(round((new_mesh.L - old_mesh.L) / old_mesh.h_a))
    new = np.empty((new_mesh.N_a + 1, per_plane))
    new[pad : pad + old_mesh.N_a + 1] = old
    g_in = (old[1] - old[0]) / old_mesh.h_a
    g_out = (old[-1] - old[-2]) / old_mesh.h_a
    for i in range(pad):
        new[i] = old[0] - (pad - i) * old_mesh.h_a * g_in
        new[pad + old_mesh.N_a + 1 + i] = old[-1] + (i + 1) * old_mesh.h_a * g_out
    new -= new[0][None, :]
    return new.ravel()


def continue_in_L(
    profile: Profile,
    trunc: TruncatedDensity,
    m0: float,
    L_schedule,
    N_t: int,
    N_a_first: int,
    config: NewtonConfig | None = None,
) -> ContinuationResult:
    """Solve a nested family of truncated domains of increasing length.

    The axial spacing of the first mesh is kept fixed, so the meshes are
    axially nested and the interior-change metric compares gradients at
    identical quadrature points within |x_n| <= L_schedule[0] / 2.
    """
    lengths = [float(L) for L in L_schedule]
    if any(b <= a for a, b in zip(lengths, lengths[1:])):
        raise ValueError("L_schedule must be strictly increasing")
    h_a = 2.0 * lengths[0] / N_a_first
    meshes = []
    for L in lengths:
        n_a = 2.0 * L / h_a
        pad = (L - lengths[0]) / h_a
        if abs(n_a - round(n_a)) > 1e-9 or abs(pad - round(pad)) > 1e-9:
            raise ValueError("schedule lengths must be commensurate with the axial spacing")
        meshes.append(build_mesh(profile, L, N_t, int(round(n_a))))
    fields: list[np.ndarray] = []
    reports: list[SolverReport] = []
    for k, mesh in enumerate(meshes):
        init = None if k == 0 else _extend_field(meshes[k - 1], fields[k - 1], mesh)
        phi, rep = solve_flow(mesh, trunc, m0, init=init, config=config)
        fields.append(phi)
        reports.append(rep)
    half = lengths[0] / 2.0
    changes = []
    for a, b in zip(range(len(meshes) - 1), range(1, len(meshes))):
        ga = _window_gradients(meshes[a], fields[a], half)
        gb = _window_gradients(meshes[b], fields[b], half)
        changes.append(float(np.linalg.norm(ga - gb, axis=-1).max()))
    return ContinuationResult(lengths, meshes, fields, reports, changes, half)


def _window_gradients(mesh: Mesh, phi: np.ndarray, half: float) -> np.ndarray:
    """Quadrature-point gradients of cells whose centers lie in |x_n| <= half."""
    from .assembly import gradients_at_quadrature

    layers = np.flatnonzero(np.abs(mesh.y_a_centers) <= half + 1e-12)
    grads = gradients_at_quadrature(mesh, phi)
    cpl = mesh.cells_per_layer
    sel = np.concatenate([np.arange(l * cpl, (l + 1) * cpl) for l in layers])
    return grads[sel]


@dataclass
class FlowProblem:
    """Bundle of geometry, gas, and discretization for the analysis drivers."""

    profile: Profile
    L: float
    N_t: int
    N_a: int
    gamma: float = 1.4
    delta0: float = 0.05

    def __post_init__(self):
        self._mesh: Mesh | None = None

    @property
    def relation(self) -> DensityRelation:
        return DensityRelation(GasLaw(self.gamma))

    @property
    def truncation(self) -> TruncatedDensity:
        return TruncatedDensity(self.relation, self.delta0)

    def mesh(self) -> Mesh:
        if self._mesh is None:
            self._mesh = build_mesh(self.profile, self.L, self.N_t, self.N_a)
        return self._mesh
