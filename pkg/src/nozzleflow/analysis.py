"""Post-solution diagnostics: flow summaries, far-field behavior, uniqueness,
critical mass-flux search, and the averaged-gradient / Poincare ratio checks.

All functions are pure consumers of solved fields; independent solves inside
the sweep drivers may run concurrently (results are merged in flux order).
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .assembly import gradients_at_quadrature, speed_sq_at_quadrature
from .gas import DensityRelation, TruncatedDensity
from .mesh import Mesh, StationError
from .solver import (
    FlowProblem,
    NewtonConfig,
    NoConvergenceError,
    SolverReport,
    solve_flow,
)

__all__ = [
    "SpeedSummary",
    "FarFieldReport",
    "ProbeSample",
    "UniquenessResult",
    "SweepPoint",
    "SweepResult",
    "CriticalBracket",
    "CriticalFluxResult",
    "LocalAverageReport",
    "PoincareReport",
    "max_speed_and_mach",
    "far_field_check",
    "uniqueness_check",
    "flux_sweep",
    "critical_flux_search",
    "local_average_diagnostic",
    "poincare_diagnostic",
    "worker_count",
]


def worker_count() -> int:
    """Worker cap for parallel sweep points (NOZZLEFLOW_THREADS, default: cores)."""
    env = os.environ.get("NOZZLEFLOW_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


# -- flow summaries ---------------------------------------------------------


@dataclass
class SpeedSummary:
    q_max: float
    q2_max: float
    mach_max: float
    station: float
    subsonic: bool


def max_speed_and_mach(mesh: Mesh, relation: DensityRelation, phi: np.ndarray) -> SpeedSummary:
    """Largest quadrature-point speed and Mach number of a solved field."""
    t = speed_sq_at_quadrature(mesh, phi)
    flat = int(np.argmax(t))
    q2 = float(t.flat[flat])
    cell, qp = divmod(flat, t.shape[1])
    station = float(mesh.qp_axial[cell, qp])
    q = float(np.sqrt(q2))
    c2 = 0.5 * (relation.gamma + 1.0) - 0.5 * (relation.gamma - 1.0) * q2
    mach = q / float(np.sqrt(c2)) if c2 > 0.0 else np.inf
    return SpeedSummary(q, q2, mach, station, subsonic=q < 1.0)


# -- far field ---------------------------------------------------------------


@dataclass
class ProbeSample:
    side: str            # "-" or "+"
    station: float
    q_bar: float         # section-averaged axial velocity
    transverse_sup: float
    q_limit: float       # far-field speed from flux inversion
    deviation: float
    rel_deviation: float


@dataclass
class FarFieldReport:
    q_minus: float
    q_plus: float
    probes: list[ProbeSample]

    def worst_rel_deviation(self) -> float:
        return max((p.rel_deviation for p in self.probes), default=0.0)

    def worst_transverse_fraction(self) -> float:
        out = 0.0
        for p in self.probes:
            if p.q_limit > 0.0:
                out = max(out, p.transverse_sup / p.q_limit)
        return out


def _section_average(mesh: Mesh, phi: np.ndarray, layer: int):
    cells = mesh.layer_cells(layer)
    conn = mesh.conn[cells]
    grads = np.einsum("cqkd,ck->cqd", mesh.Gm[cells], phi[conn])
    w = mesh.wm[cells]
    area = float(w.sum())
    q_bar = float(np.sum(w * grads[..., -1])) / area
    trans = float(np.sqrt(np.sum(grads[..., :-1] ** 2, axis=-1)).max())
    return q_bar, trans


def far_field_check(
    mesh: Mesh,
    relation: DensityRelation,
    phi: np.ndarray,
    m0: float,
    offsets=None,
) -> FarFieldReport:
    """Compare probe-station averages against the flux-inversion speeds.

    Probes sit at x_n = +-(L - offset); the defaults L/8 and L/4 keep them
    inside the near-cylindrical region and away from the outlet datum.
    """
    if offsets is None:
        offsets = (mesh.L / 8.0, mesh.L / 4.0)
    prof = mesh.profile
    q_minus = relation.solve_q_from_flux(m0 / prof.section_measure_minus)
    q_plus = relation.solve_q_from_flux(m0 / prof.section_measure_plus)
    probes = []
    for off in offsets:
        for side, station, q_lim in (
            ("-", -(mesh.L - off), q_minus),
            ("+", mesh.L - off, q_plus),
        ):
            if not (-mesh.L < station < mesh.L):
                raise StationError(f"probe offset {off} puts the station outside the domain")
            layer = mesh.layer_of_station(station)
            q_bar, trans = _section_average(mesh, phi, layer)
            dev = abs(q_bar - q_lim)
            rel = dev / q_lim if q_lim > 0.0 else dev
            probes.append(
                ProbeSample(side, float(mesh.y_a_centers[layer]), q_bar, trans, q_lim, dev, rel)
            )
    return FarFieldReport(q_minus, q_plus, probes)


# -- uniqueness ---------------------------------------------------------------


@dataclass
class UniquenessResult:
    grad_sup_diff: float
    report_zero: SolverReport
    report_ramp: SolverReport


def uniqueness_check(
    mesh: Mesh,
    trunc: TruncatedDensity,
    m0: float,
    config: NewtonConfig | None = None,
) -> UniquenessResult:
    """Solve from two inits and compare quadrature-point gradients.

    Init one is the zero field, init two the linear ramp with the mean
    outlet slope m0 / |S+|.  Only gradients are compared; the potentials may
    differ by a constant.
    """
    phi0, rep0 = solve_flow(mesh, trunc, m0, init=None, config=config)
    slope = m0 / mesh.profile.section_measure_plus
    phi1, rep1 = solve_flow(mesh, trunc, m0, init=mesh.ramp_field(slope), config=config)
    g0 = gradients_at_quadrature(mesh, phi0)
    g1 = gradients_at_quadrature(mesh, phi1)
    sup = float(np.linalg.norm(g0 - g1, axis=-1).max())
    return UniquenessResult(sup, rep0, rep1)


# -- sweeps and the critical flux ---------------------------------------------


@dataclass
class SweepPoint:
    m0: float
    converged: bool
    certified: bool
    q_max: float
    flux_rel_error: float


@dataclass
class SweepResult:
    points: list[SweepPoint]
    delta0: float

    def q_values(self) -> np.ndarray:
        return np.array([p.q_max for p in self.points])

    def nondecreasing_q(self) -> bool:
        q = [p.q_max for p in self.points if p.certified]
        return all(b >= a - 1e-12 for a, b in zip(q, q[1:]))


def _solve_point(mesh, trunc, m0, config) -> SweepPoint:
    try:
        _, rep = solve_flow(mesh, trunc, m0, config=config)
    except NoConvergenceError:
        return SweepPoint(m0, False, False, np.nan, np.nan)
    return SweepPoint(
        m0, True, rep.truncation_certified, rep.q_max, rep.flux_rel_error
    )


def flux_sweep(
    mesh: Mesh,
    trunc: TruncatedDensity,
    m0_values,
    config: NewtonConfig | None = None,
    parallel: bool = False,
) -> SweepResult:
    """Independent solves over a flux grid, merged in flux order."""
    values = [float(m) for m in m0_values]
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValueError("flux grid must be strictly increasing")
    if parallel and len(values) > 1 and worker_count() > 1:
        with ThreadPoolExecutor(max_workers=worker_count()) as pool:
            points = list(pool.map(lambda m: _solve_point(mesh, trunc, m, config), values))
    else:
        points = [_solve_point(mesh, trunc, m, config) for m in values]
    return SweepResult(points, trunc.delta0)


@dataclass
class CriticalBracket:
    delta0: float
    m_lo: float
    m_hi: float
    q_lo: float          # certified max speed at m_lo
    iterations: int
    points: list[SweepPoint] = field(default_factory=list)


@dataclass
class CriticalFluxResult:
    brackets: list[CriticalBracket]
    estimate: float      # last (tightest) certified lower bound
    uncertainty: float   # width of the final bracket
    nested: bool

    @property
    def delta0_schedule(self):
        return [b.delta0 for b in self.brackets]


def critical_flux_search(
    problem: FlowProblem,
    delta0_schedule=(0.10, 0.05, 0.025),
    bisections: int = 12,
    config: NewtonConfig | None = None,
) -> CriticalFluxResult:
    """Bracket the critical mass flux by bisection on certification.

    For each truncation parameter the largest flux whose solve converges AND
    certifies is bisected within [0, choke bound], where the choke bound is
    the minimal section measure (momentum density cannot exceed 1).  The
    schedule moves the certified-speed threshold toward 1, so the brackets
    are nested and the last lower bound is the reported estimate.
    """
    mesh = problem.mesh()
    relation = problem.relation
    r_min = float(np.asarray(problem.profile.half_width(mesh.y_a)).min())
    choke = (2.0 * r_min) ** (mesh.n - 1)
    brackets = []
    for d0 in delta0_schedule:
        trunc = TruncatedDensity(relation, float(d0))
        points: list[SweepPoint] = []
        lo, q_lo = 0.0, 0.0
        hi = choke
        top = _solve_point(mesh, trunc, hi, config)
        points.append(top)
        tries = 0
        while top.certified and tries < 3:
            # Paranoia: the choke bound can never certify, but keep the
            # bracket honest if a pathological profile slips through.
            hi *= 1.5
            top = _solve_point(mesh, trunc, hi, config)
            points.append(top)
            tries += 1
        warm = None
        for _ in range(bisections):
            mid = 0.5 * (lo + hi)
            try:
                phi, rep = solve_flow(mesh, trunc, mid, init=warm, config=config)
                pt = SweepPoint(mid, True, rep.truncation_certified, rep.q_max,
                                rep.flux_rel_error)
            except NoConvergenceError:
                pt = SweepPoint(mid, False, False, np.nan, np.nan)
                phi = None
            points.append(pt)
            if pt.certified:
                lo, q_lo = mid, pt.q_max
                warm = phi
            else:
                hi = mid
        brackets.append(CriticalBracket(float(d0), lo, hi, q_lo, bisections, points))
    tol = brackets[-1].m_hi - brackets[-1].m_lo
    nested = all(
        b.m_lo >= a.m_lo - tol for a, b in zip(brackets, brackets[1:])
    )
    return CriticalFluxResult(
        brackets=brackets,
        estimate=brackets[-1].m_lo,
        uncertainty=brackets[-1].m_hi - brackets[-1].m_lo,
        nested=nested,
    )


# -- averaged-gradient and Poincare diagnostics -------------------------------


@dataclass
class LocalAverageReport:
    worst_center: float
    worst_average: float   # max over unit windows of avg |grad phi|^2
    ratio: float           # worst_average / m0^2 (0 when m0 = 0)


def local_average_diagnostic(mesh: Mesh, phi: np.ndarray, m0: float) -> LocalAverageReport:
    """Worst window average of |grad phi|^2 over unit axial windows.

    Windows of physical half-width 1 are centered at every interior axial
    node station; the reported ratio to m0^2 is the quantity whose
    L-independence the diagnostics track.
    """
    if mesh.L < 2.0:
        raise StationError("local averages need L >= 2 for a unit window to fit")
    t = speed_sq_at_quadrature(mesh, phi)
    cell_energy = (mesh.wJ * t).sum(axis=1).reshape(mesh.N_a, mesh.cells_per_layer).sum(axis=1)
    cell_volume = mesh.wJ.sum(axis=1).reshape(mesh.N_a, mesh.cells_per_layer).sum(axis=1)
    half_cells = max(1, int(round(1.0 / mesh.h_a)))
    worst, worst_center = 0.0, 0.0
    for node in range(half_cells, mesh.N_a - half_cells + 1):
        center = mesh.y_a[node]
        if abs(center) > mesh.L - 1.0 + 1e-12:
            continue
        sl = slice(node - half_cells, node + half_cells)
        avg = cell_energy[sl].sum() / cell_volume[sl].sum()
        if avg > worst:
            worst, worst_center = float(avg), float(center)
    ratio = worst / m0**2 if m0 > 0.0 else 0.0
    return LocalAverageReport(worst_center, worst, ratio)


@dataclass
class PoincareReport:
    max_ratio: float
    slab_max: np.ndarray     # worst ratio per unit slab across fields
    n_fields: int

    def spread(self) -> float:
        """Max/min of the per-slab worst ratios (stability across slabs)."""
        valid = self.slab_max[self.slab_max > 0.0]
        if valid.size < 2:
            return 1.0
        return float(valid.max() / valid.min())


def poincare_diagnostic(
    mesh: Mesh,
    fields: list[np.ndarray] | None = None,
    n_fields: int = 50,
    rng: np.random.Generator | None = None,
) -> PoincareReport:
    """Ratios ||f - mean||_2 / ||grad f||_2 on unit axial slabs.

    Evaluated for random nodal fields (or the supplied ones) with quadrature
    consistent with assembly.  Constant fields contribute nothing (0/0 slabs
    are skipped by construction).
    """
    if fields is None:
        rng = rng or np.random.default_rng(0)
        fields = [rng.standard_normal(mesh.n_nodes) for _ in range(n_fields)]
    slab_cells = max(1, int(round(1.0 / mesh.h_a)))
    n_slabs = mesh.N_a // slab_cells
    slab_max = np.zeros(n_slabs)
    w_flat = mesh.wJ.reshape(mesh.N_a, mesh.cells_per_layer, -1)
    for f in fields:
        fe = f[mesh.conn]
        f_qp = np.einsum("qk,ck->cq", mesh.basis_values, fe)
        t_qp = speed_sq_at_quadrature(mesh, f)
        f_qp = f_qp.reshape(mesh.N_a, mesh.cells_per_layer, -1)
        t_qp = t_qp.reshape(mesh.N_a, mesh.cells_per_layer, -1)
        for s in range(n_slabs):
            sl = slice(s * slab_cells, (s + 1) * slab_cells)
            w = w_flat[sl]
            vol = w.sum()
            mean = (w * f_qp[sl]).sum() / vol
            num = (w * (f_qp[sl] - mean) ** 2).sum()
            den = (w * t_qp[sl]).sum()
            if den < 1e-30:
                continue
            slab_max[s] = max(slab_max[s], float(np.sqrt(num / den)))
    return PoincareReport(float(slab_max.max(initial=0.0)), slab_max, len(fields))
