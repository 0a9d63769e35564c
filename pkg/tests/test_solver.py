import numpy as np
import pytest

from nozzleflow import (
    Cylinder,
    NewtonConfig,
    NoConvergenceError,
    build_mesh,
    certify_subsonic,
    continue_in_L,
    newton_solve,
    solve_flow,
)
from nozzleflow.assembly import gradients_at_quadrature


class TestNewton:
    def test_cylinder_exact_solution(self, unit_cylinder, relation, trunc):
        mesh = build_mesh(unit_cylinder, 2.0, 4, 16)
        q_star = 0.5
        m0 = relation.momentum(q_star)
        phi, report = newton_solve(mesh, trunc, m0)
        assert report.converged
        grads = gradients_at_quadrature(mesh, phi)
        exact = np.array([0.0, q_star])
        assert np.linalg.norm(grads - exact, axis=-1).max() < 1e-8
        assert report.flux_abs_error < 1e-10

    def test_zero_flux_zero_init_converges_immediately(self, unit_cylinder, trunc):
        mesh = build_mesh(unit_cylinder, 2.0, 4, 8)
        phi, report = newton_solve(mesh, trunc, 0.0)
        assert report.converged and report.iterations == 0
        assert np.all(phi == 0.0)

    def test_zero_flux_random_init_relaxes_to_constant(self, unit_cylinder, trunc):
        mesh = build_mesh(unit_cylinder, 2.0, 4, 8)
        rng = np.random.default_rng(12)
        init = mesh.apply_dirichlet(0.3 * rng.standard_normal(mesh.n_nodes))
        phi, report = newton_solve(mesh, trunc, 0.0, init=init)
        assert report.converged
        grads = gradients_at_quadrature(mesh, phi)
        assert np.linalg.norm(grads, axis=-1).max() < 1e-7

    def test_energy_decreases_across_accepted_steps(self, tanh_profile, trunc):
        mesh = build_mesh(tanh_profile, 4.0, 8, 32)
        _, report = newton_solve(mesh, trunc, 0.3)
        e = report.energy_history
        assert all(b < a for a, b in zip(e, e[1:]))

    def test_residual_history_decreases(self, tanh_profile, trunc):
        mesh = build_mesh(tanh_profile, 4.0, 8, 32)
        _, report = newton_solve(mesh, trunc, 0.3)
        r = report.residual_history
        assert all(b < a for a, b in zip(r, r[1:]))

    def test_quadratic_tail(self, tanh_profile, trunc):
        mesh = build_mesh(tanh_profile, 4.0, 8, 32)
        _, report = newton_solve(mesh, trunc, 0.45)
        assert report.convergence_order is not None
        assert report.convergence_order >= 1.7

    def test_init_independence(self, tanh_profile, trunc):
        mesh = build_mesh(tanh_profile, 4.0, 8, 32)
        m0 = 0.3
        phi_a, _ = newton_solve(mesh, trunc, m0)
        slope = m0 / mesh.profile.section_measure_plus
        phi_b, _ = newton_solve(mesh, trunc, m0, init=mesh.ramp_field(slope))
        ga = gradients_at_quadrature(mesh, phi_a)
        gb = gradients_at_quadrature(mesh, phi_b)
        assert np.linalg.norm(ga - gb, axis=-1).max() < 1e-8

    def test_cylinder_exact_solution_3d(self, relation, trunc):
        mesh = build_mesh(Cylinder(r0=0.5, dim=3), 1.0, 3, 6)
        q_star = 0.4
        m0 = relation.momentum(q_star) * 1.0  # |S| = (2 * 0.5)^2 = 1
        phi, report = newton_solve(mesh, trunc, m0)
        assert report.converged
        grads = gradients_at_quadrature(mesh, phi)
        exact = np.array([0.0, 0.0, q_star])
        assert np.linalg.norm(grads - exact, axis=-1).max() < 1e-9
        assert report.flux_abs_error < 1e-12

    def test_config_validation(self):
        with pytest.raises(ValueError):
            NewtonConfig(max_iter=0)
        with pytest.raises(ValueError):
            NewtonConfig(rtol=0.0)
        with pytest.raises(ValueError):
            NewtonConfig(backtrack=1.5)

    def test_failure_carries_report(self, unit_cylinder, trunc):
        mesh = build_mesh(unit_cylinder, 2.0, 4, 8)
        cfg = NewtonConfig(max_iter=1)
        with pytest.raises(NoConvergenceError) as info:
            newton_solve(mesh, trunc, 0.7, config=cfg)
        assert info.value.report is not None
        assert not info.value.report.converged
        assert len(info.value.report.residual_history) >= 1

    def test_solve_flow_ramps_after_failure(self, unit_cylinder, trunc, monkeypatch):
        # Force the direct attempt to fail so the 4-stage flux continuation
        # kicks in; the stages then warm-start each other to the target.
        import nozzleflow.solver as solver_mod

        mesh = build_mesh(unit_cylinder, 2.0, 4, 8)
        real = solver_mod.newton_solve
        calls = {"n": 0}

        def flaky(*args, **kwargs):
            calls["n"] += 1
            if calls["n"] == 1:
                raise NoConvergenceError("synthetic failure", None)
            return real(*args, **kwargs)

        monkeypatch.setattr(solver_mod, "newton_solve", flaky)
        phi, report = solver_mod.solve_flow(mesh, trunc, 0.9)
        assert report.converged
        assert "continuation" in report.message
        assert calls["n"] == 5  # failed direct attempt + 4 ramp stages
        grads = gradients_at_quadrature(mesh, phi)
        assert np.linalg.norm(grads, axis=-1).max() == pytest.approx(
            trunc.base.solve_q_from_flux(0.9), abs=1e-8
        )


class TestCertification:
    def test_zero_flux_certifies(self, unit_cylinder, trunc):
        mesh = build_mesh(unit_cylinder, 2.0, 4, 8)
        phi, _ = newton_solve(mesh, trunc, 0.0)
        cert = certify_subsonic(mesh, trunc, phi)
        assert cert.certified and cert.q_max == 0.0
        assert cert.coefficients_match

    def test_moderate_flux_certifies_exactly(self, unit_cylinder, relation, trunc):
        mesh = build_mesh(unit_cylinder, 2.0, 4, 16)
        phi, _ = newton_solve(mesh, trunc, relation.momentum(0.5))
        cert = certify_subsonic(mesh, trunc, phi)
        assert cert.certified
        assert cert.q2_max == pytest.approx(0.25, abs=1e-9)
        assert cert.margin > 0.6
        # Certification implies the surrogate equals the density at every
        # quadrature point, bitwise.
        assert cert.coefficient_defect == 0.0

    def test_choked_flux_converges_but_does_not_certify(self, unit_cylinder, trunc):
        # |S| = 1, so m0 = 1 saturates the momentum bound: the surrogate
        # problem still converges but cannot be certified subsonic.
        mesh = build_mesh(unit_cylinder, 2.0, 4, 8)
        phi, report = solve_flow(mesh, trunc, 1.0)
        assert report.converged
        assert not report.truncation_certified
        assert report.certification.margin < 0.0


class TestContinuation:
    def test_cylinder_interior_change_at_solver_tolerance(self, unit_cylinder, relation, trunc):
        m0 = relation.momentum(0.4)
        result = continue_in_L(unit_cylinder, trunc, m0, [2.0, 4.0, 8.0], N_t=4, N_a_first=16)
        assert all(c < 1e-9 for c in result.interior_changes)
        assert all(r.truncation_certified for r in result.reports)

    def test_tanh_interior_change_decreases(self, tanh_profile, trunc):
        result = continue_in_L(tanh_profile, trunc, 0.3, [4.0, 8.0, 16.0], N_t=8, N_a_first=32)
        c = result.interior_changes
        assert c[1] < c[0]

    def test_single_length_is_plain_solve(self, tanh_profile, trunc):
        result = continue_in_L(tanh_profile, trunc, 0.3, [4.0], N_t=4, N_a_first=16)
        mesh = build_mesh(tanh_profile, 4.0, 4, 16)
        phi, _ = newton_solve(mesh, trunc, 0.3)
        assert result.interior_changes == []
        assert np.abs(result.fields[0] - phi).max() < 1e-9

    def test_rejects_bad_schedules(self, tanh_profile, trunc):
        with pytest.raises(ValueError):
            continue_in_L(tanh_profile, trunc, 0.3, [4.0, 4.0], N_t=4, N_a_first=16)
        with pytest.raises(ValueError):
            continue_in_L(tanh_profile, trunc, 0.3, [4.0, 4.3], N_t=4, N_a_first=16)
