import numpy as np
import pytest
from scipy import integrate, optimize

from nozzleflow import (
    DensityRelation,
    EnergyDensity,
    GasLaw,
    InfeasibleFluxError,
    TruncatedDensity,
)


class TestGasLaw:
    def test_rejects_gamma_at_most_one(self):
        with pytest.raises(ValueError):
            GasLaw(1.0)

    def test_pressure_convexity_sampled(self):
        law = GasLaw(1.4)
        rho = np.linspace(0.05, 3.0, 500)
        assert np.all(law.pressure_prime(rho) > 0)
        assert np.all(law.pressure_second(rho) > 0)

    def test_sound_speed(self):
        law = GasLaw(1.4)
        assert law.sound_speed(1.0) == pytest.approx(1.0)


class TestDensityRelation:
    def test_critical_normalization(self, relation):
        assert relation.density(1.0) == pytest.approx(1.0, abs=1e-15)

    def test_stagnation_closed_form(self, relation):
        assert relation.density(0.0) == pytest.approx(1.2**2.5, rel=1e-14)
        assert relation.density(0.25) == pytest.approx(1.15**2.5, rel=1e-14)

    def test_stagnation_against_enthalpy_quadrature(self, relation):
        # Independent oracle: the stagnation state satisfies h(rho) = 1/2
        # with h obtained by numerical quadrature of p'(s)/s.
        law = relation.gas

        def h_num(rho):
            return integrate.quad(lambda s: float(law.pressure_prime(s)) / s, 1.0, rho)[0]

        rho0 = optimize.brentq(lambda r: h_num(r) - 0.5, 1.0, 3.0, xtol=1e-14)
        assert relation.density(0.0) == pytest.approx(rho0, abs=1e-10)

    def test_vacuum_guard(self, relation):
        with pytest.raises(ValueError):
            relation.density(relation.vacuum_q2)
        with pytest.raises(ValueError):
            relation.density(-0.1)

    def test_density_strictly_decreasing(self, relation):
        q = np.linspace(0.0, 1.0, 1001)
        rho = relation.density(q * q)
        assert np.all(np.diff(rho) < 0)

    def test_enthalpy_values(self, relation):
        assert relation.enthalpy(1.0) == 0.0
        assert relation.enthalpy(0.5) < 0.0
        exact = (2.0**0.4 - 1.0) / 0.4
        assert relation.enthalpy(2.0) == pytest.approx(exact, rel=1e-14)
        law = relation.gas
        quad = integrate.quad(lambda s: float(law.pressure_prime(s)) / s, 1.0, 2.0)[0]
        assert relation.enthalpy(2.0) == pytest.approx(quad, rel=1e-10)
        with pytest.raises(ValueError):
            relation.enthalpy(0.0)

    def test_enthalpy_increasing(self, relation):
        rho = np.linspace(0.2, 3.0, 300)
        assert np.all(np.diff(relation.enthalpy(rho)) > 0)

    def test_momentum_peaks_at_sonic(self, relation):
        q = np.linspace(0.0, 1.0, 1000)
        j = relation.momentum(q)
        assert np.all(j <= 1.0 + 1e-12)
        at_max = q[j > 1.0 - 1e-12]
        assert at_max.size > 0 and np.all(at_max > 1.0 - 1e-5)
        assert relation.momentum(1.0) == pytest.approx(1.0, abs=1e-14)

    def test_subsonic_equivalence(self, relation):
        # Mach < 1 iff q < 1 iff rho > 1, on a thousand sample speeds.
        q = np.linspace(1e-3, 1.2, 1000)
        mach = relation.mach(q)
        rho = relation.density(q * q)
        sub = q < 1.0
        assert np.array_equal(mach < 1.0, sub)
        assert np.array_equal(rho > 1.0, sub)

    def test_flux_inversion_round_trip(self, relation):
        q = relation.solve_q_from_flux(relation.momentum(0.5))
        assert q == pytest.approx(0.5, abs=1e-10)
        assert relation.solve_q_from_flux(0.0) == 0.0

    def test_flux_inversion_residual(self, relation):
        for j in (0.1, 0.5, 0.9, 0.99, 0.9999):
            q = relation.solve_q_from_flux(j)
            assert abs(relation.momentum(q) - j) < 1e-12

    def test_flux_inversion_near_sonic(self, relation):
        q = relation.solve_q_from_flux(1.0 - 1e-9)
        assert q > 0.99

    def test_flux_inversion_infeasible(self, relation):
        with pytest.raises(InfeasibleFluxError):
            relation.solve_q_from_flux(1.0)
        with pytest.raises(InfeasibleFluxError):
            relation.solve_q_from_flux(1.5)


class TestTruncatedDensity:
    def test_delta0_range(self, relation):
        with pytest.raises(ValueError):
            TruncatedDensity(relation, 0.0)
        with pytest.raises(ValueError):
            TruncatedDensity(relation, 0.25)

    def test_matches_density_below_band(self, relation, trunc):
        t = np.linspace(0.0, 0.9, 1000)
        assert np.array_equal(trunc.theta(t), relation.density(t))
        assert trunc.theta(0.5) == relation.density(0.5)

    def test_plateau_exact(self, relation, trunc):
        plateau = relation.density(0.95)
        t = np.linspace(0.95, 6.0, 500)
        assert np.all(trunc.theta(t) == plateau)
        assert trunc.theta(2.0) == plateau

    def test_band_value_between_plateau_and_entry(self, relation, trunc):
        val = trunc.theta(0.925)
        assert relation.density(0.95) < val < relation.density(0.90)
        assert trunc.theta_prime(0.925) <= 0.0

    def test_c1_continuity_at_band_edges(self, trunc):
        for edge in (0.90, 0.95):
            below = trunc.theta(edge - 1e-12)
            above = trunc.theta(edge + 1e-12)
            assert abs(below - above) < 1e-10
            dbelow = trunc.theta_prime(edge - 1e-12)
            dabove = trunc.theta_prime(edge + 1e-12)
            assert abs(dbelow - dabove) < 1e-9

    def test_monotone_nonincreasing_everywhere(self, trunc):
        t = np.linspace(0.0, 4.0, 200_001)
        th = trunc.theta(t)
        assert np.all(np.diff(th) <= 1e-15)
        assert np.all(trunc.theta_prime(t) <= 1e-15)

    def test_ellipticity_bounds_schedule(self, relation):
        for d0 in (0.10, 0.05, 0.025):
            tr = TruncatedDensity(relation, d0)
            lam, big = tr.ellipticity_bounds()
            assert 0.0 < lam < big
            assert big >= relation.density(0.0)

    def test_ellipticity_bounds_sampling_stability(self, trunc):
        # Re-derive the same extremes from a coarser independent sample.
        lam, big = trunc.ellipticity_bounds()
        t = np.linspace(0.0, 4.0, 20_001)
        th = trunc.theta(t)
        dj = th + 2.0 * trunc.theta_prime(t) * t
        assert min(th.min(), dj.min()) == pytest.approx(lam, rel=1e-2)
        assert max(th.max(), dj.max()) == pytest.approx(big, rel=1e-6)

    def test_linearized_coefficient_bounds_random(self, trunc):
        # a_ij(w) xi_i xi_j stays within the reported eigenvalue bounds for
        # 10^4 random gradient/direction pairs.
        lam, big = trunc.ellipticity_bounds()
        rng = np.random.default_rng(42)
        w = rng.uniform(-2.0, 2.0, size=(10_000, 3))
        xi = rng.standard_normal((10_000, 3))
        t = np.sum(w * w, axis=1)
        th = trunc.theta(t)
        thp = trunc.theta_prime(t)
        quad = th * np.sum(xi * xi, axis=1) + 2.0 * thp * np.sum(w * xi, axis=1) ** 2
        norm2 = np.sum(xi * xi, axis=1)
        assert np.all(quad >= (lam - 1e-9) * norm2)
        assert np.all(quad <= (big + 1e-9) * norm2)


class TestEnergyDensity:
    def test_zero_and_monotone(self, trunc):
        F = EnergyDensity(trunc)
        assert F.value(0.0) == 0.0
        t = np.linspace(0.0, 4.0, 2000)
        assert np.all(np.diff(F.value(t)) > 0)

    def test_derivative_is_half_theta_fd(self, trunc):
        F = EnergyDensity(trunc)
        t = np.concatenate([
            np.linspace(0.01, 0.89, 40),
            np.linspace(0.90, 0.95, 40),  # across the band
            np.linspace(0.96, 3.5, 40),
        ])
        step = 1e-6
        fd = (F.value(t + step) - F.value(t - step)) / (2.0 * step)
        half = 0.5 * trunc.theta(t)
        assert np.max(np.abs(fd - half) / np.abs(half)) < 1e-6
        assert np.allclose(F.derivative(t), half, rtol=1e-15)

    def test_value_against_adaptive_quadrature(self, trunc):
        # Oracle: F(q2) = 1/2 * integral of theta, integrated adaptively with
        # break points at the band edges.
        F = EnergyDensity(trunc)
        for q2 in (0.25, 0.93, 3.0):
            ref, err = integrate.quad(
                lambda s: float(trunc.theta(s)), 0.0, q2, points=[0.90, 0.95], limit=200
            )
            assert F.value(q2) == pytest.approx(0.5 * ref, rel=1e-10)

    def test_growth_comparable_to_q2(self, trunc):
        F = EnergyDensity(trunc)
        q = np.linspace(1e-3, 2.0, 500)
        ratio = F.value(q * q) / (q * q)
        assert ratio.min() > 0.4
        assert ratio.max() < 1.0
