import numpy as np
import pytest

from nozzleflow import Cylinder, GaussianThroat, NozzleMap, TanhExpansion, verify_regularity
from nozzleflow.nozzle import OutsideDomainError


class BentCylinder(Cylinder):
    """Constant width, sinusoidal centerline; exercises the offset terms."""

    def offset(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape + (self.dim - 1,))
        out[..., 0] = 0.2 * np.sin(x)
        return out

    def offset_prime(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape + (self.dim - 1,))
        out[..., 0] = 0.2 * np.cos(x)
        return out

    def offset_second(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape + (self.dim - 1,))
        out[..., 0] = -0.2 * np.sin(x)
        return out


def _random_reference_points(rng, n, count, span=5.0):
    y = np.empty((count, n))
    y[:, :-1] = rng.uniform(-1.0, 1.0, size=(count, n - 1))
    y[:, -1] = rng.uniform(-span, span, size=count)
    return y


class TestMap:
    def test_unit_cylinder_is_identity(self):
        m = NozzleMap(Cylinder(r0=1.0, dim=2))
        y = m.map_forward(np.array([0.5, 2.0]))
        assert np.allclose(y, [0.5, 2.0], atol=1e-15)
        sigma, detj = m.jacobian(np.array([0.3, -1.0]))
        assert np.allclose(sigma, np.eye(2), atol=1e-15)
        assert detj == pytest.approx(1.0)

    def test_cylinder_volume_element(self):
        _, detj = NozzleMap(Cylinder(r0=2.0, dim=2)).jacobian(np.array([0.0, 0.0]))
        assert detj == pytest.approx(2.0)
        _, detj3 = NozzleMap(Cylinder(r0=2.0, dim=3)).jacobian(np.zeros(3))
        assert detj3 == pytest.approx(4.0)

    def test_centerline_maps_to_centerline(self):
        prof = TanhExpansion(r_in=0.5, r_out=1.0, length=1.0, dim=2)
        m = NozzleMap(prof)
        x = m.map_inverse(np.array([0.0, 1.7]))
        assert x[0] == pytest.approx(0.0, abs=1e-15)
        bent = NozzleMap(BentCylinder(r0=1.0, dim=2))
        x = bent.map_inverse(np.array([0.0, 2.0]))
        assert x[0] == pytest.approx(0.2 * np.sin(2.0), rel=1e-14)

    def test_tanh_forward_value(self):
        # r(0) = 0.75 for the half-open expansion, so x' = 0.25 -> y' = 1/3.
        m = NozzleMap(TanhExpansion(r_in=0.5, r_out=1.0, length=1.0, dim=2))
        y = m.map_forward(np.array([0.25, 0.0]))
        assert y[0] == pytest.approx(0.25 / 0.75, rel=1e-14)

    @pytest.mark.parametrize(
        "profile",
        [
            TanhExpansion(r_in=0.5, r_out=1.0, length=1.0, dim=2),
            GaussianThroat(r0=1.0, depth=0.3, width=1.0, dim=3),
            BentCylinder(r0=1.0, dim=2),
        ],
    )
    def test_round_trip_identity(self, profile):
        m = NozzleMap(profile)
        rng = np.random.default_rng(7)
        y = _random_reference_points(rng, profile.dim, 10_000)
        back = m.map_forward(m.map_inverse(y))
        assert np.abs(back - y).max() < 1e-12

    def test_out_of_domain_raises(self):
        m = NozzleMap(Cylinder(r0=0.5, dim=2))
        with pytest.raises(OutsideDomainError):
            m.map_forward(np.array([0.6, 0.0]))
        with pytest.raises(OutsideDomainError):
            m.map_inverse(np.array([1.5, 0.0]))

    @pytest.mark.parametrize(
        "profile",
        [
            TanhExpansion(r_in=0.5, r_out=1.0, length=1.0, dim=2),
            GaussianThroat(r0=1.0, depth=0.3, width=1.0, dim=3),
            BentCylinder(r0=1.0, dim=2),
        ],
    )
    def test_jacobian_matches_finite_differences(self, profile):
        m = NozzleMap(profile)
        rng = np.random.default_rng(11)
        y = _random_reference_points(rng, profile.dim, 20, span=2.0)
        y[:, :-1] *= 0.8  # keep FD stencils inside the domain
        sigma, _ = m.jacobian(y)
        x = m.map_inverse(y)
        h = 1e-6
        for i in range(profile.dim):
            e = np.zeros(profile.dim)
            e[i] = h
            fd = (m.map_forward(x + e) - m.map_forward(x - e)) / (2.0 * h)
            assert np.abs(fd - sigma[:, i, :]).max() < 1e-6

    def test_tanh_offdiagonal_coupling(self):
        prof = TanhExpansion(r_in=0.5, r_out=1.0, length=1.0, dim=2)
        m = NozzleMap(prof)
        y = np.array([0.4, 0.0])
        sigma, _ = m.jacobian(y)
        r0 = float(prof.half_width(0.0))
        dr0 = float(prof.half_width_prime(0.0))
        # d y_1 / d x_n couples axial motion into the transverse coordinate.
        assert sigma[1, 0] == pytest.approx(-0.4 * dr0 / r0, rel=1e-13)


class TestSections:
    def test_cylinder_measure(self):
        assert Cylinder(r0=0.5, dim=2).section_measure(0.0) == pytest.approx(1.0)

    def test_tanh_far_field_limit(self):
        prof = TanhExpansion(r_in=0.5, r_out=1.0, length=1.0, dim=2)
        assert prof.section_measure(40.0) == pytest.approx(2.0, abs=1e-12)
        assert prof.section_measure_plus == pytest.approx(2.0)
        assert prof.section_measure_minus == pytest.approx(1.0)

    def test_gaussian_throat_measure_3d(self):
        prof = GaussianThroat(r0=1.0, depth=0.3, width=1.0, dim=3)
        assert prof.section_measure(0.0) == pytest.approx(4.0 * 0.7**2, rel=1e-14)

    def test_tanh_monotone_approach_to_limits(self):
        prof = TanhExpansion(r_in=0.5, r_out=1.0, length=1.0, dim=2)
        x = np.linspace(3.0, 12.0, 50)
        gap_plus = prof.r_plus - np.asarray(prof.half_width(x))
        assert np.all(gap_plus > 0) and np.all(np.diff(gap_plus) < 0)
        gap_minus = np.asarray(prof.half_width(-x)) - prof.r_minus
        assert np.all(gap_minus > 0) and np.all(np.diff(gap_minus) < 0)

    def test_tanh_approach_rate_is_exponential(self):
        # 1 - tanh(x/l) ~ 2 exp(-2x/l): unit steps shrink the gap by e^(-2/l).
        prof = TanhExpansion(r_in=0.5, r_out=1.0, length=1.0, dim=2)
        x = np.arange(4.0, 10.0)
        gap = prof.r_plus - np.asarray(prof.half_width(x))
        rates = gap[1:] / gap[:-1]
        assert np.allclose(rates, np.exp(-2.0), rtol=1e-3)


class TestProfileDerivatives:
    @pytest.mark.parametrize(
        "profile",
        [
            Cylinder(r0=0.7, dim=2),
            TanhExpansion(r_in=0.5, r_out=1.0, length=0.8, dim=2),
            GaussianThroat(r0=1.0, depth=0.3, width=1.2, dim=2),
            BentCylinder(r0=1.0, dim=2),
        ],
    )
    def test_hand_coded_derivatives_match_fd(self, profile):
        x = np.linspace(-5.0, 5.0, 41)
        h = 1e-5
        fd_r = (np.asarray(profile.half_width(x + h)) - np.asarray(profile.half_width(x - h))) / (2 * h)
        assert np.abs(fd_r - np.asarray(profile.half_width_prime(x))).max() < 1e-8
        fd_r2 = (
            np.asarray(profile.half_width_prime(x + h))
            - np.asarray(profile.half_width_prime(x - h))
        ) / (2 * h)
        assert np.abs(fd_r2 - np.asarray(profile.half_width_second(x))).max() < 1e-8
        fd_c = (profile.offset(x + h) - profile.offset(x - h)) / (2 * h)
        assert np.abs(fd_c - profile.offset_prime(x)).max() < 1e-8
        fd_c2 = (profile.offset_prime(x + h) - profile.offset_prime(x - h)) / (2 * h)
        assert np.abs(fd_c2 - profile.offset_second(x)).max() < 1e-8


class TestRegularity:
    def test_cylinder_passes(self):
        report = verify_regularity(Cylinder(r0=1.0, dim=2), bound=1.0)
        assert report.ok
        assert report.k_estimate == pytest.approx(1.0)

    def test_sharp_tanh_fails_fixed_bound(self):
        # max |r'| = (r+ - r-) / (2 l) blows up as the transition shortens.
        sharp = TanhExpansion(r_in=0.5, r_out=1.0, length=0.005, dim=2)
        report = verify_regularity(sharp, bound=20.0)
        assert not report.ok
        assert report.k_estimate >= 0.5 / (2 * 0.005)
        assert abs(report.worst_station) < 1.0

    def test_pinched_throat_fails_positivity(self):
        report = verify_regularity(GaussianThroat(r0=1.0, depth=1.0, width=1.0), bound=1e6)
        assert not report.ok
        assert report.min_half_width <= 0.0
        assert report.worst_station == pytest.approx(0.0, abs=0.1)

    def test_profile_bounds_sampled(self):
        prof = TanhExpansion(r_in=0.5, r_out=1.0, length=1.0, dim=2)
        x = np.linspace(-30, 30, 2001)
        r = np.asarray(prof.half_width(x))
        assert r.min() > 0.0 and r.max() < np.inf
        assert np.abs(prof.half_width_prime(x)).max() < 1.0
        assert np.abs(prof.half_width_second(x)).max() < 1.0
