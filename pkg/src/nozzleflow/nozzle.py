"""Nozzle geometries and the diffeomorphism onto a reference cylinder.

A nozzle is described by a positive axial half-width profile r(x_n) and an
optional centerline offset c(x_n); cross-sections are squares (in 3D) or
intervals (in 2D) of half-width r centered at c.  The map

    y' = (x' - c(x_n)) / r(x_n),    y_n = x_n

carries the nozzle onto the straight reference cylinder
(-1, 1)^(n-1) x R, which is where the mesh lives.  Profiles expose two
hand-coded derivatives so that no geometry is ever differenced numerically
inside assembly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Profile",
    "Cylinder",
    "TanhExpansion",
    "GaussianThroat",
    "NozzleMap",
    "RegularityReport",
    "verify_regularity",
    "OutsideDomainError",
]


class OutsideDomainError(ValueError):
    """Point does not belong to the nozzle (or reference cylinder)."""


class Profile:
    """Base profile: subclasses provide r, r', r'' (vectorized over x_n).

    The centerline offset defaults to zero; override the offset methods to
    model bent nozzles.  Offsets return arrays of shape x.shape + (dim-1,).
    """

    dim: int = 2
    r_minus: float = 1.0
    r_plus: float = 1.0

    def half_width(self, x):
        raise NotImplementedError

    def half_width_prime(self, x):
        raise NotImplementedError

    def half_width_second(self, x):
        raise NotImplementedError

    def offset(self, x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape + (self.dim - 1,))

    def offset_prime(self, x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape + (self.dim - 1,))

    def offset_second(self, x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape + (self.dim - 1,))

    def section_measure(self, x):
        """Cross-section measure: 2r in 2D, (2r)^2 in 3D."""
        return (2.0 * np.asarray(self.half_width(x))) ** (self.dim - 1)

    @property
    def section_measure_minus(self) -> float:
        return (2.0 * self.r_minus) ** (self.dim - 1)

    @property
    def section_measure_plus(self) -> float:
        return (2.0 * self.r_plus) ** (self.dim - 1)


@dataclass(frozen=True)
class Cylinder(Profile):
    """Straight nozzle of constant half-width r0."""

    r0: float = 0.5
    dim: int = 2

    def __post_init__(self):
        if self.r0 <= 0.0:
            raise ValueError("half-width must be positive")
        object.__setattr__(self, "r_minus", self.r0)
        object.__setattr__(self, "r_plus", self.r0)

    def half_width(self, x):
        return np.full(np.shape(np.asarray(x, dtype=float)), self.r0)

    def half_width_prime(self, x):
        return np.zeros(np.shape(np.asarray(x, dtype=float)))

    def half_width_second(self, x):
        return np.zeros(np.shape(np.asarray(x, dtype=float)))


@dataclass(frozen=True)
class TanhExpansion(Profile):
    """Monotone expansion r(x) = r- + (r+ - r-) (1 + tanh(x/l)) / 2."""

    r_in: float = 0.5
    r_out: float = 1.0
    length: float = 1.0
    dim: int = 2

    def __post_init__(self):
        if min(self.r_in, self.r_out) <= 0.0 or self.length <= 0.0:
            raise ValueError("half-widths and transition length must be positive")
        object.__setattr__(self, "r_minus", self.r_in)
        object.__setattr__(self, "r_plus", self.r_out)

    def half_width(self, x):
        x = np.asarray(x, dtype=float)
        return self.r_in + 0.5 * (self.r_out - self.r_in) * (1.0 + np.tanh(x / self.length))

    @staticmethod
    def _sech2(u):
        # Overflow-safe sech^2: 4 e^{-2|u|} / (1 + e^{-2|u|})^2.
        e = np.exp(-2.0 * np.abs(u))
        return 4.0 * e / (1.0 + e) ** 2

    def half_width_prime(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * (self.r_out - self.r_in) * self._sech2(x / self.length) / self.length

    def half_width_second(self, x):
        x = np.asarray(x, dtype=float)
        u = x / self.length
        return -(self.r_out - self.r_in) * self._sech2(u) * np.tanh(u) / self.length**2


@dataclass(frozen=True)
class GaussianThroat(Profile):
    """Locally constricted nozzle r(x) = r0 - depth * exp(-x^2 / width^2).

    depth >= r0 pinches the nozzle shut; construction is allowed so that
    verify_regularity can report the violation.
    """

    r0: float = 1.0
    depth: float = 0.3
    width: float = 1.0
    dim: int = 2

    def __post_init__(self):
        if self.r0 <= 0.0 or self.width <= 0.0 or self.depth < 0.0:
            raise ValueError("r0 and width must be positive, depth nonnegative")
        object.__setattr__(self, "r_minus", self.r0)
        object.__setattr__(self, "r_plus", self.r0)

    def half_width(self, x):
        x = np.asarray(x, dtype=float)
        return self.r0 - self.depth * np.exp(-(x / self.width) ** 2)

    def half_width_prime(self, x):
        x = np.asarray(x, dtype=float)
        return self.depth * (2.0 * x / self.width**2) * np.exp(-(x / self.width) ** 2)

    def half_width_second(self, x):
        x = np.asarray(x, dtype=float)
        e = np.exp(-(x / self.width) ** 2)
        return self.depth * (2.0 / self.width**2 - 4.0 * x**2 / self.width**4) * e


@dataclass(frozen=True)
class NozzleMap:
    """Forward/inverse map between the nozzle and the reference cylinder."""

    profile: Profile
    tol: float = 1e-12

    @property
    def dim(self) -> int:
        return self.profile.dim

    def map_forward(self, x):
        """Physical point(s) -> reference point(s); raises if outside."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        xn = x[..., -1]
        r = np.asarray(self.profile.half_width(xn))
        c = self.profile.offset(xn)
        y = np.empty_like(x)
        y[..., :-1] = (x[..., :-1] - c) / r[..., None]
        y[..., -1] = xn
        if np.any(np.abs(y[..., :-1]) > 1.0 + self.tol):
            raise OutsideDomainError("point lies outside the nozzle")
        return y[0] if single else y

    def map_inverse(self, y):
        """Reference point(s) -> physical point(s); raises if outside."""
        y = np.asarray(y, dtype=float)
        single = y.ndim == 1
        y = np.atleast_2d(y)
        if np.any(np.abs(y[..., :-1]) > 1.0 + self.tol):
            raise OutsideDomainError("point lies outside the reference cylinder")
        yn = y[..., -1]
        r = np.asarray(self.profile.half_width(yn))
        c = self.profile.offset(yn)
        x = np.empty_like(y)
        x[..., :-1] = c + r[..., None] * y[..., :-1]
        x[..., -1] = yn
        return x[0] if single else x

    def jacobian(self, y):
        """Jacobian data at reference point(s) y.

        Returns (sigma, detJ) where sigma[i, j] = d y_j / d x_i evaluated at
        the physical preimage, and detJ = r(y_n)**(dim-1) is the determinant
        of the inverse map (the volume element of the pullback).
        """
        y = np.asarray(y, dtype=float)
        single = y.ndim == 1
        y = np.atleast_2d(y)
        n = self.dim
        yn = y[..., -1]
        r = np.asarray(self.profile.half_width(yn))
        dr = np.asarray(self.profile.half_width_prime(yn))
        dc = self.profile.offset_prime(yn)
        sigma = np.zeros(y.shape[:-1] + (n, n))
        for a in range(n - 1):
            sigma[..., a, a] = 1.0 / r
            sigma[..., n - 1, a] = -(dc[..., a] + dr * y[..., a]) / r
        sigma[..., n - 1, n - 1] = 1.0
        detj = r ** (n - 1)
        if single:
            return sigma[0], float(detj[0])
        return sigma, detj

    def section_measure(self, x_n):
        return self.profile.section_measure(x_n)


@dataclass(frozen=True)
class RegularityReport:
    """Outcome of the sampled uniform-regularity check."""

    ok: bool
    k_estimate: float
    worst_station: float
    min_half_width: float
    bound: float

    def __str__(self):  # pragma: no cover - cosmetic
        status = "pass" if self.ok else "FAIL"
        return (
            f"regularity {status}: K_est = {self.k_estimate:.4g} (bound {self.bound}), "
            f"worst station {self.worst_station:.4g}, min half-width {self.min_half_width:.4g}"
        )


def verify_regularity(
    profile: Profile,
    bound: float,
    x_range: tuple[float, float] = (-30.0, 30.0),
    samples: int = 4001,
) -> RegularityReport:
    """Sample the profile and report whether the implied map bounds hold.

    The estimate collects the magnitudes that control the C2 norms of the
    forward and inverse maps: r, 1/r, the first and second derivatives of r
    and c, and the mixed first/second-derivative combinations that appear in
    the chain rule.  Violations are reported, never raised.
    """
    x = np.linspace(x_range[0], x_range[1], samples)
    r = np.asarray(profile.half_width(x), dtype=float)
    dr = np.abs(np.asarray(profile.half_width_prime(x), dtype=float))
    d2r = np.abs(np.asarray(profile.half_width_second(x), dtype=float))
    dc = np.abs(profile.offset_prime(x)).sum(axis=-1)
    d2c = np.abs(profile.offset_second(x)).sum(axis=-1)
    min_r = float(r.min())
    if min_r <= 0.0:
        return RegularityReport(False, np.inf, float(x[int(r.argmin())]), min_r, bound)
    inv_r = 1.0 / r
    first_fwd = (1.0 + dr + dc) * inv_r
    first_inv = r + dr + dc
    second_fwd = (d2r + d2c) * inv_r + 2.0 * dr * (dr + dc) * inv_r**2
    second_inv = d2r + d2c
    local = np.max(
        np.stack([r, inv_r, dr, dc, first_fwd, first_inv, second_fwd, second_inv]),
        axis=0,
    )
    worst = int(local.argmax())
    k_est = float(local[worst])
    return RegularityReport(k_est <= bound, k_est, float(x[worst]), min_r, bound)
