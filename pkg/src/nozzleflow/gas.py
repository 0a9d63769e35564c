"""Polytropic gas law, the density-speed relation, and its subsonic surrogate.

All quantities are nondimensionalized by the critical (sonic) state: the
sonic speed is 1, the density at sonic speed is 1, and the momentum density
``rho(q^2) * q`` attains its maximum value 1 exactly at q = 1.  Flow is
subsonic iff q < 1 iff rho > 1.  Downstream modules work with the squared
speed ``t = q**2`` throughout.

The surrogate density keeps the flow equation uniformly elliptic for every
speed: it equals the physical density below ``t = 1 - 2*delta0``, is constant
above ``t = 1 - delta0``, and bridges the band in between.  The bridge is
built in momentum space: the slope of the truncated momentum j(q) on the band
is interpolated by a polynomial that is positive by construction, which is
exactly the strict-ellipticity requirement (the linearized coefficient matrix
has eigenvalues ``theta`` and ``theta + 2*theta'*t = dj/dq``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "GasLaw",
    "DensityRelation",
    "TruncatedDensity",
    "EnergyDensity",
    "InfeasibleFluxError",
    "TruncationError",
]


class InfeasibleFluxError(ValueError):
    """Momentum density at or above the subsonic maximum (choked branch)."""


class TruncationError(RuntimeError):
    """Surrogate construction failed to stay uniformly elliptic."""


# Slot layout of the kernel parameter pack shared with the assembly kernels.
GAMMA, A_, B_, E1, EG, E2 = 0, 1, 2, 3, 4, 5
TA, TB, QA, QB, W = 6, 7, 8, 9, 10
KEXP, MEXP, C6, G0, G1 = 11, 12, 13, 14, 15
JQA, RHOB, FA, FB = 16, 17, 18, 19
NPARAMS = 20


@dataclass(frozen=True)
class GasLaw:
    """Polytropic pressure law p(rho) = rho**gamma / gamma, gamma > 1."""

    gamma: float = 1.4

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise ValueError(f"adiabatic exponent must exceed 1, got {self.gamma}")

    def pressure(self, rho):
        return np.asarray(rho, dtype=float) ** self.gamma / self.gamma

    def pressure_prime(self, rho):
        return np.asarray(rho, dtype=float) ** (self.gamma - 1.0)

    def pressure_second(self, rho):
        return (self.gamma - 1.0) * np.asarray(rho, dtype=float) ** (self.gamma - 2.0)

    def sound_speed(self, rho):
        """Local sound speed sqrt(p'(rho))."""
        return np.sqrt(self.pressure_prime(rho))


def _scalarize(arg, out):
    if np.ndim(arg) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class DensityRelation:
    """Density as a function of squared speed along an isoenergetic flow.

    With the critical normalization the closed form is
    ``rho(t) = (A - B*t)**(1/(gamma-1))`` with A = (gamma+1)/2 and
    B = (gamma-1)/2, valid up to the vacuum limit t = A/B.
    """

    gas: GasLaw = GasLaw()

    @property
    def gamma(self) -> float:
        return self.gas.gamma

    @property
    def vacuum_q2(self) -> float:
        """Squared speed at which the density reaches zero."""
        return (self.gamma + 1.0) / (self.gamma - 1.0)

    def _check_q2(self, q2):
        q2 = np.asarray(q2, dtype=float)
        if np.any(q2 < 0.0) or np.any(q2 >= self.vacuum_q2):
            raise ValueError(
                f"squared speed must lie in [0, {self.vacuum_q2}) (vacuum bound)"
            )
        return q2

    def density(self, q2):
        q2a = self._check_q2(q2)
        g = self.gamma
        a, b = 0.5 * (g + 1.0), 0.5 * (g - 1.0)
        return _scalarize(q2, (a - b * q2a) ** (1.0 / (g - 1.0)))

    def density_prime(self, q2):
        """d(rho)/d(q^2); equals -1/2 * (A - B q^2)**((2-gamma)/(gamma-1))."""
        q2a = self._check_q2(q2)
        g = self.gamma
        a, b = 0.5 * (g + 1.0), 0.5 * (g - 1.0)
        return _scalarize(q2, -0.5 * (a - b * q2a) ** ((2.0 - g) / (g - 1.0)))

    def enthalpy(self, rho):
        """Specific enthalpy h(rho) = integral_1^rho p'(s)/s ds, h(1) = 0."""
        rhoa = np.asarray(rho, dtype=float)
        if np.any(rhoa <= 0.0):
            raise ValueError("density must be positive")
        g = self.gamma
        return _scalarize(rho, (rhoa ** (g - 1.0) - 1.0) / (g - 1.0))

    def sound_speed_sq(self, q2):
        """c^2 along the flow as a function of squared speed: A - B q^2."""
        q2a = self._check_q2(q2)
        g = self.gamma
        return _scalarize(q2, 0.5 * (g + 1.0) - 0.5 * (g - 1.0) * q2a)

    def mach(self, q):
        qa = np.asarray(q, dtype=float)
        return _scalarize(q, qa / np.sqrt(self.sound_speed_sq(qa * qa)))

    def momentum(self, q):
        """Momentum density j(q) = rho(q^2) * q; j(1) = 1 is the maximum."""
        qa = np.asarray(q, dtype=float)
        return _scalarize(q, self.density(qa * qa) * qa)

    def solve_q_from_flux(self, j: float, tol: float = 1e-12) -> float:
        """Unique subsonic speed with rho(q^2) q = j, by bisection on [0, 1].

        Raises InfeasibleFluxError for j >= 1 (the momentum density cannot
        exceed its sonic maximum).
        """
        if j < 0.0:
            raise InfeasibleFluxError(f"momentum density must be nonnegative, got {j}")
        if j >= 1.0:
            raise InfeasibleFluxError(
                f"momentum density {j} is not attainable subsonically (max 1 at q = 1)"
            )
        if j == 0.0:
            return 0.0
        lo, hi = 0.0, 1.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            res = self.momentum(mid) - j
            if abs(res) < tol:
                return mid
            if res < 0.0:
                lo = mid
            else:
                hi = mid
            if hi - lo <= np.finfo(float).eps * max(1.0, hi):
                break
        return 0.5 * (lo + hi)


def _blend_slope(u, P):
    """dj/dq across the band, in band coordinate u in [0, 1]. Positive."""
    return (
        P[G0] * (1.0 - u) ** P[KEXP]
        + P[G1] * u ** P[MEXP]
        + P[C6] * u * (1.0 - u)
    )


def _blend_integral(u, P):
    """Integral of the blend slope from 0 to u."""
    k, m = P[KEXP], P[MEXP]
    return (
        P[G0] * (1.0 - (1.0 - u) ** (k + 1.0)) / (k + 1.0)
        + P[G1] * u ** (m + 1.0) / (m + 1.0)
        + P[C6] * (0.5 * u**2 - u**3 / 3.0)
    )


def _blend_integral2(u, P):
    """Double integral of the blend slope from 0 to u."""
    k, m = P[KEXP], P[MEXP]
    return (
        P[G0] * (u - (1.0 - (1.0 - u) ** (k + 2.0)) / (k + 2.0)) / (k + 1.0)
        + P[G1] * u ** (m + 2.0) / ((m + 1.0) * (m + 2.0))
        + P[C6] * (u**3 / 6.0 - u**4 / 12.0)
    )


def truncated_density_array(t, P):
    """Vectorized surrogate density theta(t); t is squared speed."""
    t = np.asarray(t, dtype=float)
    t_rho = np.minimum(t, P[TA])
    rho = (P[A_] - P[B_] * t_rho) ** P[E1]
    q = np.sqrt(np.clip(t, P[TA], P[TB]))
    u = np.clip((q - P[QA]) / P[W], 0.0, 1.0)
    band = (P[JQA] + P[W] * _blend_integral(u, P)) / q
    return np.where(t <= P[TA], rho, np.where(t >= P[TB], P[RHOB], band))


def truncated_density_prime_array(t, P):
    """Vectorized d(theta)/dt."""
    t = np.asarray(t, dtype=float)
    t_rho = np.minimum(t, P[TA])
    low = -0.5 * (P[A_] - P[B_] * t_rho) ** P[E2]
    q = np.sqrt(np.clip(t, P[TA], P[TB]))
    u = np.clip((q - P[QA]) / P[W], 0.0, 1.0)
    j = P[JQA] + P[W] * _blend_integral(u, P)
    band = (q * _blend_slope(u, P) - j) / (2.0 * q**3)
    return np.where(t <= P[TA], low, np.where(t >= P[TB], 0.0, band))


def energy_density_array(t, P):
    """Vectorized energy density F(t) = 1/2 * integral_0^t theta(s) ds."""
    t = np.asarray(t, dtype=float)
    t_rho = np.minimum(t, P[TA])
    low = (P[A_] ** P[EG] - (P[A_] - P[B_] * t_rho) ** P[EG]) / P[GAMMA]
    q = np.sqrt(np.clip(t, P[TA], P[TB]))
    u = np.clip((q - P[QA]) / P[W], 0.0, 1.0)
    band = P[FA] + P[JQA] * (q - P[QA]) + P[W] ** 2 * _blend_integral2(u, P)
    high = P[FB] + 0.5 * P[RHOB] * (np.maximum(t, P[TB]) - P[TB])
    return np.where(t <= P[TA], low, np.where(t >= P[TB], high, band))


@dataclass(frozen=True)
class TruncatedDensity:
    """Uniformly elliptic surrogate of the density-speed relation.

    Agrees with the physical density for ``t <= 1 - 2*delta0``, is the
    constant ``rho(1 - delta0)`` for ``t >= 1 - delta0``, and bridges the band
    with a C1, nonincreasing profile whose momentum slope
    ``theta + 2*theta'*t`` stays strictly positive.
    """

    base: DensityRelation
    delta0: float = 0.05

    def __post_init__(self):
        if not 0.0 < self.delta0 < 0.25:
            raise ValueError(f"delta0 must lie in (0, 1/4), got {self.delta0}")
        g = self.base.gamma
        a_coef, b_coef = 0.5 * (g + 1.0), 0.5 * (g - 1.0)
        ta = 1.0 - 2.0 * self.delta0
        tb = 1.0 - self.delta0
        qa, qb = math.sqrt(ta), math.sqrt(tb)
        w = qb - qa
        rho_a = (a_coef - b_coef * ta) ** (1.0 / (g - 1.0))
        rho_b = (a_coef - b_coef * tb) ** (1.0 / (g - 1.0))
        drho_a = -0.5 * (a_coef - b_coef * ta) ** ((2.0 - g) / (g - 1.0))
        g0 = rho_a + 2.0 * ta * drho_a  # dj/dq entering the band
        g1 = rho_b                      # plateau slope d/dq [rho_b * q]
        j_qa = rho_a * qa
        mean = (rho_b * qb - j_qa) / w  # required mean slope across the band
        # Tail exponents keep each endpoint attachment below mean/4 so the
        # bump coefficient (and with it min dj/dq) stays strictly positive.
        kexp = max(3, math.ceil(4.0 * g0 / mean - 1.0))
        mexp = max(3, math.ceil(4.0 * g1 / mean - 1.0))
        c = mean - g0 / (kexp + 1.0) - g1 / (mexp + 1.0)
        if c <= 0.0:
            raise TruncationError("band blend lost positivity; delta0 too extreme")
        fa = (a_coef ** (g / (g - 1.0)) - (a_coef - b_coef * ta) ** (g / (g - 1.0))) / g
        params = np.empty(NPARAMS)
        params[GAMMA], params[A_], params[B_] = g, a_coef, b_coef
        params[E1] = 1.0 / (g - 1.0)
        params[EG] = g / (g - 1.0)
        params[E2] = (2.0 - g) / (g - 1.0)
        params[TA], params[TB], params[QA], params[QB], params[W] = ta, tb, qa, qb, w
        params[KEXP], params[MEXP], params[C6] = float(kexp), float(mexp), 6.0 * c
        params[G0], params[G1], params[JQA], params[RHOB] = g0, g1, j_qa, rho_b
        params[FA] = fa
        params[FB] = fa + j_qa * w + w**2 * _blend_integral2(1.0, params)
        object.__setattr__(self, "_params", params)
        # Guard the construction: the blend must keep dj/dq positive and
        # theta nonincreasing across the whole band.
        u = np.linspace(0.0, 1.0, 2049)
        if _blend_slope(u, params).min() <= 0.0:
            raise TruncationError("band blend slope is not strictly positive")
        tband = np.linspace(ta, tb, 2049)
        if truncated_density_prime_array(tband, params).max() > 1e-14:
            raise TruncationError("surrogate density is not nonincreasing")

    @property
    def certified_q2(self) -> float:
        """Largest squared speed at which the surrogate equals the density."""
        return 1.0 - 2.0 * self.delta0

    def kernel_params(self) -> np.ndarray:
        """Parameter pack consumed by the assembly kernels."""
        return self._params

    def theta(self, s2):
        return _scalarize(s2, truncated_density_array(s2, self._params))

    def theta_prime(self, s2):
        return _scalarize(s2, truncated_density_prime_array(s2, self._params))

    def energy(self, q2):
        return _scalarize(q2, energy_density_array(q2, self._params))

    def ellipticity_bounds(self, samples: int = 100_000, s2_max: float = 4.0):
        """Extremal eigenvalue bounds of the linearized coefficient matrix.

        Samples min/max of {theta, theta + 2 theta' s^2} densely on
        [0, s2_max].  A nonpositive lower bound signals a broken blend and
        raises TruncationError.
        """
        t = np.linspace(0.0, s2_max, samples)
        th = truncated_density_array(t, self._params)
        dj = th + 2.0 * truncated_density_prime_array(t, self._params) * t
        lam = float(min(th.min(), dj.min()))
        big = float(max(th.max(), dj.max()))
        if lam <= 0.0:
            raise TruncationError(
                f"ellipticity lost: lambda = {lam} for delta0 = {self.delta0}"
            )
        return lam, big


@dataclass(frozen=True)
class EnergyDensity:
    """Antiderivative pair (F, F' = theta/2) of the surrogate density."""

    theta: TruncatedDensity

    def value(self, q2):
        return self.theta.energy(q2)

    def derivative(self, q2):
        return _scalarize(q2, 0.5 * truncated_density_array(q2, self.theta._params))

    __call__ = value
