"""
Simulated two-currency FX market with bivariate normal dollar rates.

S1 and S2 are jointly normal; the nonlinear variant replaces S2 by
c (S2 + a S1^3) with c chosen to keep the mean of S2. Option quotes, moments
and tail probabilities are integrals of the conditional normal law of S2
given S1, so the market is exact up to quadrature error.
"""

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate
from scipy.special import roots_hermitenorm
from scipy.stats import norm

from ..utils.errors import DomainError

logger = logging.getLogger(__name__)

_HERMITE_NODES, _HERMITE_WEIGHTS = roots_hermitenorm(64)
_HERMITE_WEIGHTS = _HERMITE_WEIGHTS / math.sqrt(2.0 * math.pi)
SPAN = 10.0


def _normal_call(mean, sd, strike=0.0):
    """E[(X - strike)+] for X ~ N(mean, sd^2), sd may be zero."""
    mean = np.asarray(mean, dtype=float) - strike
    sd = np.asarray(sd, dtype=float)
    safe = np.where(sd > 0, sd, 1.0)
    z = mean / safe
    value = mean * norm.cdf(z) + safe * norm.pdf(z)
    return np.where(sd > 0, value, np.maximum(mean, 0.0))


@dataclass(frozen=True)
class JointNormalFX:
    """
    Terminal dollar rates (S1, S2) under the dollar risk-neutral measure.

    Args:
        mu: Means (mu1, mu2), which are also the forwards
        sigma: Standard deviations
        rho: Correlation of the underlying normals
        cubic: a in S2 -> c (S2 + a S1^3); zero gives the plain normal design
    """

    mu: Sequence[float] = (1.0, 1.0)
    sigma: Sequence[float] = (0.1, 0.05)
    rho: float = 0.0
    cubic: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "mu", tuple(float(m) for m in self.mu))
        object.__setattr__(self, "sigma", tuple(float(s) for s in self.sigma))
        if min(self.sigma) <= 0:
            raise DomainError("Standard deviations must be positive")
        if abs(self.rho) > 1:
            raise DomainError(f"Correlation must lie in [-1, 1], got {self.rho}")

    # -- conditional law -----------------------------------------------------

    @property
    def scale(self) -> float:
        m1, s1 = self.mu[0], self.sigma[0]
        cube_mean = m1 ** 3 + 3.0 * m1 * s1 ** 2
        return self.mu[1] / (self.mu[1] + self.cubic * cube_mean)

    def conditional(self, s1):
        """Mean and standard deviation of S2 given S1 = s1."""
        m1, m2 = self.mu
        sd1, sd2 = self.sigma
        c = self.scale
        s1 = np.asarray(s1, dtype=float)
        mean = c * (m2 + self.rho * sd2 / sd1 * (s1 - m1) + self.cubic * s1 ** 3)
        sd = c * sd2 * math.sqrt(max(1.0 - self.rho ** 2, 0.0))
        return mean, np.full(s1.shape, sd)

    def _integrate_s1(self, func, upper=None):
        """int func(s1) phi(s1) ds1 over the S1 law (optionally up to ``upper``)."""
        m1, sd1 = self.mu[0], self.sigma[0]
        lo = m1 - SPAN * sd1
        hi = m1 + SPAN * sd1 if upper is None else min(upper, m1 + SPAN * sd1)
        if hi <= lo:
            return np.zeros_like(np.asarray(func(np.array(m1)), dtype=float))

        def integrand(s1):
            return np.asarray(func(np.asarray(s1)), dtype=float) * norm.pdf(s1, m1, sd1)

        value, _ = integrate.quad_vec(integrand, lo, hi, epsabs=1e-12, epsrel=1e-10, limit=400)
        return value

    # -- moments --------------------------------------------------------------

    def expectation(self, func) -> float:
        """E[func(S1, S2)] by Gauss-Hermite quadrature; exact for polynomials of modest degree."""
        m1, sd1 = self.mu[0], self.sigma[0]
        s1 = m1 + sd1 * _HERMITE_NODES
        mean, sd = self.conditional(s1)
        s2 = mean[:, np.newaxis] + sd[:, np.newaxis] * _HERMITE_NODES[np.newaxis, :]
        values = func(s1[:, np.newaxis], s2)
        return float(_HERMITE_WEIGHTS @ values @ _HERMITE_WEIGHTS)

    def forwards(self):
        return self.mu[0], self.expectation(lambda a, b: b + 0.0 * a)

    def covariance(self) -> float:
        f1, f2 = self.forwards()
        return self.expectation(lambda a, b: (a - f1) * (b - f2))

    def variances(self):
        f1, f2 = self.forwards()
        return (self.expectation(lambda a, b: (a - f1) ** 2 + 0.0 * b),
                self.expectation(lambda a, b: (b - f2) ** 2 + 0.0 * a))

    def correlation(self) -> float:
        v1, v2 = self.variances()
        return self.covariance() / math.sqrt(v1 * v2)

    def tail_probability(self, q1: float, q2: float) -> float:
        """P(S1 <= q1, S2 <= q2)."""
        def conditional_cdf(s1):
            mean, sd = self.conditional(s1)
            return norm.cdf((q2 - mean) / sd) if sd.flat[0] > 0 else (mean <= q2).astype(float)
        return float(self._integrate_s1(conditional_cdf, upper=q1))

    # -- marginals ---------------------------------------------------------

    def cdf1(self, x):
        return norm.cdf(np.asarray(x, dtype=float), self.mu[0], self.sigma[0])

    def cdf2(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.cubic == 0.0:
            mean, sd = self.mu[1], self.sigma[1]
            return norm.cdf(x, mean, sd)

        def conditional_cdf(s1):
            mean, sd = self.conditional(np.atleast_1d(s1))
            return norm.cdf((x[np.newaxis, :] - mean[:, np.newaxis]) / sd[:, np.newaxis]).ravel() \
                if sd[0] > 0 else (mean[:, np.newaxis] <= x[np.newaxis, :]).astype(float).ravel()
        return self._integrate_s1(conditional_cdf)

    def cdf_ratio(self, x):
        """P(S1/S2 <= k) = P(S1 - k S2 <= 0), S2 taken positive."""
        k = np.atleast_1d(np.asarray(x, dtype=float))

        def conditional(s1):
            s1 = float(np.asarray(s1))
            mean, sd = self.conditional(np.array([s1]))
            # S1 <= k S2  <=>  S2 >= s1 / k
            thresholds = s1 / k
            if sd[0] > 0:
                return norm.sf((thresholds - mean[0]) / sd[0])
            return (mean[0] >= thresholds).astype(float)
        return self._integrate_s1(conditional)

    def _quantiles(self, cdf, centre, spread, probabilities):
        xs = np.linspace(centre - 8.0 * spread, centre + 8.0 * spread, 1601)
        values = np.maximum.accumulate(np.asarray(cdf(xs), dtype=float))
        return np.interp(probabilities, values, xs)

    def quantiles1(self, probabilities):
        return norm.ppf(np.asarray(probabilities, dtype=float), self.mu[0], self.sigma[0])

    def quantiles2(self, probabilities):
        if self.cubic == 0.0:
            return norm.ppf(np.asarray(probabilities, dtype=float), self.mu[1], self.sigma[1])
        _, f2 = self.forwards()
        _, v2 = self.variances()
        return self._quantiles(self.cdf2, f2, math.sqrt(v2), probabilities)

    def quantiles_ratio(self, probabilities):
        f1, f2 = self.forwards()
        centre = f1 / f2
        spread = math.sqrt(self.expectation(lambda a, b: (a / b - centre) ** 2))
        return self._quantiles(self.cdf_ratio, centre, spread, probabilities)

    # -- option expectations (undiscounted, in dollars) -----------------------

    def call1_expectations(self, strikes):
        k = np.asarray(strikes, dtype=float)
        return _normal_call(self.mu[0], self.sigma[0], k)

    def call2_expectations(self, strikes):
        k = np.atleast_1d(np.asarray(strikes, dtype=float))
        if self.cubic == 0.0:
            return _normal_call(self.mu[1], self.sigma[1], k)

        def conditional(s1):
            mean, sd = self.conditional(np.array([float(np.asarray(s1))]))
            return _normal_call(mean[0], sd[0], k)
        return self._integrate_s1(conditional)

    def cross_expectations(self, strikes):
        """E[S2 (S1/S2 - K)+] = E[(S1 - K S2)+] for every strike."""
        k = np.atleast_1d(np.asarray(strikes, dtype=float))
        if self.cubic == 0.0:
            m1, m2 = self.mu
            sd1, sd2 = self.sigma
            mean = m1 - k * m2
            var = sd1 ** 2 + k ** 2 * sd2 ** 2 - 2.0 * k * self.rho * sd1 * sd2
            return _normal_call(mean, np.sqrt(np.maximum(var, 0.0)))

        def conditional(s1):
            s1 = float(np.asarray(s1))
            mean, sd = self.conditional(np.array([s1]))
            return _normal_call(s1 - k * mean[0], k * sd[0])
        return self._integrate_s1(conditional)
