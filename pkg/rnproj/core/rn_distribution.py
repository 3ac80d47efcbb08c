"""
Risk-neutral CDF and PDF from projected indicator payoffs.

For every x the indicator 1{S_T <= x} is projected on the basis in L2(A).
Only the right-hand side of the normal equations depends on x, so the
estimate collapses to F(x) = c . B(x) with density coefficients c = G^-1 p,
where p holds the basis expectations and B(x) the basis antiderivatives.
"""

import logging
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from scipy import integrate, linalg

from config import settings

from .grid_basis import (
    DEFAULT_ASSET,
    BasisSet,
    antiderivative_matrix,
    design_from_states,
    gram_analytic,
    inner_products,
)
from .projector import MarketQuotes, basis_expectations
from ..utils.errors import DomainError, SingularSystemError, ValidationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class RNDistribution:
    """Grid-sampled CDF/PDF pair of the estimated risk-neutral distribution."""

    eval_points: np.ndarray
    cdf: np.ndarray
    pdf: np.ndarray
    monotonized: bool
    basis: BasisSet
    bounds: tuple
    density_coefficients: np.ndarray

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "x": self.eval_points,
            "cdf": self.cdf,
            "pdf": self.pdf,
            "monotonized": np.full(self.eval_points.shape, self.monotonized),
        })

    def to_csv(self, path_or_buffer) -> None:
        self.to_frame().to_csv(path_or_buffer, index=False, float_format="%.12g")


def _density_coefficients(basis, bounds, quotes):
    gram = gram_analytic(basis, bounds)
    scale = 1.0 / np.sqrt(np.diag(gram))
    try:
        factor = linalg.cho_factor(gram * np.outer(scale, scale))
    except linalg.LinAlgError:
        raise SingularSystemError("Basis Gram is not positive definite", offending=basis.labels())
    p = basis_expectations(basis, quotes)
    return scale * linalg.cho_solve(factor, scale * p)


def estimate_cdf(basis: BasisSet, bounds, quotes: MarketQuotes,
                 eval_points: Optional[Sequence[float]] = None) -> RNDistribution:
    """
    Estimate the risk-neutral CDF and PDF on A = bounds.

    Args:
        basis: Univariate basis that includes the Bond
        bounds: (a_min, a_max)
        quotes: Market quotes pricing every basis element
        eval_points: Ascending points inside the bounds (uniform default)

    Returns:
        RNDistribution with the raw, possibly non-monotone, estimate
    """
    if not basis.has_bond:
        raise ValidationError("The distribution estimate needs the Bond in the basis")
    a_min, a_max = float(bounds[0]), float(bounds[1])
    if eval_points is None:
        x = np.linspace(a_min, a_max, settings.DEFAULT_EVAL_POINTS)
    else:
        x = np.asarray(eval_points, dtype=float)
        outside = x[(x < a_min) | (x > a_max)]
        if outside.size:
            raise DomainError(
                f"Evaluation point(s) {', '.join(f'{v:g}' for v in outside[:5])} "
                f"outside [{a_min:g}, {a_max:g}]"
            )
        if np.any(np.diff(x) < 0):
            raise ValidationError("Evaluation points must be ascending")

    c = _density_coefficients(basis, (a_min, a_max), quotes)
    cdf = antiderivative_matrix(basis, (a_min, a_max), x) @ c
    asset = (basis.assets() or [DEFAULT_ASSET])[0]
    pdf = design_from_states(basis, {asset: x}, x.size) @ c
    logger.info(
        f"Estimated CDF at {x.size} points on [{a_min:g}, {a_max:g}]; "
        f"range [{cdf.min():.4g}, {cdf.max():.4g}]"
    )
    return RNDistribution(
        eval_points=x, cdf=cdf, pdf=pdf, monotonized=False,
        basis=basis, bounds=(a_min, a_max), density_coefficients=c,
    )


def rearrange_monotone(dist: RNDistribution) -> RNDistribution:
    """Sort the CDF values, clip them to [0, 1] and re-derive the pdf by finite differences."""
    steps = np.diff(dist.eval_points)
    if steps.size and not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
        logger.warning("Rearranging on an irregular grid; sorting assumes equal spacing")
    cdf = np.clip(np.sort(dist.cdf), 0.0, 1.0)
    if np.array_equal(cdf, dist.cdf):
        pdf = dist.pdf
    elif dist.eval_points.size > 1:
        pdf = np.gradient(cdf, dist.eval_points)
    else:
        pdf = np.zeros_like(cdf)
    return replace(dist, cdf=cdf, pdf=pdf, monotonized=True)


def moment_from_distribution(g, dist: RNDistribution) -> float:
    """
    int_A g dF for the estimated distribution.

    The raw estimate integrates g against the piecewise-linear density
    exactly (polynomial g) or piece by piece with adaptive quadrature; a
    rearranged distribution only has grid values, so the trapezoidal rule is
    used there.
    """
    if dist.monotonized:
        logger.warning("Moment from a rearranged distribution uses the trapezoidal rule")
        values = np.asarray(g(dist.eval_points), dtype=float) * dist.pdf
        return float(integrate.trapezoid(values, dist.eval_points))
    products = inner_products(dist.basis, dist.bounds, g, getattr(g, "breakpoints", ()))
    return float(dist.density_coefficients @ products)
