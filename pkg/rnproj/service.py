"""
Estimation reports shared by the command line and the web service.

Each report resolves defaults (grid bounds, grid size, fit method), runs the
library call and returns plain JSON-ready values together with every setting
needed to reproduce the run.
"""

import logging
from dataclasses import asdict
from typing import Dict, Optional, Sequence

import numpy as np

from config import settings

from .core.cm_estimator import CMInputs, cm_estimate
from .core.grid_basis import DEFAULT_ASSET, BasisSet, StrikeSet, build_state_grid
from .core.payoffs import index_from_squared, parse_payoff, svix_squared, vix_squared
from .core.projector import FitMethod, MarketQuotes, cauchy_weights, estimate_moment
from .core.rn_distribution import RNDistribution, estimate_cdf, rearrange_monotone
from .dependence.fx import (
    FXMarket,
    JointGrid,
    build_fx_basis,
    fx_covariance,
    independent_tail_probability,
    joint_tail_probability,
)
from .utils.errors import ValidationError

logger = logging.getLogger(__name__)

BOUNDS_SCALE = (0.5, 1.5)


def default_bounds(strikes: Sequence[float]):
    """[0.5 * min strike, 1.5 * max strike]."""
    if not len(strikes):
        raise ValidationError("No strikes quoted; grid bounds cannot be defaulted")
    return BOUNDS_SCALE[0] * min(strikes), BOUNDS_SCALE[1] * max(strikes)


def quoted_strikes(quotes: MarketQuotes, asset: str = DEFAULT_ASSET) -> StrikeSet:
    puts, calls = quotes.strikes(asset)
    return StrikeSet(tuple(puts), tuple(calls), quotes.forward(asset))


def _resolve_bounds(bounds, strikes: StrikeSet):
    if bounds is None:
        return default_bounds(strikes.strikes), True
    lo, hi = (float(b) for b in bounds)
    return (lo, hi), False


def fit_method(grid, forward: float, wls_scale: Optional[float] = None, nonneg: bool = False,
               weight_floor: Optional[float] = None) -> FitMethod:
    """OLS by default; Cauchy WLS around the forward with wls_scale; constrained with nonneg/weight_floor."""
    weights = cauchy_weights(grid, forward, wls_scale) if wls_scale is not None else None
    if nonneg or weight_floor is not None:
        return FitMethod.constrained(payoff_nonneg=nonneg, weight_floor=weight_floor, weights=weights)
    if weights is not None:
        return FitMethod.wls(weights)
    return FitMethod.ols()


def _index_value(kind, moment, quotes, info):
    maturity = info.get("maturity")
    if kind == "svix" and maturity:
        return index_from_squared(svix_squared(moment, quotes.forward(), maturity))
    if kind == "vix" and maturity and info.get("spot"):
        return index_from_squared(vix_squared(moment, info["spot"], quotes.gross_rate, maturity))
    return None


def moment_report(payoff_spec: str, quotes: MarketQuotes, info: Optional[Dict] = None,
                  bounds=None, grid_points: Optional[int] = None, wls_scale: Optional[float] = None,
                  nonneg: bool = False, weight_floor: Optional[float] = None) -> Dict[str, object]:
    """
    Projection estimate of E[g(S_T)] from univariate quotes.

    Args:
        payoff_spec: svix, vix, power:n, indicator:x or file:<csv>
        quotes: Univariate market quotes
        info: Optional spot and maturity, used to report SVIX/VIX levels
        bounds: Grid bounds (0.5 min K, 1.5 max K by default)
        grid_points: Uniform grid size (RNP_GRID_POINTS by default)
        wls_scale: Cauchy scale for weighted least squares
        nonneg: Constrain the fitted payoff to be nonnegative
        weight_floor: Lower bound -c on every portfolio weight

    Returns:
        dict with estimate, portfolio, diagnostics and config
    """
    info = dict(info or {})
    payoff = parse_payoff(payoff_spec)
    strikes = quoted_strikes(quotes)
    bounds, defaulted = _resolve_bounds(bounds, strikes)
    grid_points = int(grid_points or settings.DEFAULT_GRID_POINTS)
    grid = build_state_grid(bounds, grid_points)
    method = fit_method(grid, strikes.forward, wls_scale, nonneg, weight_floor)

    result = estimate_moment(payoff, BasisSet.univariate(strikes), grid, quotes, method)
    kind = payoff_spec.strip().partition(":")[0].lower()
    report = {
        "estimate": result.estimate,
        "payoff": payoff.name,
        "portfolio": result.portfolio.as_dict(),
        "diagnostics": asdict(result.portfolio.diagnostics),
        "config": {
            "payoff": payoff_spec,
            "bounds": list(bounds),
            "bounds_defaulted": defaulted,
            "grid_points": grid_points,
            "method": method.describe(),
            "wls_scale": wls_scale,
            "gross_rate": quotes.gross_rate,
            "forward": strikes.forward,
            "n_strikes": strikes.n_k,
            **info,
        },
    }
    if payoff.smooth:
        report["cm_estimate"] = cm_estimate(CMInputs.from_payoff(payoff, strikes, quotes))
    index = _index_value(kind, result.estimate, quotes, info)
    if index is not None:
        report["index"] = index
    return report


def distribution_report(quotes: MarketQuotes, bounds=None, eval_points: Optional[int] = None,
                        rearrange: bool = False) -> RNDistribution:
    """Risk-neutral CDF/PDF on a uniform evaluation grid inside the bounds."""
    strikes = quoted_strikes(quotes)
    bounds, defaulted = _resolve_bounds(bounds, strikes)
    n = int(eval_points or settings.DEFAULT_EVAL_POINTS)
    if n < 2:
        raise ValidationError(f"Need at least two evaluation points, got {n}")
    dist = estimate_cdf(BasisSet.univariate(strikes), bounds, quotes, np.linspace(bounds[0], bounds[1], n))
    if defaulted:
        logger.info(f"Distribution bounds defaulted to [{bounds[0]:g}, {bounds[1]:g}]")
    return rearrange_monotone(dist) if rearrange else dist


def fx_report(market: FXMarket, bounds1=None, bounds2=None, grid_points: Optional[int] = None,
              q1: Optional[float] = None, q2: Optional[float] = None) -> Dict[str, object]:
    """
    Covariance, correlation and joint left-tail probability of the two dollar legs.

    Tail thresholds default to the lowest quoted strike of each leg.
    """
    strikes1, strikes2 = sorted(market.calls1), sorted(market.calls2)
    basis = build_fx_basis(strikes1, strikes2, sorted(market.cross_calls))
    bounds1 = tuple(bounds1) if bounds1 is not None else default_bounds(strikes1)
    bounds2 = tuple(bounds2) if bounds2 is not None else default_bounds(strikes2)
    grid_points = int(grid_points or settings.DEFAULT_JOINT_GRID_POINTS)
    grids = JointGrid.between(bounds1, bounds2, grid_points)
    q1 = float(q1) if q1 is not None else strikes1[0]
    q2 = float(q2) if q2 is not None else strikes2[0]

    dependence = fx_covariance(market, basis, grids)
    joint = joint_tail_probability(market, basis, grids, q1, q2)
    independent = independent_tail_probability(market, basis, grids, q1, q2)
    return {
        "cov": dependence.cov,
        "corr": dependence.corr,
        "var1": dependence.var1,
        "var2": dependence.var2,
        "debug": dict(dependence.debug),
        "tail": {
            "q1": q1,
            "q2": q2,
            "joint": joint.probability,
            "joint_raw": joint.raw,
            "independent": independent.probability,
        },
        "config": {
            "bounds1": list(bounds1),
            "bounds2": list(bounds2),
            "grid_points": grid_points,
            "n_strikes": [len(strikes1), len(strikes2), len(market.cross_calls)],
        },
    }
