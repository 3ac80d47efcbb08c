"""
Dependence between two dollar exchange rates.

S1 (EUR/USD) and S2 (GBP/USD) are linked through the cross rate
S3 = S1/S2 (EUR/GBP). A pound-quoted call on S3 pays S2 (S1/S2 - K)+ dollars,
so adding cross calls to the per-leg option basis makes the covariance of
the two dollar rates identifiable from option quotes alone.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Mapping, Sequence

import numpy as np

from config import settings

from ..core.grid_basis import (
    BasisSet,
    Bond,
    Call,
    CrossCall,
    StateGrid,
    Underlying,
    build_state_grid,
    eval_design,
    tensor_states,
)
from ..core.payoffs import Payoff, indicator
from ..core.projector import CrossQuotes, MarketQuotes, basis_expectations, estimate_moment, fit
from ..utils.errors import DomainError, ValidationError

logger = logging.getLogger(__name__)

ASSETS = ("S1", "S2")


# ============================================================================
# MARKET
# ============================================================================

def _table(prices, what):
    table = {}
    for strike, value in (prices or {}).items():
        try:
            table[float(strike)] = float(value)
        except (TypeError, ValueError):
            raise ValidationError(f"{what}: non-numeric entry {strike!r}: {value!r}")
    return table


@dataclass(frozen=True)
class FXMarket:
    """
    Spot rates, gross rates and call quotes for the two dollar legs and the cross.

    Args:
        spot1: EUR/USD spot
        spot2: GBP/USD spot
        gross_usd, gross_gbp, gross_eur: Gross risk-free returns to maturity
        calls1, calls2: strike -> dollar call price on S1 and S2
        cross_calls: strike -> pound call price on S1/S2
    """

    spot1: float
    spot2: float
    gross_usd: float
    gross_gbp: float
    gross_eur: float
    calls1: Mapping[float, float] = field(default_factory=dict)
    calls2: Mapping[float, float] = field(default_factory=dict)
    cross_calls: Mapping[float, float] = field(default_factory=dict)

    def __post_init__(self):
        for name in ("spot1", "spot2", "gross_usd", "gross_gbp", "gross_eur"):
            value = float(getattr(self, name))
            if not value > 0:
                raise ValidationError(f"FX market {name} must be positive, got {value}")
            object.__setattr__(self, name, value)
        object.__setattr__(self, "calls1", _table(self.calls1, "calls1"))
        object.__setattr__(self, "calls2", _table(self.calls2, "calls2"))
        object.__setattr__(self, "cross_calls", _table(self.cross_calls, "cross_calls"))

    @property
    def forward1(self) -> float:
        return self.spot1 * self.gross_usd / self.gross_eur

    @property
    def forward2(self) -> float:
        return self.spot2 * self.gross_usd / self.gross_gbp

    @property
    def cross_spot(self) -> float:
        return self.spot1 / self.spot2

    @property
    def cross_forward(self) -> float:
        """EUR/GBP forward, F1/F2 by triangular parity."""
        return self.cross_spot * self.gross_gbp / self.gross_eur

    def to_quotes(self) -> MarketQuotes:
        return MarketQuotes(
            gross_rate=self.gross_usd,
            forwards={"S1": self.forward1, "S2": self.forward2},
            call_prices={"S1": dict(self.calls1), "S2": dict(self.calls2)},
            cross_call_prices={("S1", "S2"): CrossQuotes(dict(self.cross_calls), self.gross_gbp, self.spot2)},
        )

    @classmethod
    def from_dict(cls, data: Mapping) -> "FXMarket":
        if not isinstance(data, Mapping):
            raise ValidationError("FX market must be a JSON object")
        required = ("spot1", "spot2", "gross_usd", "gross_gbp", "gross_eur")
        missing = [k for k in required if k not in data]
        if missing:
            raise ValidationError(f"FX market is missing {', '.join(missing)}")
        return cls(
            **{k: data[k] for k in required},
            calls1=data.get("calls1", {}),
            calls2=data.get("calls2", {}),
            cross_calls=data.get("cross_calls", {}),
        )

    def to_dict(self) -> Dict[str, object]:
        return {
            "spot1": self.spot1, "spot2": self.spot2,
            "gross_usd": self.gross_usd, "gross_gbp": self.gross_gbp, "gross_eur": self.gross_eur,
            "calls1": {f"{k:.12g}": v for k, v in self.calls1.items()},
            "calls2": {f"{k:.12g}": v for k, v in self.calls2.items()},
            "cross_calls": {f"{k:.12g}": v for k, v in self.cross_calls.items()},
        }


def market_from_model(model, strikes1: Sequence[float], strikes2: Sequence[float],
                      strikes_cross: Sequence[float], gross_usd: float = 1.0,
                      gross_gbp: float = 1.0, gross_eur: float = 1.0) -> FXMarket:
    """
    Quotes implied by a joint model of the terminal dollar rates.

    ``model`` provides forwards() and undiscounted dollar expectations
    call1_expectations, call2_expectations and cross_expectations, the last
    one of S2 (S1/S2 - K)+.
    """
    f1, f2 = model.forwards()
    spot1 = f1 * gross_eur / gross_usd
    spot2 = f2 * gross_gbp / gross_usd
    calls1 = np.atleast_1d(model.call1_expectations(strikes1)) / gross_usd
    calls2 = np.atleast_1d(model.call2_expectations(strikes2)) / gross_usd
    cross = (np.atleast_1d(model.cross_expectations(strikes_cross)) / (gross_usd * spot2)
             if len(strikes_cross) else [])
    return FXMarket(
        spot1=spot1, spot2=spot2,
        gross_usd=gross_usd, gross_gbp=gross_gbp, gross_eur=gross_eur,
        calls1=dict(zip(map(float, strikes1), map(float, calls1))),
        calls2=dict(zip(map(float, strikes2), map(float, calls2))),
        cross_calls=dict(zip(map(float, strikes_cross), map(float, cross))),
    )


# ============================================================================
# GRIDS AND BASIS
# ============================================================================

@dataclass(frozen=True, eq=False)
class JointGrid:
    """Per-leg grids; states are the tensor product with S1 outer and S2 inner."""

    grid1: StateGrid
    grid2: StateGrid

    @classmethod
    def between(cls, bounds1, bounds2, n_s: int = None) -> "JointGrid":
        n_s = n_s or settings.DEFAULT_JOINT_GRID_POINTS
        return cls(build_state_grid(bounds1, n_s), build_state_grid(bounds2, n_s))

    def as_mapping(self) -> Dict[str, StateGrid]:
        return {"S1": self.grid1, "S2": self.grid2}

    def states(self):
        states, _ = tensor_states(self.as_mapping(), list(ASSETS))
        return states["S1"], states["S2"]


def _check_leg(strikes, name, allow_empty=False):
    values = [float(k) for k in strikes]
    if not values and not allow_empty:
        raise ValidationError(f"{name} strike list is empty")
    if len(set(values)) != len(values):
        raise ValidationError(f"Duplicate strikes in {name}")
    return sorted(values)


def build_fx_basis(strikes1: Sequence[float], strikes2: Sequence[float],
                   strikes_cross: Sequence[float]) -> BasisSet:
    """[Bond, Underlying(S1), calls on S1, Underlying(S2), calls on S2, cross calls]."""
    leg1 = _check_leg(strikes1, "S1")
    leg2 = _check_leg(strikes2, "S2")
    cross = _check_leg(strikes_cross, "S1/S2", allow_empty=True)
    elements = [Bond(), Underlying("S1")]
    elements += [Call("S1", k) for k in leg1]
    elements.append(Underlying("S2"))
    elements += [Call("S2", k) for k in leg2]
    elements += [CrossCall("S1", "S2", k) for k in cross]
    return BasisSet(tuple(elements))


def _leg_basis(basis: BasisSet, asset: str) -> BasisSet:
    calls = [e for e in basis if isinstance(e, Call) and e.asset == asset]
    return BasisSet((Bond(), Underlying(asset), *calls))


# ============================================================================
# ESTIMATES
# ============================================================================

@dataclass(frozen=True)
class FXDependence:
    cov: float
    corr: float
    var1: float
    var2: float
    debug: Dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class TailEstimate:
    """Projected probability clipped to [0, 1]; raw is the pre-clip value."""

    probability: float
    raw: float


def price_fx_basis_expectations(market: FXMarket, basis: BasisSet) -> np.ndarray:
    """Dollar expectations of the FX basis: 1, F_i, R_f C_i(K) and R_f S2 C^GBP(K)."""
    return basis_expectations(basis, market.to_quotes())


def _forward_factor_expectations(market: FXMarket, basis: BasisSet, expectations):
    alternative = expectations.copy()
    for j, element in enumerate(basis):
        if isinstance(element, CrossCall):
            price = market.cross_calls.get(element.strike)
            if price is None:
                price = expectations[j] / (market.gross_usd * market.spot2)
            alternative[j] = market.forward2 * market.gross_gbp * price
    return alternative


def _centred_square(forward):
    return Payoff(
        name="centred_square",
        func=lambda s: (s - forward) ** 2,
        polynomial=(forward ** 2, -2.0 * forward, 1.0),
    )


def leg_variance(market: FXMarket, basis: BasisSet, grid: StateGrid, asset: str) -> float:
    """Var(S_i) from projecting (S_i - F_i)^2 on the leg's own bond, underlying and calls."""
    quotes = market.to_quotes()
    forward = quotes.forward(asset)
    return estimate_moment(_centred_square(forward), _leg_basis(basis, asset), grid, quotes).estimate


def fx_covariance(market: FXMarket, basis: BasisSet, grids: JointGrid) -> FXDependence:
    """
    Project (S1 - F1)(S2 - F2) on the FX basis over the joint grid and price it.

    The correlation divides by per-leg standard deviations, each estimated by
    a univariate projection.
    """
    if not any(isinstance(e, CrossCall) for e in basis):
        logger.warning("FX basis has no cross calls; the covariance estimate is forced to zero")
    quotes = market.to_quotes()
    f1, f2 = quotes.forward("S1"), quotes.forward("S2")
    s1, s2 = grids.states()
    portfolio = fit(eval_design(basis, grids.as_mapping()), (s1 - f1) * (s2 - f2))
    expectations = price_fx_basis_expectations(market, basis)
    cov = float(expectations @ portfolio.coefficients)
    cov_forward = float(_forward_factor_expectations(market, basis, expectations) @ portfolio.coefficients)

    var1 = leg_variance(market, basis, grids.grid1, "S1")
    var2 = leg_variance(market, basis, grids.grid2, "S2")
    if var1 <= 0 or var2 <= 0:
        raise DomainError(f"Projected leg variance is not positive ({var1:.3g}, {var2:.3g})")
    corr = cov / math.sqrt(var1 * var2)
    logger.info(f"FX covariance {cov:.6g}, correlation {corr:.4f} from {len(basis)} basis elements")
    return FXDependence(
        cov=cov, corr=corr, var1=var1, var2=var2,
        debug={
            "cov_spot_factor": cov,
            "cov_forward_factor": cov_forward,
            "residual_l2": portfolio.diagnostics.l2_residual,
        },
    )


def _check_threshold(q, grid, name):
    lo, hi = grid.bounds
    if not lo <= q <= hi:
        raise DomainError(f"Threshold {name}={q:g} outside the grid [{lo:g}, {hi:g}]")


def _clipped(raw, what):
    probability = min(max(raw, 0.0), 1.0)
    if probability != raw:
        logger.warning(f"{what} {raw:.6g} clipped to {probability:g}")
    return TailEstimate(probability=probability, raw=raw)


def joint_tail_probability(market: FXMarket, basis: BasisSet, grids: JointGrid,
                           q1: float, q2: float) -> TailEstimate:
    """Projected P(S1 <= q1, S2 <= q2); grid points exactly at a threshold count as inside."""
    _check_threshold(q1, grids.grid1, "q1")
    _check_threshold(q2, grids.grid2, "q2")
    s1, s2 = grids.states()
    target = ((s1 <= q1) & (s2 <= q2)).astype(float)
    portfolio = fit(eval_design(basis, grids.as_mapping()), target)
    raw = float(price_fx_basis_expectations(market, basis) @ portfolio.coefficients)
    return _clipped(raw, "Joint tail probability")


def independent_tail_probability(market: FXMarket, basis: BasisSet, grids: JointGrid,
                                 q1: float, q2: float) -> TailEstimate:
    """Product of the two marginal projection estimates, the independence benchmark."""
    _check_threshold(q1, grids.grid1, "q1")
    _check_threshold(q2, grids.grid2, "q2")
    quotes = market.to_quotes()
    p1 = estimate_moment(indicator(q1), _leg_basis(basis, "S1"), grids.grid1, quotes).estimate
    p2 = estimate_moment(indicator(q2), _leg_basis(basis, "S2"), grids.grid2, quotes).estimate
    p1, p2 = min(max(p1, 0.0), 1.0), min(max(p2, 0.0), 1.0)
    return _clipped(p1 * p2, "Independent tail probability")
