"""
Black-Scholes and Garman-Kohlhagen pricing, FX premium-adjusted deltas,
lognormal terminal samples and Monte Carlo oracles.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np
from scipy import integrate, optimize
from scipy.stats import norm

from ..core.grid_basis import DEFAULT_ASSET, StrikeSet
from ..core.projector import MarketQuotes
from ..utils.errors import DomainError, NumericalError, ValidationError

logger = logging.getLogger(__name__)

SIDES = ("call", "put")


def _check_side(side):
    if side not in SIDES:
        raise ValidationError(f"Option side must be 'call' or 'put', got {side!r}")


def _black(forward, strike, sd, discount, side):
    """Undiscounted-forward Black formula times the discount factor."""
    strike = np.asarray(strike, dtype=float)
    if np.any(strike <= 0):
        raise DomainError("Strikes must be positive")
    d1 = (np.log(forward / strike) + 0.5 * sd * sd) / sd
    d2 = d1 - sd
    if side == "call":
        value = discount * (forward * norm.cdf(d1) - strike * norm.cdf(d2))
    else:
        value = discount * (strike * norm.cdf(-d2) - forward * norm.cdf(-d1))
    return value if value.ndim else float(value)


# ============================================================================
# BLACK-SCHOLES
# ============================================================================

@dataclass(frozen=True)
class BSParams:
    """Black-Scholes market: spot, continuously compounded rate, volatility, maturity in years."""

    spot: float
    rate: float
    vol: float
    maturity: float

    def __post_init__(self):
        if not self.spot > 0:
            raise DomainError(f"Spot must be positive, got {self.spot}")
        if not self.vol > 0:
            raise DomainError(f"Volatility must be positive, got {self.vol}")
        if not self.maturity > 0:
            raise DomainError(f"Maturity must be positive, got {self.maturity}")

    @property
    def gross_rate(self) -> float:
        return math.exp(self.rate * self.maturity)

    @property
    def discount(self) -> float:
        return math.exp(-self.rate * self.maturity)

    @property
    def forward(self) -> float:
        return self.spot * self.gross_rate

    @property
    def total_sd(self) -> float:
        return self.vol * math.sqrt(self.maturity)

    def quantile(self, q):
        """Quantile of the lognormal terminal price."""
        sd = self.total_sd
        return self.forward * np.exp(-0.5 * sd * sd + sd * norm.ppf(q))

    def cdf(self, x):
        sd = self.total_sd
        x = np.asarray(x, dtype=float)
        return norm.cdf((np.log(x / self.forward) + 0.5 * sd * sd) / sd)


def bs_price(params: BSParams, strike, side: str = "call"):
    """Black-Scholes price; vectorized over strike."""
    _check_side(side)
    return _black(params.forward, strike, params.total_sd, params.discount, side)


def bs_quotes(params: BSParams, strikes: StrikeSet, asset: str = DEFAULT_ASSET) -> MarketQuotes:
    """Out-of-the-money quotes at every strike of the set."""
    puts = {k: float(bs_price(params, k, "put")) for k in strikes.put_strikes}
    calls = {k: float(bs_price(params, k, "call")) for k in strikes.call_strikes}
    return MarketQuotes.univariate(params.gross_rate, params.forward, puts, calls, asset=asset)


# ============================================================================
# GARMAN-KOHLHAGEN AND FX DELTAS
# ============================================================================

@dataclass(frozen=True)
class GKParams:
    spot: float
    rate_domestic: float
    rate_foreign: float
    vol: float
    maturity: float

    def __post_init__(self):
        if not self.spot > 0:
            raise DomainError(f"Spot must be positive, got {self.spot}")
        if not self.vol > 0:
            raise DomainError(f"Volatility must be positive, got {self.vol}")
        if not self.maturity > 0:
            raise DomainError(f"Maturity must be positive, got {self.maturity}")

    @property
    def forward(self) -> float:
        return self.spot * math.exp((self.rate_domestic - self.rate_foreign) * self.maturity)

    @property
    def total_sd(self) -> float:
        return self.vol * math.sqrt(self.maturity)

    @property
    def foreign_discount(self) -> float:
        return math.exp(-self.rate_foreign * self.maturity)

    def with_vol(self, vol: float) -> "GKParams":
        return GKParams(self.spot, self.rate_domestic, self.rate_foreign, vol, self.maturity)


def gk_price(params: GKParams, strike, side: str = "call"):
    """Garman-Kohlhagen price in domestic currency per unit of foreign notional."""
    _check_side(side)
    discount = math.exp(-params.rate_domestic * params.maturity)
    return _black(params.forward, strike, params.total_sd, discount, side)


def strike_to_delta(params: GKParams, strike, side: str = "call"):
    """
    Premium-adjusted spot delta.

    call: e^{-r_f T} (K/F) N(d2); put: -e^{-r_f T} (K/F) N(-d2).
    """
    _check_side(side)
    strike = np.asarray(strike, dtype=float)
    sd = params.total_sd
    d2 = (np.log(params.forward / strike) - 0.5 * sd * sd) / sd
    scale = params.foreign_discount * strike / params.forward
    delta = scale * norm.cdf(d2) if side == "call" else -scale * norm.cdf(-d2)
    return delta if delta.ndim else float(delta)


def _call_delta_peak(params, lo, hi):
    """Strike maximizing the premium-adjusted call delta: N(d2) = phi(d2)/sd."""
    sd = params.total_sd
    forward = params.forward

    def slope(k):
        d2 = (math.log(forward / k) - 0.5 * sd * sd) / sd
        return norm.cdf(d2) - norm.pdf(d2) / sd

    if slope(lo) <= 0:
        return lo
    if slope(hi) >= 0:
        return hi
    return optimize.brentq(slope, lo, hi, xtol=1e-14 * forward, rtol=4 * np.finfo(float).eps)


def delta_to_strike(params: GKParams, delta: float, side: str = "call") -> float:
    """
    Strike whose premium-adjusted spot delta equals ``delta`` (negative for puts).

    Calls are solved on the monotone branch right of the delta-maximizing
    strike. The search bracket is [F e^{-5 sd}, F e^{5 sd}].
    """
    _check_side(side)
    forward, sd = params.forward, params.total_sd
    lo, hi = forward * math.exp(-5.0 * sd), forward * math.exp(5.0 * sd)

    if side == "call":
        peak = _call_delta_peak(params, lo, hi)
        top = strike_to_delta(params, peak, "call")
        bottom = strike_to_delta(params, hi, "call")
        if not bottom < delta < top:
            raise DomainError(
                f"Call delta {delta:g} not attainable; premium-adjusted deltas lie in "
                f"({bottom:.6g}, {top:.6g}), maximum {top:.6g} at strike {peak:.6g}"
            )
        left = peak
    else:
        top = strike_to_delta(params, lo, "put")
        bottom = strike_to_delta(params, hi, "put")
        if not bottom < delta < top:
            raise DomainError(
                f"Put delta {delta:g} not attainable; premium-adjusted deltas lie in "
                f"({bottom:.6g}, {top:.6g})"
            )
        left = lo

    try:
        return optimize.brentq(
            lambda k: strike_to_delta(params, k, side) - delta,
            left, hi, xtol=1e-14 * forward, rtol=4 * np.finfo(float).eps, maxiter=200,
        )
    except (ValueError, RuntimeError) as e:
        raise NumericalError(f"Strike search for delta {delta:g} failed: {e}")


def atm_dns_strike(params: GKParams) -> float:
    """Delta-neutral straddle strike under premium-adjusted deltas: F e^{-sd^2/2}."""
    sd = params.total_sd
    return params.forward * math.exp(-0.5 * sd * sd)


# ============================================================================
# TERMINAL SAMPLES AND MONTE CARLO ORACLES
# ============================================================================

@dataclass(frozen=True, eq=False)
class TerminalSample:
    """Simulated terminal prices with the seed record needed to reproduce them."""

    values: np.ndarray
    seed: int
    n_paths: int
    n_steps: int
    metadata: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.size == 0:
            raise ValidationError("Terminal sample is empty")
        if np.any(values <= 0):
            raise NumericalError("Terminal sample contains non-positive prices")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_sorted", np.sort(values))

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    def quantile(self, q):
        return np.quantile(self.values, q)

    def call_expectations(self, strikes) -> np.ndarray:
        """E[(S_T - K)+] for every strike, from one sorted pass."""
        ordered = self._sorted
        n = ordered.size
        suffix = np.concatenate([np.cumsum(ordered[::-1])[::-1], [0.0]])
        k = np.asarray(strikes, dtype=float)
        idx = np.searchsorted(ordered, k, side="right")
        return (suffix[idx] - k * (n - idx)) / n

    def put_expectations(self, strikes) -> np.ndarray:
        """E[(K - S_T)+] for every strike."""
        ordered = self._sorted
        n = ordered.size
        prefix = np.concatenate([[0.0], np.cumsum(ordered)])
        k = np.asarray(strikes, dtype=float)
        idx = np.searchsorted(ordered, k, side="right")
        return (k * idx - prefix[idx]) / n

    def quotes(self, rate: float, maturity: float, strikes: StrikeSet,
               asset: str = DEFAULT_ASSET) -> MarketQuotes:
        """Quotes consistent with this sample; the forward is the sample mean."""
        discount = math.exp(-rate * maturity)
        puts = discount * self.put_expectations(strikes.put_strikes)
        calls = discount * self.call_expectations(strikes.call_strikes)
        return MarketQuotes.univariate(
            1.0 / discount, strikes.forward,
            dict(zip(strikes.put_strikes, puts.tolist())),
            dict(zip(strikes.call_strikes, calls.tolist())),
            asset=asset,
        )


def _generator(seed):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def bs_terminal_sample(params: BSParams, n_paths: int, seed: int) -> TerminalSample:
    """Exact lognormal draws of S_T."""
    if n_paths < 1:
        raise ValidationError("n_paths must be at least 1")
    sd = params.total_sd
    z = _generator(seed).standard_normal(n_paths)
    values = params.forward * np.exp(-0.5 * sd * sd + sd * z)
    return TerminalSample(values=values, seed=seed, n_paths=n_paths, n_steps=1,
                          metadata={"model": "bs"})


@dataclass(frozen=True)
class MCPrice:
    price: float
    standard_error: float


def mc_price(sample: TerminalSample, rate: float, maturity: float, strike: float,
             side: str = "call") -> MCPrice:
    """Discounted sample mean of the option payoff with its standard error."""
    _check_side(side)
    s = sample.values
    payoff = np.maximum(s - strike, 0.0) if side == "call" else np.maximum(strike - s, 0.0)
    discount = math.exp(-rate * maturity)
    se = float(np.std(payoff, ddof=1) / math.sqrt(payoff.size)) if payoff.size > 1 else 0.0
    return MCPrice(price=discount * float(np.mean(payoff)), standard_error=discount * se)


@dataclass(frozen=True)
class MomentTruth:
    value: float
    standard_error: float = 0.0


def true_moment(model, g) -> MomentTruth:
    """
    E^Q[g(S_T)] under a Black-Scholes market or from a terminal sample.

    Black-Scholes uses closed forms for polynomial and power payoffs and for
    log S_T; other payoffs are integrated against the lognormal density.
    Samples return the mean with its Monte Carlo standard error.
    """
    if isinstance(model, TerminalSample):
        values = np.asarray(g(model.values), dtype=float)
        se = float(np.std(values, ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.0
        return MomentTruth(value=float(np.mean(values)), standard_error=se)
    if not isinstance(model, BSParams):
        raise ValidationError(f"Unsupported model {type(model).__name__}")

    forward, sd = model.forward, model.total_sd
    exponent = getattr(g, "exponent", None)
    polynomial = getattr(g, "polynomial", None)
    if exponent is not None:
        return MomentTruth(forward ** exponent * math.exp(0.5 * exponent * (exponent - 1.0) * sd * sd))
    if polynomial is not None:
        total = sum(c * forward ** n * math.exp(0.5 * n * (n - 1.0) * sd * sd)
                    for n, c in enumerate(polynomial))
        return MomentTruth(float(total))
    if getattr(g, "name", None) == "log":
        return MomentTruth(math.log(model.spot) + (model.rate - 0.5 * model.vol ** 2) * model.maturity)

    def integrand(z):
        return float(np.asarray(g(np.array([forward * math.exp(-0.5 * sd * sd + sd * z)])))[0]) * norm.pdf(z)

    breaks = sorted(
        (math.log(b / forward) + 0.5 * sd * sd) / sd for b in getattr(g, "breakpoints", ()) if b > 0
    )
    edges = [-12.0, *[b for b in breaks if -12.0 < b < 12.0], 12.0]
    value = sum(integrate.quad(integrand, a, b, limit=200)[0] for a, b in zip(edges[:-1], edges[1:]))
    return MomentTruth(float(value))
