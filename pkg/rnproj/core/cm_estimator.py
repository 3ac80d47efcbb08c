"""
Carr-Madan benchmark estimator.

g(S_T) is replicated to second order around the forward and the option
integral is discretized with the trapezoidal rule used by the CBOE indices,
separately on the put side (K <= F) and the call side (K > F).
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from .grid_basis import DEFAULT_ASSET, StrikeSet
from .payoffs import Payoff
from .projector import MarketQuotes
from ..utils.errors import ValidationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CMWeights:
    """Strike increments per side; fallback_sides names sides that used a single-strike gap."""

    put: np.ndarray
    call: np.ndarray
    fallback_sides: Tuple[str, ...] = ()


@dataclass(frozen=True)
class CMInputs:
    g_at_forward: float
    g_prime_at_forward: float
    g_double_prime: Callable[[np.ndarray], np.ndarray]
    strikes: StrikeSet
    quotes: MarketQuotes
    asset: str = DEFAULT_ASSET

    def __post_init__(self):
        if self.strikes.n_k == 0:
            raise ValidationError("The CM estimator needs at least one strike")

    @classmethod
    def from_payoff(cls, payoff: Payoff, strikes: StrikeSet, quotes: MarketQuotes,
                    asset: str = DEFAULT_ASSET) -> "CMInputs":
        if payoff.second is None or payoff.first is None:
            raise ValidationError(f"Payoff {payoff.name} has no second derivative for CM")
        forward = np.array([strikes.forward])
        return cls(
            g_at_forward=float(payoff(forward)[0]),
            g_prime_at_forward=float(np.asarray(payoff.first(forward))[0]),
            g_double_prime=payoff.second,
            strikes=strikes,
            quotes=quotes,
            asset=asset,
        )


def _side_weights(side, others, fallback_gap, name):
    k = np.asarray(side, dtype=float)
    if k.size == 0:
        return np.zeros(0), False
    if k.size == 1:
        rest = np.asarray([s for s in others if s != k[0]], dtype=float)
        if rest.size:
            gap = float(np.min(np.abs(rest - k[0])))
        elif fallback_gap is not None:
            gap = float(fallback_gap)
        else:
            raise ValidationError(
                f"Single {name} strike {k[0]:g} with no neighbour; pass fallback_gap"
            )
        logger.warning(f"CM {name} side has one strike; using gap {gap:g}")
        return np.array([gap]), True
    weights = np.empty_like(k)
    weights[0] = k[1] - k[0]
    weights[-1] = k[-1] - k[-2]
    weights[1:-1] = (k[2:] - k[:-2]) / 2.0
    return weights, False


def cm_weights(strikes: StrikeSet, fallback_gap: Optional[float] = None) -> CMWeights:
    """
    Trapezoidal increments: interior (K_{j+1} - K_{j-1})/2, one-sided gaps at the ends.

    A side with a single strike uses the distance to the nearest other strike
    in the set, or ``fallback_gap`` when there is none.
    """
    union = strikes.strikes
    put, put_fallback = _side_weights(strikes.put_strikes, union, fallback_gap, "put")
    call, call_fallback = _side_weights(strikes.call_strikes, union, fallback_gap, "call")
    sides = tuple(name for name, used in (("put", put_fallback), ("call", call_fallback)) if used)
    return CMWeights(put=put, call=call, fallback_sides=sides)


def _side_prices(quotes, asset, strikes, lookup, what):
    prices, missing = [], []
    for k in strikes:
        value = lookup(asset, k)
        if value is None:
            missing.append(f"{k:g}")
        prices.append(value if value is not None else 0.0)
    if missing:
        raise ValidationError(f"Missing {what} quotes at strike(s) {', '.join(missing)}")
    return np.asarray(prices, dtype=float)


def cm_estimate(inputs: CMInputs, fallback_gap: Optional[float] = None) -> float:
    """g(F) + R_f sum dK g''(K) P(K) over puts + R_f sum dK g''(K) C(K) over calls."""
    strikes = inputs.strikes
    weights = cm_weights(strikes, fallback_gap)
    quotes = inputs.quotes
    puts = _side_prices(quotes, inputs.asset, strikes.put_strikes, quotes.put_price, "put")
    calls = _side_prices(quotes, inputs.asset, strikes.call_strikes, quotes.call_price, "call")

    total = inputs.g_at_forward
    if puts.size:
        curvature = np.asarray(inputs.g_double_prime(np.asarray(strikes.put_strikes)), dtype=float)
        total += quotes.gross_rate * float(np.sum(weights.put * curvature * puts))
    if calls.size:
        curvature = np.asarray(inputs.g_double_prime(np.asarray(strikes.call_strikes)), dtype=float)
        total += quotes.gross_rate * float(np.sum(weights.call * curvature * calls))
    logger.debug(f"CM estimate {total:.10g} from {strikes.n_k} strikes")
    return float(total)


def cm_replicating_payoff(inputs: CMInputs, states, fallback_gap: Optional[float] = None) -> np.ndarray:
    """
    The discretized CM portfolio evaluated on states, forward term included:
    g(F) + g'(F)(s - F) + sum dK g''(K)(K - s)+ + sum dK g''(K)(s - K)+.
    """
    s = np.asarray(states, dtype=float)
    strikes = inputs.strikes
    weights = cm_weights(strikes, fallback_gap)
    payoff = inputs.g_at_forward + inputs.g_prime_at_forward * (s - strikes.forward)
    for k, w in zip(strikes.put_strikes, weights.put):
        payoff = payoff + w * float(inputs.g_double_prime(np.array([k]))[0]) * np.maximum(k - s, 0.0)
    for k, w in zip(strikes.call_strikes, weights.call):
        payoff = payoff + w * float(inputs.g_double_prime(np.array([k]))[0]) * np.maximum(s - k, 0.0)
    return payoff
