"""
Target payoffs g(S_T) and the volatility indices built from their prices.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Tuple

import numpy as np
import pandas as pd

from ..utils.errors import DomainError, ParseError, ValidationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Payoff:
    """
    A target payoff g with the derivative information the estimators use.

    Args:
        name: Short identifier used in reports
        func: Vectorized g
        first: g' (needed by the CM replicating portfolio)
        second: g'' (needed by the CM estimator)
        polynomial: Ascending coefficients when g is a polynomial
        breakpoints: Points where g or g' is not smooth
        exponent: n for the power family g(s) = s**n
    """

    name: str
    func: Callable[[np.ndarray], np.ndarray]
    first: Optional[Callable[[np.ndarray], np.ndarray]] = None
    second: Optional[Callable[[np.ndarray], np.ndarray]] = None
    polynomial: Optional[Tuple[float, ...]] = None
    breakpoints: Tuple[float, ...] = field(default_factory=tuple)
    exponent: Optional[float] = None

    def __call__(self, states):
        return np.asarray(self.func(np.asarray(states, dtype=float)), dtype=float)

    @property
    def smooth(self) -> bool:
        return self.second is not None


def power(n: float) -> Payoff:
    """g(s) = s**n."""
    n = float(n)
    polynomial = None
    if n >= 0 and n.is_integer():
        coefficients = [0.0] * int(n) + [1.0]
        polynomial = tuple(coefficients)
    return Payoff(
        name="square" if n == 2 else f"power:{n:g}",
        func=lambda s: s ** n,
        first=lambda s: n * s ** (n - 1.0),
        second=lambda s: n * (n - 1.0) * s ** (n - 2.0),
        polynomial=polynomial,
        exponent=n,
    )


def square() -> Payoff:
    return power(2)


def log() -> Payoff:
    return Payoff(
        name="log",
        func=np.log,
        first=lambda s: 1.0 / s,
        second=lambda s: -1.0 / s ** 2,
    )


def constant(value: float = 1.0) -> Payoff:
    value = float(value)
    return Payoff(
        name=f"constant:{value:g}",
        func=lambda s: np.full(np.shape(s), value),
        first=lambda s: np.zeros(np.shape(s)),
        second=lambda s: np.zeros(np.shape(s)),
        polynomial=(value,),
    )


def indicator(threshold: float) -> Payoff:
    """g(s) = 1{s <= x}; grid points exactly at x count as inside."""
    threshold = float(threshold)
    return Payoff(
        name=f"indicator:{threshold:g}",
        func=lambda s: (s <= threshold).astype(float),
        breakpoints=(threshold,),
    )


def call_payoff(strike: float) -> Payoff:
    strike = float(strike)
    return Payoff(
        name=f"call:{strike:g}",
        func=lambda s: np.maximum(s - strike, 0.0),
        breakpoints=(strike,),
    )


def put_payoff(strike: float) -> Payoff:
    strike = float(strike)
    return Payoff(
        name=f"put:{strike:g}",
        func=lambda s: np.maximum(strike - s, 0.0),
        breakpoints=(strike,),
    )


def from_table(path) -> Payoff:
    """Piecewise-linear payoff read from a CSV with columns x and g."""
    path = Path(path)
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ParseError(path, 1, f"cannot read payoff table: {e}")
    missing = {"x", "g"} - set(frame.columns)
    if missing:
        raise ParseError(path, 1, f"missing column(s) {', '.join(sorted(missing))}")
    for row, (x, g) in enumerate(zip(frame["x"], frame["g"]), start=2):
        if not (np.isfinite(pd.to_numeric(x, errors="coerce"))
                and np.isfinite(pd.to_numeric(g, errors="coerce"))):
            raise ParseError(path, row, f"non-numeric payoff entry ({x!r}, {g!r})")
    xs = frame["x"].to_numpy(dtype=float)
    gs = frame["g"].to_numpy(dtype=float)
    if not np.all(np.diff(xs) > 0):
        raise ParseError(path, 2, "x column must be strictly increasing")
    return Payoff(
        name=f"file:{path.name}",
        func=lambda s: np.interp(s, xs, gs),
        breakpoints=tuple(xs.tolist()),
    )


def parse_payoff(spec: str) -> Payoff:
    """
    Parse a payoff spec: ``svix``, ``vix``, ``power:n``, ``indicator:x`` or ``file:<csv>``.

    ``svix`` targets S_T**2 and ``vix`` targets log S_T; the index itself is
    formed afterwards from the estimated moment.
    """
    spec = spec.strip()
    kind, _, argument = spec.partition(":")
    kind = kind.lower()
    if kind == "svix" and not argument:
        return square()
    if kind == "vix" and not argument:
        return log()
    if kind == "file" and argument:
        return from_table(argument)
    if kind in ("power", "indicator") and argument:
        try:
            value = float(argument)
        except ValueError:
            raise ValidationError(f"Payoff {kind} needs a number, got {argument!r}")
        return power(value) if kind == "power" else indicator(value)
    raise ValidationError(
        f"Unknown payoff {spec!r}; expected svix, vix, power:n, indicator:x or file:<csv>"
    )


# ============================================================================
# VOLATILITY INDICES
# ============================================================================

def svix_squared(second_moment: float, forward: float, maturity: float) -> float:
    """SVIX^2 = (E[S_T^2]/F^2 - 1)/T, the annualized variance of S_T/F."""
    if not forward > 0 or not maturity > 0:
        raise DomainError("SVIX needs a positive forward and maturity")
    return (second_moment / forward ** 2 - 1.0) / maturity


def vix_squared(log_moment: float, spot: float, gross_rate: float, maturity: float) -> float:
    """VIX^2 = (2/T)(log R_f - (E[log S_T] - log S_t)), twice the annualized entropy."""
    if not spot > 0 or not gross_rate > 0 or not maturity > 0:
        raise DomainError("VIX needs a positive spot, gross rate and maturity")
    return 2.0 / maturity * (math.log(gross_rate) - (log_moment - math.log(spot)))


def index_from_squared(value: float) -> float:
    if value < 0:
        logger.warning(f"Negative squared index {value:.6g} floored at zero")
    return math.sqrt(max(value, 0.0))
