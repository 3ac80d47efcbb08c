"""
FX smile pillars to option quotes.

Dealers quote a smile as ATM delta-neutral volatility plus 10- and 25-delta
risk reversals and butterflies. The wing vols follow
    vol_call = ATM + BF + RR/2,  vol_put = ATM + BF - RR/2
and strikes come from premium-adjusted spot deltas under Garman-Kohlhagen.
"""

import logging
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import List

import pandas as pd

from ..models.black_scholes import GKParams, atm_dns_strike, delta_to_strike, gk_price
from ..utils.errors import ParseError, ValidationError

logger = logging.getLogger(__name__)

TENOR_UNITS = {"D": 1.0 / 365.0, "W": 7.0 / 365.0, "M": 1.0 / 12.0, "Y": 1.0}
PILLAR_COLUMNS = ("date", "tenor", "pair", "atm_vol", "rr_10", "rr_25", "bf_10", "bf_25",
                  "spot", "domestic_rate", "foreign_rate")


@dataclass(frozen=True)
class FXPillarRow:
    """One smile quote; vols and deposit rates are decimals, rates simple per annum."""

    date: str
    tenor: str
    pair: str
    atm_vol: float
    rr_10: float
    rr_25: float
    bf_10: float
    bf_25: float
    spot: float
    domestic_rate: float
    foreign_rate: float

    def __post_init__(self):
        if not self.atm_vol > 0:
            raise ValidationError(f"ATM vol must be positive for {self.pair} {self.tenor}")
        if not self.spot > 0:
            raise ValidationError(f"Spot must be positive for {self.pair} {self.tenor}")
        tenor_to_years(self.tenor)

    @property
    def maturity(self) -> float:
        return tenor_to_years(self.tenor)


@dataclass(frozen=True)
class SmileQuote:
    label: str
    delta: float
    vol: float
    strike: float
    call_price: float
    put_price: float


def tenor_to_years(tenor: str) -> float:
    """'1W' -> 7/365, '3M' -> 0.25, '1Y' -> 1."""
    match = re.fullmatch(r"\s*(\d+)\s*([DWMY])\s*", str(tenor).upper())
    if not match:
        raise ValidationError(f"Unrecognized tenor {tenor!r}")
    return int(match.group(1)) * TENOR_UNITS[match.group(2)]


def _continuous(simple_rate: float, maturity: float) -> float:
    gross = 1.0 + simple_rate * maturity
    if not gross > 0:
        raise ValidationError(f"Deposit rate {simple_rate} gives a non-positive gross return")
    return math.log(gross) / maturity


def gk_params(pillar: FXPillarRow, vol: float) -> GKParams:
    maturity = pillar.maturity
    return GKParams(
        spot=pillar.spot,
        rate_domestic=_continuous(pillar.domestic_rate, maturity),
        rate_foreign=_continuous(pillar.foreign_rate, maturity),
        vol=vol,
        maturity=maturity,
    )


def smile_vols(pillar: FXPillarRow):
    """(put 10, put 25, ATM, call 25, call 10) volatilities."""
    atm = pillar.atm_vol
    vols = (
        atm + pillar.bf_10 - pillar.rr_10 / 2.0,
        atm + pillar.bf_25 - pillar.rr_25 / 2.0,
        atm,
        atm + pillar.bf_25 + pillar.rr_25 / 2.0,
        atm + pillar.bf_10 + pillar.rr_10 / 2.0,
    )
    bad = [v for v in vols if not v > 0]
    if bad:
        raise ValidationError(f"Smile for {pillar.pair} {pillar.tenor} implies non-positive vols {bad}")
    return vols


def expand_fx_smile(pillar: FXPillarRow) -> List[SmileQuote]:
    """
    Five quotes ordered by strike: 10D put, 25D put, ATM, 25D call, 10D call.

    Each wing strike solves the premium-adjusted delta at its own vol; the
    ATM strike is the delta-neutral straddle strike. Prices are GK prices
    in the domestic currency.
    """
    vols = smile_vols(pillar)
    specs = (("10P", -0.10, "put"), ("25P", -0.25, "put"), ("ATM", None, None),
             ("25C", 0.25, "call"), ("10C", 0.10, "call"))
    quotes = []
    for (label, delta, side), vol in zip(specs, vols):
        params = gk_params(pillar, vol)
        strike = atm_dns_strike(params) if side is None else delta_to_strike(params, delta, side)
        quotes.append(SmileQuote(
            label=label,
            delta=0.0 if delta is None else delta,
            vol=vol,
            strike=float(strike),
            call_price=float(gk_price(params, strike, "call")),
            put_price=float(gk_price(params, strike, "put")),
        ))
    strikes = [q.strike for q in quotes]
    if any(b <= a for a, b in zip(strikes, strikes[1:])):
        raise ValidationError(
            f"Smile strikes for {pillar.pair} {pillar.tenor} are not increasing: "
            + ", ".join(f"{q.label}={q.strike:.6g}" for q in quotes)
        )
    logger.debug(f"{pillar.pair} {pillar.tenor}: strikes " + ", ".join(f"{s:.6g}" for s in strikes))
    return quotes


def read_fx_pillars_csv(path) -> List[FXPillarRow]:
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype={"date": str, "tenor": str, "pair": str})
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ParseError(path, 1, f"cannot read FX pillars: {e}")
    missing = [c for c in PILLAR_COLUMNS if c not in frame.columns]
    if missing:
        raise ParseError(path, 1, f"missing column(s) {', '.join(missing)}")
    rows = []
    for index, record in enumerate(frame.to_dict("records")):
        try:
            rows.append(FXPillarRow(
                date=str(record["date"]), tenor=str(record["tenor"]), pair=str(record["pair"]),
                **{c: float(record[c]) for c in PILLAR_COLUMNS[3:]},
            ))
        except (TypeError, ValueError) as e:
            raise ParseError(path, index + 2, str(e))
    return rows
