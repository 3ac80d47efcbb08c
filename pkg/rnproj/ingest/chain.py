"""
Option chain cleaning.

Raw bid/ask rows are grouped by (date, expiry). In each group only
out-of-the-money options survive (puts K <= F, calls K > F), zero-bid quotes
are dropped, and scanning outward from the forward, two consecutive zero
bids cut off every strike further out. Prices are bid/ask midpoints.
"""

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..core.projector import MarketQuotes
from ..utils.errors import ParseError, ValidationError

logger = logging.getLogger(__name__)

REQUIRED_COLUMNS = ("date", "expiry", "strike", "side", "bid", "ask", "underlying")
COLUMNS = REQUIRED_COLUMNS + ("forward",)


@dataclass(frozen=True)
class RawChainRow:
    date: str
    expiry: str
    strike: float
    side: str
    bid: float
    ask: float
    underlying: float
    forward: Optional[float] = None

    def __post_init__(self):
        if self.side not in ("call", "put"):
            raise ValidationError(f"Option side must be 'call' or 'put', got {self.side!r}")
        for name in ("strike", "bid", "ask", "underlying"):
            if not np.isfinite(getattr(self, name)):
                raise ValidationError(f"{name.capitalize()} must be a finite number, got {getattr(self, name)}")
        if not self.strike > 0:
            raise ValidationError(f"Strike must be positive, got {self.strike}")
        if self.bid < 0 or self.bid > self.ask:
            raise ValidationError(f"Need 0 <= bid <= ask, got bid {self.bid}, ask {self.ask}")

    @property
    def mid(self) -> float:
        return 0.5 * (self.bid + self.ask)


@dataclass(frozen=True)
class CleanChain:
    """Surviving rows of one (date, expiry) group with their forward."""

    date: str
    expiry: str
    forward: float
    rows: Tuple[RawChainRow, ...]
    gross_rate: Optional[float] = None

    @property
    def puts(self) -> Dict[float, float]:
        return {r.strike: r.mid for r in self.rows if r.side == "put"}

    @property
    def calls(self) -> Dict[float, float]:
        return {r.strike: r.mid for r in self.rows if r.side == "call"}

    def to_quotes(self, gross_rate: Optional[float] = None) -> MarketQuotes:
        rate = gross_rate if gross_rate is not None else self.gross_rate
        if rate is None:
            raise ValidationError(f"No gross rate for the {self.date} / {self.expiry} chain")
        return MarketQuotes.univariate(rate, self.forward, self.puts, self.calls)


# ============================================================================
# READING
# ============================================================================

def _optional_float(value):
    if value is None or (isinstance(value, float) and np.isnan(value)) or value == "":
        return None
    return float(value)


def read_chain_csv(path) -> List[RawChainRow]:
    """Parse a raw chain CSV; errors carry the offending line number."""
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype={"date": str, "expiry": str, "side": str})
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ParseError(path, 1, f"cannot read option chain: {e}")
    missing = [c for c in REQUIRED_COLUMNS if c not in frame.columns]
    if missing:
        raise ParseError(path, 1, f"missing column(s) {', '.join(missing)}")

    rows = []
    for index, record in enumerate(frame.to_dict("records")):
        try:
            rows.append(RawChainRow(
                date=str(record["date"]),
                expiry=str(record["expiry"]),
                strike=float(record["strike"]),
                side=str(record["side"]).strip().lower(),
                bid=float(record["bid"]),
                ask=float(record["ask"]),
                underlying=float(record["underlying"]),
                forward=_optional_float(record.get("forward")),
            ))
        except (TypeError, ValueError) as e:
            raise ParseError(path, index + 2, str(e))
    logger.info(f"Read {len(rows)} chain rows from {path}")
    return rows


def write_chain_csv(chains: Dict[Tuple[str, str], CleanChain], path_or_buffer) -> None:
    """Write cleaned rows with the forward column always filled."""
    records = []
    for key in sorted(chains):
        chain = chains[key]
        for row in sorted(chain.rows, key=lambda r: (r.side, r.strike)):
            record = {c: getattr(row, c) for c in REQUIRED_COLUMNS}
            record["forward"] = chain.forward
            record["price"] = row.mid
            records.append(record)
    pd.DataFrame(records, columns=list(COLUMNS) + ["price"]).to_csv(
        path_or_buffer, index=False, float_format="%.12g")


# ============================================================================
# CLEANING
# ============================================================================

def _group(rows: Sequence[RawChainRow]):
    groups: Dict[Tuple[str, str], List[RawChainRow]] = {}
    for row in rows:
        groups.setdefault((row.date, row.expiry), []).append(row)
    return groups


def _parity_forward(rows, gross_rate, key):
    calls = {r.strike: r.mid for r in rows if r.side == "call"}
    puts = {r.strike: r.mid for r in rows if r.side == "put"}
    common = sorted(set(calls) & set(puts))
    if gross_rate is None or not common:
        raise ValidationError(
            f"No forward derivable for {key[0]} / {key[1]}: add a forward column "
            "or quote a put and call at a common strike together with a gross rate"
        )
    strike = min(common, key=lambda k: abs(calls[k] - puts[k]))
    return strike + gross_rate * (calls[strike] - puts[strike])


def _group_forward(rows, gross_rate, key):
    forwards = {r.forward for r in rows if r.forward is not None}
    if len(forwards) > 1:
        raise ValidationError(f"Conflicting forwards for {key[0]} / {key[1]}: {sorted(forwards)}")
    if forwards:
        return forwards.pop()
    return _parity_forward(rows, gross_rate, key)


def _scan_outward(rows):
    """Rows ordered away from the forward; drop zero bids, stop after two in a row."""
    kept, zeros = [], 0
    for row in rows:
        if row.bid == 0:
            zeros += 1
            if zeros == 2:
                break
            continue
        zeros = 0
        kept.append(row)
    return kept


def clean_chain(rows: Sequence[RawChainRow],
                gross_rate: Optional[float] = None) -> Dict[Tuple[str, str], CleanChain]:
    """
    Clean raw rows of one underlying.

    Args:
        rows: Raw chain rows
        gross_rate: R_f used only when a forward must come from put-call parity

    Returns:
        Mapping (date, expiry) -> CleanChain
    """
    cleaned = {}
    for key, group in sorted(_group(rows).items()):
        forward = _group_forward(group, gross_rate, key)
        calls = sorted((r for r in group if r.side == "call" and r.strike > forward), key=lambda r: r.strike)
        puts = sorted((r for r in group if r.side == "put" and r.strike <= forward),
                      key=lambda r: r.strike, reverse=True)
        kept = _scan_outward(puts)[::-1] + _scan_outward(calls)
        dropped = len(group) - len(kept)
        if dropped:
            logger.info(f"{key[0]} / {key[1]}: kept {len(kept)} of {len(group)} quotes (F={forward:.6g})")
        cleaned[key] = CleanChain(
            date=key[0], expiry=key[1], forward=forward,
            rows=tuple(replace(r, forward=forward) for r in kept),
            gross_rate=gross_rate,
        )
    return cleaned


def check_parity(rows: Sequence[RawChainRow], forward: float, gross_rate: float) -> pd.DataFrame:
    """
    Put-call parity deviations C - P - (F - K)/R_f at strikes quoted on both sides.

    Run on raw rows, before out-of-the-money filtering removes one side.
    """
    calls = {r.strike: r.mid for r in rows if r.side == "call"}
    puts = {r.strike: r.mid for r in rows if r.side == "put"}
    common = sorted(set(calls) & set(puts))
    deviations = [calls[k] - puts[k] - (forward - k) / gross_rate for k in common]
    if deviations:
        worst = max(deviations, key=abs)
        logger.info(f"Parity check on {len(common)} strikes; largest deviation {worst:.6g}")
    return pd.DataFrame({
        "strike": common,
        "call": [calls[k] for k in common],
        "put": [puts[k] for k in common],
        "deviation": deviations,
    })
