"""
Quote and market files used by the command line and the web service.
"""

import json
import logging
from pathlib import Path
from typing import Dict, Optional, Tuple

from ..core.projector import MarketQuotes
from ..dependence.fx import FXMarket
from ..utils.errors import ParseError, ValidationError
from .chain import clean_chain, read_chain_csv

logger = logging.getLogger(__name__)


def _read_json(path):
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ParseError(path, e.lineno, e.msg)
    except OSError as e:
        raise ParseError(path, 0, str(e))


def _strike_table(data, name):
    table = data.get(name, {})
    if isinstance(table, list):
        try:
            return {float(k): float(p) for k, p in table}
        except (TypeError, ValueError):
            raise ValidationError(f"{name} must be a list of [strike, price] pairs")
    try:
        return {float(k): float(p) for k, p in table.items()}
    except (AttributeError, TypeError, ValueError):
        raise ValidationError(f"{name} must map strikes to prices")


def quotes_from_dict(data) -> Tuple[MarketQuotes, Dict[str, Optional[float]]]:
    """
    Univariate quotes from a mapping with gross_rate, forward, puts and calls;
    spot and maturity are optional and returned in the info mapping.
    """
    if not isinstance(data, dict):
        raise ValidationError("Quote data must be a JSON object")
    missing = [k for k in ("gross_rate", "forward") if k not in data]
    if missing:
        raise ValidationError(f"Quote data is missing {', '.join(missing)}")
    quotes = MarketQuotes.univariate(
        float(data["gross_rate"]), float(data["forward"]),
        _strike_table(data, "puts"), _strike_table(data, "calls"),
    )
    info = {
        "spot": float(data["spot"]) if data.get("spot") is not None else None,
        "maturity": float(data["maturity"]) if data.get("maturity") is not None else None,
    }
    return quotes, info


def load_quotes_json(path) -> Tuple[MarketQuotes, Dict[str, Optional[float]]]:
    data = _read_json(path)
    try:
        return quotes_from_dict(data)
    except ValidationError as e:
        raise ParseError(path, 1, str(e))


def load_quotes_csv(path, gross_rate: float, date: Optional[str] = None,
                    expiry: Optional[str] = None) -> MarketQuotes:
    """Quotes from a (raw or cleaned) chain CSV; picks the only group unless date/expiry are given."""
    chains = clean_chain(read_chain_csv(path), gross_rate)
    if date is not None or expiry is not None:
        chains = {k: c for k, c in chains.items()
                  if (date is None or k[0] == date) and (expiry is None or k[1] == expiry)}
    if len(chains) != 1:
        raise ValidationError(
            f"{path} holds {len(chains)} matching (date, expiry) groups; select one with date/expiry"
        )
    return next(iter(chains.values())).to_quotes(gross_rate)


def load_quotes(path, gross_rate: Optional[float] = None):
    """JSON quote file, or a chain CSV together with a gross rate."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        if gross_rate is None:
            raise ValidationError("A chain CSV needs --gross-rate")
        return load_quotes_csv(path, gross_rate), {"spot": None, "maturity": None}
    return load_quotes_json(path)


def load_fx_market_json(path) -> FXMarket:
    data = _read_json(path)
    try:
        return FXMarket.from_dict(data)
    except ValidationError as e:
        raise ParseError(path, 1, str(e))
