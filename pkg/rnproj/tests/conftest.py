"""
Shared fixtures: a Black-Scholes market with an out-of-the-money strike menu
and a simulated two-currency FX market.
"""

import os

import numpy as np
import pytest

from rnproj.core.grid_basis import BasisSet, StrikeSet
from rnproj.dependence.fx import market_from_model
from rnproj.models.black_scholes import BSParams, bs_quotes
from rnproj.models.joint_normal import JointNormalFX


def pytest_collection_modifyitems(config, items):
    if os.environ.get("RNP_RUN_SLOW") == "1":
        return
    skip = pytest.mark.skip(reason="long simulation run; set RNP_RUN_SLOW=1")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def bs_params():
    return BSParams(spot=100.0, rate=0.05, vol=0.2, maturity=1.0)


@pytest.fixture
def bs_strikes(bs_params):
    return StrikeSet.split(np.linspace(60.0, 160.0, 21), bs_params.forward)


@pytest.fixture
def bs_market(bs_params, bs_strikes):
    return bs_quotes(bs_params, bs_strikes)


@pytest.fixture
def bs_basis(bs_strikes):
    return BasisSet.univariate(bs_strikes)


@pytest.fixture
def bs_quote_dict(bs_params, bs_market):
    """The BS market as a JSON quote document."""
    puts, calls = bs_market.strikes()
    return {
        "gross_rate": bs_market.gross_rate,
        "forward": bs_market.forward(),
        "spot": bs_params.spot,
        "maturity": bs_params.maturity,
        "puts": {f"{k:.12g}": bs_market.put_price("S", k) for k in puts},
        "calls": {f"{k:.12g}": bs_market.call_price("S", k) for k in calls},
    }


@pytest.fixture
def fx_model():
    return JointNormalFX(mu=(1.0, 1.0), sigma=(0.1, 0.05), rho=0.5)


@pytest.fixture
def fx_strikes(fx_model):
    probabilities = np.linspace(0.05, 0.95, 5)
    return (
        fx_model.quantiles1(probabilities),
        fx_model.quantiles2(probabilities),
        fx_model.quantiles_ratio(probabilities),
    )


@pytest.fixture
def fx_market(fx_model, fx_strikes):
    return market_from_model(fx_model, *fx_strikes)


@pytest.fixture
def fx_bounds(fx_model):
    edges = np.array([0.02, 0.98])
    return tuple(fx_model.quantiles1(edges)), tuple(fx_model.quantiles2(edges))
