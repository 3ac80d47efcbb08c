"""
Univariate convergence study: SVIX and VIX from finitely many strikes.

For every strike count (or strike range) the projection estimator and the
Carr-Madan sum price S_T^2 and log S_T from the same quotes, and both index
levels are compared with the model truth.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Dict, List

import numpy as np

from config import settings

from ..core.cm_estimator import CMInputs, cm_estimate
from ..core.grid_basis import BasisSet, StrikeSet, build_state_grid
from ..core.payoffs import index_from_squared, log, square, svix_squared, vix_squared
from ..core.projector import estimate_moment
from ..models.black_scholes import BSParams, bs_quotes, true_moment
from ..models.svcj import SVCJParams, svcj_simulate
from .config import ExperimentConfig, ResultTable, replication_rng, run_replications

logger = logging.getLogger(__name__)

DOMAIN_COVERAGE = 0.998
RANDOM_STRIKE_POOL = 2000


@dataclass
class UnivariateMarket:
    """Quote generator and truth for one model."""

    name: str
    spot: float
    rate: float
    maturity: float
    forward: float
    bounds: tuple
    truth: Dict[str, float]
    model: object
    metadata: Dict[str, object]

    def quantile(self, q):
        return self.model.quantile(q)

    def quotes(self, strikes: StrikeSet):
        if isinstance(self.model, BSParams):
            return bs_quotes(self.model, strikes)
        return self.model.quotes(self.rate, self.maturity, strikes)


def _truth(model, spot, rate, maturity, forward):
    second = true_moment(model, square()).value
    log_moment = true_moment(model, log()).value
    gross = math.exp(rate * maturity)
    return {
        "svix": index_from_squared(svix_squared(second, forward, maturity)),
        "vix": index_from_squared(vix_squared(log_moment, spot, gross, maturity)),
    }


def build_market(config: ExperimentConfig) -> UnivariateMarket:
    params = config.params
    spot = float(params.get("spot", 1.0))
    rate = float(params.get("rate", 0.05))
    maturity = float(params.get("maturity", 1.0))
    tail = (1.0 - DOMAIN_COVERAGE) / 2.0

    if config.model == "BS":
        model = BSParams(spot=spot, rate=rate, vol=float(params.get("vol", 0.2)), maturity=maturity)
        forward = model.forward
        metadata = {"model": "BS", "vol": model.vol}
    else:
        svcj = replace(SVCJParams.from_json(params.get("svcj_calibration")), r=rate)
        model = svcj_simulate(
            svcj, s0=spot, v0=params.get("v0"), maturity=maturity,
            n_paths=int(params.get("n_paths", 2_000_000)), n_steps=params.get("n_steps"),
            seed=config.seed,
        )
        forward = model.mean
        metadata = dict(model.metadata)
        metadata["n_paths"] = model.n_paths
        metadata["n_steps"] = model.n_steps
    bounds = (float(model.quantile(tail)), float(model.quantile(1.0 - tail)))
    return UnivariateMarket(
        name=config.model, spot=spot, rate=rate, maturity=maturity, forward=forward,
        bounds=bounds, truth=_truth(model, spot, rate, maturity, forward), model=model,
        metadata=metadata,
    )


def strike_range(market: UnivariateMarket, fraction: float):
    tail = (1.0 - fraction) / 2.0
    return float(market.quantile(tail)), float(market.quantile(1.0 - tail))


def draw_strikes(market: UnivariateMarket, n_k: int, fraction: float, design: str,
                 rng: np.random.Generator) -> StrikeSet:
    lo, hi = strike_range(market, fraction)
    if design == "equal_spaced":
        strikes = np.linspace(lo, hi, n_k)
    else:
        pool = np.linspace(lo, hi, RANDOM_STRIKE_POOL)
        strikes = np.sort(rng.choice(pool, size=n_k, replace=False))
    return StrikeSet.split(strikes.tolist(), market.forward)


def _estimates(market: UnivariateMarket, strikes: StrikeSet, grid):
    quotes = market.quotes(strikes)
    basis = BasisSet.univariate(strikes)
    gross = math.exp(market.rate * market.maturity)
    out = {}
    for estimator in ("projection", "cm"):
        if estimator == "projection":
            second = estimate_moment(square(), basis, grid, quotes).estimate
            log_moment = estimate_moment(log(), basis, grid, quotes).estimate
        else:
            second = cm_estimate(CMInputs.from_payoff(square(), strikes, quotes))
            log_moment = cm_estimate(CMInputs.from_payoff(log(), strikes, quotes))
        out[("svix", estimator)] = index_from_squared(
            svix_squared(second, market.forward, market.maturity))
        out[("vix", estimator)] = index_from_squared(
            vix_squared(log_moment, market.spot, gross, market.maturity))
    return out


def _cells(config: ExperimentConfig):
    if config.range_mode == "varying_range":
        n_k = int(config.params.get("varying_n_k", 30))
        return [(f"range={f:.2f}", n_k, f) for f in config.range_fractions]
    return [(f"n_k={n:03d}", n, config.range_fraction) for n in config.n_k]


def run_univariate_convergence(config: ExperimentConfig, threads=None) -> ResultTable:
    """
    Relative errors of SVIX and VIX for the projection and CM estimators.

    Equal spacing is deterministic, so each cell then has one replication;
    uniformly drawn strikes use n_mc replications per cell.
    """
    market = build_market(config)
    grid = build_state_grid(market.bounds, int(config.params.get("grid_points", settings.DEFAULT_GRID_POINTS)))
    cells = _cells(config)
    replications = 1 if config.strike_design == "equal_spaced" else config.n_mc
    logger.info(
        f"Univariate study: {config.model}, {config.strike_design}, {config.range_mode}, "
        f"{len(cells)} cells x {replications} replications"
    )

    def job(task) -> List[dict]:
        cell_index, replication = task
        label, n_k, fraction = cells[cell_index]
        rng = replication_rng(config.seed, cell_index, replication)
        strikes = draw_strikes(market, n_k, fraction, config.strike_design, rng)
        rows = []
        for (quantity, estimator), estimate in sorted(_estimates(market, strikes, grid).items()):
            truth = market.truth[quantity]
            rows.append({
                "cell": label, "replication": replication, "quantity": quantity,
                "estimator": estimator, "estimate": estimate, "truth": truth,
                "error": abs(estimate - truth) / truth,
            })
        return rows

    tasks = [(c, r) for c in range(len(cells)) for r in range(replications)]
    table = ResultTable("univariate_convergence", meta={"model": market.metadata, "truth": market.truth,
                                                        "domain": list(market.bounds)})
    table.extend(run_replications(job, tasks, threads))
    return table
