"""
FX dependence recovery.

Each draw picks a correlation uniformly in (-1, 1), prices calls on both
dollar legs and on the cross exactly under the joint model, and compares
projected correlation and joint left-tail probability with the truth.
"""

import logging
from typing import List

import numpy as np

from config import settings

from ..dependence.fx import (
    JointGrid,
    build_fx_basis,
    fx_covariance,
    independent_tail_probability,
    joint_tail_probability,
    market_from_model,
)
from ..models.joint_normal import JointNormalFX
from ..utils.errors import ValidationError
from .config import ExperimentConfig, ResultTable, replication_rng, run_replications

logger = logging.getLogger(__name__)

DESIGNS = {"normal": 0.0, "nonlinear": 0.1}


def _spaced(quantiles, lo, hi, n):
    return np.asarray(quantiles(np.linspace(lo, hi, n)), dtype=float)


def fx_draw(model: JointNormalFX, n_strikes: int = 5, strike_range=(0.05, 0.95),
            grid_range=(0.02, 0.98), grid_points: int = None, threshold: float = 0.95):
    """
    Estimates and truths for one joint model.

    Returns:
        dict with true/estimated correlation and tail probability plus the
        independence benchmark
    """
    grid_points = grid_points or settings.DEFAULT_JOINT_GRID_POINTS
    strikes1 = _spaced(model.quantiles1, *strike_range, n_strikes)
    strikes2 = _spaced(model.quantiles2, *strike_range, n_strikes)
    strikes_cross = _spaced(model.quantiles_ratio, *strike_range, n_strikes)
    bounds1 = tuple(float(q) for q in model.quantiles1(np.array(grid_range)))
    bounds2 = tuple(float(q) for q in model.quantiles2(np.array(grid_range)))

    market = market_from_model(model, strikes1, strikes2, strikes_cross)
    basis = build_fx_basis(strikes1, strikes2, strikes_cross)
    grids = JointGrid.between(bounds1, bounds2, grid_points)
    dependence = fx_covariance(market, basis, grids)
    tail = joint_tail_probability(market, basis, grids, threshold, threshold)
    independent = independent_tail_probability(market, basis, grids, threshold, threshold)
    return {
        "corr_true": model.correlation(),
        "corr_est": dependence.corr,
        "tail_true": model.tail_probability(threshold, threshold),
        "tail_est": tail.probability,
        "tail_independent": independent.probability,
    }


def run_fx_recovery(config: ExperimentConfig, threads=None) -> ResultTable:
    params = config.params
    designs = list(params.get("designs", DESIGNS))
    unknown = [d for d in designs if d not in DESIGNS]
    if unknown:
        raise ValidationError(f"Unknown FX design(s) {', '.join(unknown)}; expected normal or nonlinear")
    cubics = {"normal": 0.0, "nonlinear": float(params.get("cubic", DESIGNS["nonlinear"]))}
    mu = tuple(params.get("mu", (1.0, 1.0)))
    sigma = tuple(params.get("sigma", (0.1, 0.05)))
    threshold = float(params.get("threshold", 0.95))
    options = {
        "n_strikes": int(params.get("n_strikes", 5)),
        "strike_range": tuple(params.get("strike_range", (0.05, 0.95))),
        "grid_range": tuple(params.get("grid_range", (0.02, 0.98))),
        "grid_points": int(params.get("grid_points", settings.DEFAULT_JOINT_GRID_POINTS)),
        "threshold": threshold,
    }
    logger.info(f"FX study: designs {designs}, {config.n_mc} draws each")

    def job(task) -> List[dict]:
        cell_index, replication = task
        design = designs[cell_index]
        rng = replication_rng(config.seed, cell_index, replication)
        rho = float(rng.uniform(-1.0, 1.0))
        model = JointNormalFX(mu=mu, sigma=sigma, rho=rho, cubic=cubics[design])
        draw = fx_draw(model, **options)
        base = {"cell": design, "replication": replication}
        return [
            {**base, "quantity": "corr", "estimator": "projection", "estimate": draw["corr_est"],
             "truth": draw["corr_true"], "error": abs(draw["corr_est"] - draw["corr_true"])},
            {**base, "quantity": "tail", "estimator": "projection", "estimate": draw["tail_est"],
             "truth": draw["tail_true"], "error": abs(draw["tail_est"] - draw["tail_true"])},
            {**base, "quantity": "tail", "estimator": "independence", "estimate": draw["tail_independent"],
             "truth": draw["tail_true"], "error": abs(draw["tail_independent"] - draw["tail_true"])},
        ]

    tasks = [(c, r) for c in range(len(designs)) for r in range(config.n_mc)]
    table = ResultTable("fx_recovery", meta={"fx": {"mu": mu, "sigma": sigma, **options}})
    table.extend(run_replications(job, tasks, threads))
    return table
