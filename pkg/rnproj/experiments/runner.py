"""
Study dispatch: load a configuration, run it and write the result tables.
"""

import logging
from dataclasses import replace
from pathlib import Path
from typing import Optional

from ..utils.errors import ValidationError
from .config import ExperimentConfig, ResultTable
from .fx_recovery import run_fx_recovery
from .sector import run_sector_mse
from .univariate import run_univariate_convergence

logger = logging.getLogger(__name__)

RUNNERS = {
    "univariate_convergence": run_univariate_convergence,
    "fx_recovery": run_fx_recovery,
    "sector_mse": run_sector_mse,
}


def run_study(config: ExperimentConfig, threads: Optional[int] = None) -> ResultTable:
    return RUNNERS[config.study](config, threads=threads)


def run_experiment(study: Optional[str] = None, config_path=None, seed: Optional[int] = None,
                   out_dir=None, threads: Optional[int] = None) -> Path:
    """
    Run a study and write results.csv, summary.csv and meta.json.

    Args:
        study: Study name; its shipped configuration is used when no path is given
        config_path: JSON configuration overriding the shipped one
        seed: Seed overriding the configuration
        out_dir: Output directory (the configuration's output by default)
        threads: Worker threads (RNP_THREADS by default)

    Returns:
        The output directory
    """
    if config_path is not None:
        config = ExperimentConfig.from_json(config_path)
    elif study is not None:
        config = ExperimentConfig.default(study)
    else:
        raise ValidationError("Either a study or a configuration path is required")
    if study is not None and config.study != study:
        logger.warning(f"Configuration is for {config.study}, not {study}; running {config.study}")
    if seed is not None:
        config = replace(config, seed=int(seed))
    out = Path(out_dir) if out_dir is not None else Path(config.output)

    logger.info(f"Running {config.study} with seed {config.seed} into {out}")
    table = run_study(config, threads)
    return table.write(out, config)
