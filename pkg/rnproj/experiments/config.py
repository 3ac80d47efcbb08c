"""
Experiment configuration, seeding and result tables.

Every replication draws from its own Philox stream keyed by (cell, replication)
so results do not depend on thread scheduling, and rows are sorted before
they are written.
"""

import json
import logging
import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import scipy

from config import settings

from .. import __version__
from ..utils.errors import ParseError, ValidationError

logger = logging.getLogger(__name__)

STUDIES = ("univariate_convergence", "fx_recovery", "sector_mse")
MODELS = ("BS", "SVCJ")
STRIKE_DESIGNS = ("equal_spaced", "uniform_random")
RANGE_MODES = ("fixed_fraction", "varying_range")
RESULT_COLUMNS = ("study", "cell", "replication", "quantity", "estimator", "estimate", "truth", "error")
FLOAT_FORMAT = "%.12g"


@dataclass
class ExperimentConfig:
    """
    One study run.

    n_k and the range settings apply to the univariate study; params carries
    study-specific values (model constants, grid sizes, oracle sample sizes).
    """

    study: str
    model: str = "BS"
    strike_design: str = "equal_spaced"
    n_k: Tuple[int, ...] = tuple(range(10, 140, 10))
    range_mode: str = "fixed_fraction"
    range_fraction: float = 0.9
    range_fractions: Tuple[float, ...] = (0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99)
    n_mc: int = 500
    seed: int = 0
    output: str = "results"
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.n_k = tuple(int(n) for n in self.n_k)
        self.range_fractions = tuple(float(f) for f in self.range_fractions)
        if self.study not in STUDIES:
            raise ValidationError(f"Unknown study {self.study!r}; expected one of {', '.join(STUDIES)}")
        if self.model not in MODELS:
            raise ValidationError(f"Unknown model {self.model!r}; expected BS or SVCJ")
        if self.strike_design not in STRIKE_DESIGNS:
            raise ValidationError(f"Unknown strike design {self.strike_design!r}")
        if self.range_mode not in RANGE_MODES:
            raise ValidationError(f"Unknown range mode {self.range_mode!r}")
        if self.n_mc < 1:
            raise ValidationError(f"n_mc must be at least 1, got {self.n_mc}")
        if not self.n_k or min(self.n_k) < 3:
            raise ValidationError("Every n_k value must be at least 3")
        fractions = (self.range_fraction,) + self.range_fractions
        if any(not 0 < f < 1 for f in fractions):
            raise ValidationError("Strike range fractions must lie in (0, 1)")
        if self.seed < 0:
            raise ValidationError("Seed must be nonnegative")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValidationError(f"Unknown configuration key(s) {', '.join(unknown)}")
        if "study" not in data:
            raise ValidationError("Configuration needs a study")
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise ParseError(path, e.lineno, e.msg)
        except OSError as e:
            raise ParseError(path, 0, str(e))
        try:
            return cls.from_dict(data)
        except (ValidationError, TypeError) as e:
            raise ParseError(path, 1, str(e))

    @classmethod
    def default(cls, study: str) -> "ExperimentConfig":
        """The shipped configuration of a study."""
        return cls.from_json(settings.EXPERIMENT_CONFIG_DIR / f"{study}.json")

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["n_k"] = list(self.n_k)
        data["range_fractions"] = list(self.range_fractions)
        return data


# ============================================================================
# SEEDS AND PARALLEL REPLICATIONS
# ============================================================================

def replication_rng(seed: int, cell: int, replication: int) -> np.random.Generator:
    """Independent Philox stream for one (cell, replication)."""
    sequence = np.random.SeedSequence(seed, spawn_key=(cell, replication))
    return np.random.Generator(np.random.Philox(sequence))


def run_replications(job: Callable[[Any], List[Dict[str, Any]]], tasks: Sequence[Any],
                     threads: Optional[int] = None) -> List[Dict[str, Any]]:
    """Run ``job`` on every task in a thread pool and concatenate the returned rows."""
    workers = max(1, min(threads or settings.THREADS, len(tasks) or 1))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(job, tasks))
    return [row for rows in results for row in rows]


# ============================================================================
# RESULT TABLES
# ============================================================================

class ResultTable:
    """Per-replication rows plus summary statistics by (study, cell, quantity, estimator)."""

    def __init__(self, study: str, rows: Optional[List[Dict[str, Any]]] = None,
                 meta: Optional[Dict[str, Any]] = None):
        self.study = study
        self.rows = list(rows or [])
        self.meta = dict(meta or {})

    def add(self, cell, replication, quantity, estimator, estimate, truth, error):
        self.rows.append({
            "study": self.study, "cell": cell, "replication": int(replication),
            "quantity": quantity, "estimator": estimator,
            "estimate": float(estimate), "truth": float(truth), "error": float(error),
        })

    def extend(self, rows):
        for row in rows:
            self.add(**row)

    def __len__(self):
        return len(self.rows)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.rows, columns=list(RESULT_COLUMNS))
        return frame.sort_values(["study", "cell", "replication", "quantity", "estimator"],
                                 kind="mergesort").reset_index(drop=True)

    def summary(self) -> pd.DataFrame:
        frame = self.to_frame()
        grouped = frame.groupby(["study", "cell", "quantity", "estimator"], sort=True)
        summary = grouped["error"].agg(["count", "mean", "median", "min", "max", "std"])
        summary["mean_estimate"] = grouped["estimate"].mean()
        return summary.reset_index()

    def write(self, out_dir, config: ExperimentConfig) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(out / "results.csv", index=False, float_format=FLOAT_FORMAT)
        self.summary().to_csv(out / "summary.csv", index=False, float_format=FLOAT_FORMAT)
        meta = {
            "config": config.to_dict(),
            "seed": config.seed,
            "versions": {
                "rnproj": __version__,
                "python": platform.python_version(),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "pandas": pd.__version__,
            },
            **self.meta,
        }
        (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n")
        logger.info(f"Wrote {len(self.rows)} result rows to {out}")
        return out
