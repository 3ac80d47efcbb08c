"""
Stochastic volatility with contemporaneous jumps (SVCJ) under Q.

    d log S = (r - lambda*mbar - V/2) dt + sqrt(V) dW_s + xi_y dN
    dV      = kappa (theta - V) dt + sigma_v sqrt(V) dW_v + xi_v dN

with xi_v ~ Exp(mu_v) and xi_y | xi_v ~ N(mu_y + rho_J xi_v, sigma_y^2).
Simulated by an Euler scheme with full truncation of V.
"""

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from config import settings

from .black_scholes import TerminalSample
from ..utils.errors import DomainError, ParseError, ValidationError

logger = logging.getLogger(__name__)

BLOCK_SIZE = 20_000
TIME_UNITS = ("daily", "annual")
FIELDS = ("kappa", "theta", "rho", "sigma_v", "mu_v", "mu_y", "rho_J", "sigma_y", "lambda", "r")


@dataclass(frozen=True)
class SVCJParams:
    """
    Risk-neutral SVCJ parameters.

    With time_unit "daily", kappa and sigma_v are per trading day and are
    annualized as kappa*252 and sigma_v*sqrt(252); theta, mu_v and lambda are
    annual. "annual" uses every value as given.
    """

    kappa: float
    theta: float
    rho: float
    sigma_v: float
    mu_v: float
    mu_y: float
    rho_J: float
    sigma_y: float
    lam: float
    r: float
    time_unit: str = "daily"

    def __post_init__(self):
        for name in ("kappa", "theta", "sigma_v", "mu_v", "sigma_y", "lam"):
            if getattr(self, name) < 0:
                raise DomainError(f"SVCJ parameter {name} must be nonnegative")
        if abs(self.rho) > 1:
            raise DomainError(f"SVCJ rho must lie in [-1, 1], got {self.rho}")
        if self.time_unit not in TIME_UNITS:
            raise ValidationError(f"time_unit must be one of {TIME_UNITS}, got {self.time_unit!r}")
        if self.rho_J * self.mu_v >= 1:
            raise DomainError("rho_J * mu_v must be below 1 for a finite jump compensator")

    @classmethod
    def from_dict(cls, data) -> "SVCJParams":
        unknown = set(data) - set(FIELDS) - {"time_unit"}
        missing = [f for f in FIELDS if f not in data]
        if unknown or missing:
            raise ValidationError(
                f"SVCJ parameters: missing {missing or 'none'}, unknown {sorted(unknown) or 'none'}"
            )
        values = {("lam" if k == "lambda" else k): float(data[k]) for k in FIELDS}
        return cls(**values, time_unit=data.get("time_unit", "daily"))

    @classmethod
    def from_json(cls, path=None) -> "SVCJParams":
        """Load a calibration file (the shipped one by default)."""
        path = Path(path or settings.SVCJ_CALIBRATION_PATH)
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise ParseError(path, e.lineno, e.msg)
        except OSError as e:
            raise ParseError(path, 0, str(e))
        return cls.from_dict(data)

    def to_dict(self):
        data = asdict(self)
        data["lambda"] = data.pop("lam")
        return data

    @property
    def kappa_annual(self) -> float:
        return self.kappa * settings.TRADING_DAYS if self.time_unit == "daily" else self.kappa

    @property
    def sigma_v_annual(self) -> float:
        if self.time_unit == "daily":
            return self.sigma_v * math.sqrt(settings.TRADING_DAYS)
        return self.sigma_v

    @property
    def jump_compensator(self) -> float:
        """E[e^{xi_y}] - 1."""
        return math.exp(self.mu_y + 0.5 * self.sigma_y ** 2) / (1.0 - self.rho_J * self.mu_v) - 1.0

    def default_v0(self) -> float:
        """Stationary mean of V: theta + lambda mu_v / kappa."""
        kappa = self.kappa_annual
        return self.theta + (self.lam * self.mu_v / kappa if kappa > 0 else 0.0)


def _simulate_block(params, s0, v0, maturity, n_paths, n_steps, seed_seq):
    rng = np.random.Generator(np.random.Philox(seed_seq))
    dt = maturity / n_steps
    sqrt_dt = math.sqrt(dt)
    kappa, sigma_v = params.kappa_annual, params.sigma_v_annual
    rho_bar = math.sqrt(max(1.0 - params.rho ** 2, 0.0))
    drift = params.r - params.lam * params.jump_compensator

    log_s = np.full(n_paths, math.log(s0))
    v = np.full(n_paths, float(v0))
    for _ in range(n_steps):
        v_plus = np.maximum(v, 0.0)
        root_v = np.sqrt(v_plus)
        z1 = rng.standard_normal(n_paths)
        z2 = rng.standard_normal(n_paths)
        counts = rng.poisson(params.lam * dt, n_paths)
        xi_v = rng.gamma(counts, params.mu_v) if params.mu_v > 0 else np.zeros(n_paths)
        xi_y = rng.normal(params.mu_y * counts + params.rho_J * xi_v,
                          params.sigma_y * np.sqrt(counts))

        log_s += (drift - 0.5 * v_plus) * dt + root_v * sqrt_dt * z1 + xi_y
        v += (kappa * (params.theta - v_plus) * dt
              + sigma_v * root_v * sqrt_dt * (params.rho * z1 + rho_bar * z2)
              + xi_v)
    return np.exp(log_s)


def svcj_simulate(params: SVCJParams, s0: float, v0: Optional[float], maturity: float,
                  n_paths: int, n_steps: Optional[int], seed: int,
                  threads: Optional[int] = None) -> TerminalSample:
    """
    Simulate terminal prices.

    Paths are split into fixed-size blocks, each with its own Philox stream
    spawned from the seed, so the output depends only on
    (params, s0, v0, maturity, n_paths, n_steps, seed).

    Args:
        params: SVCJ parameters
        s0: Initial price
        v0: Initial variance (stationary mean when None)
        maturity: Horizon in years
        n_paths: Number of paths
        n_steps: Euler steps (252 per year when None)
        seed: Root seed
        threads: Worker threads (RNP_THREADS by default)

    Returns:
        TerminalSample
    """
    if n_paths < 1:
        raise ValidationError("n_paths must be at least 1")
    if n_steps is None:
        n_steps = max(1, int(round(settings.TRADING_DAYS * maturity)))
    if n_steps < 1:
        raise ValidationError("n_steps must be at least 1")
    if v0 is None:
        v0 = params.default_v0()
    if v0 < 0:
        raise DomainError(f"Initial variance must be nonnegative, got {v0}")

    sizes = [BLOCK_SIZE] * (n_paths // BLOCK_SIZE)
    if n_paths % BLOCK_SIZE:
        sizes.append(n_paths % BLOCK_SIZE)
    children = np.random.SeedSequence(seed).spawn(len(sizes))
    workers = max(1, min(threads or settings.THREADS, len(sizes)))
    logger.info(
        f"Simulating SVCJ: {n_paths} paths x {n_steps} steps in {len(sizes)} blocks "
        f"on {workers} thread(s), v0={v0:.6g}, time unit {params.time_unit}"
    )
    with ThreadPoolExecutor(max_workers=workers) as pool:
        blocks = list(pool.map(
            lambda job: _simulate_block(params, s0, v0, maturity, job[0], n_steps, job[1]),
            zip(sizes, children),
        ))
    return TerminalSample(
        values=np.concatenate(blocks),
        seed=seed,
        n_paths=n_paths,
        n_steps=n_steps,
        metadata={
            "model": "svcj",
            "v0": float(v0),
            "time_unit": params.time_unit,
            "block_size": BLOCK_SIZE,
            "params": params.to_dict(),
        },
    )
