"""
Projection estimator.

A target payoff is projected on the span of traded payoffs by least squares
(ordinary, weighted or inequality-constrained) and the fitted portfolio is
priced with market quotes.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg, optimize
from scipy.special import roots_legendre

from .grid_basis import (
    DEFAULT_ASSET,
    BasisSet,
    Bond,
    Call,
    CrossCall,
    DesignMatrix,
    Put,
    StateGrid,
    Underlying,
    _check_univariate,
    _knots,
    design_from_states,
    eval_design,
    tensor_states,
)
from ..utils.errors import DomainError, NumericalError, SingularSystemError, ValidationError

logger = logging.getLogger(__name__)

STRIKE_RTOL = 1e-12


# ============================================================================
# MARKET QUOTES
# ============================================================================

def _lookup(table: Mapping[float, float], strike: float) -> Optional[float]:
    if strike in table:
        return table[strike]
    for key, value in table.items():
        if np.isclose(key, strike, rtol=STRIKE_RTOL, atol=0.0):
            return value
    return None


def _clean_table(table, what):
    cleaned = {}
    for strike, price in (table or {}).items():
        strike, price = float(strike), float(price)
        if not strike > 0:
            raise ValidationError(f"{what} strike must be positive, got {strike}")
        if not np.isfinite(price) or price < 0:
            raise ValidationError(f"{what} price at strike {strike:g} must be nonnegative, got {price}")
        cleaned[strike] = price
    return cleaned


@dataclass(frozen=True)
class CrossQuotes:
    """
    Calls on a cross rate quoted in the denominator currency.

    Args:
        prices: strike -> call price in denominator currency
        gross_rate: Denominator-currency gross rate R_f^den
        spot: Spot of the denominator asset in pricing currency (S_den,t)
    """

    prices: Mapping[float, float]
    gross_rate: float
    spot: float

    def __post_init__(self):
        object.__setattr__(self, "prices", _clean_table(self.prices, "Cross call"))
        if not self.gross_rate > 0 or not self.spot > 0:
            raise ValidationError("Cross quotes need a positive gross rate and spot")


@dataclass(frozen=True)
class MarketQuotes:
    """Forwards, the gross risk-free rate and option prices keyed by asset and strike."""

    gross_rate: float
    forwards: Mapping[str, float]
    put_prices: Mapping[str, Mapping[float, float]] = field(default_factory=dict)
    call_prices: Mapping[str, Mapping[float, float]] = field(default_factory=dict)
    cross_call_prices: Mapping[Tuple[str, str], CrossQuotes] = field(default_factory=dict)

    def __post_init__(self):
        if not self.gross_rate > 0:
            raise ValidationError(f"Gross rate must be positive, got {self.gross_rate}")
        forwards = {str(a): float(f) for a, f in self.forwards.items()}
        bad = [a for a, f in forwards.items() if not f > 0]
        if bad:
            raise ValidationError(f"Forward must be positive for {', '.join(bad)}")
        object.__setattr__(self, "forwards", forwards)
        object.__setattr__(self, "put_prices", {
            a: _clean_table(t, "Put") for a, t in self.put_prices.items()})
        object.__setattr__(self, "call_prices", {
            a: _clean_table(t, "Call") for a, t in self.call_prices.items()})

    @classmethod
    def univariate(cls, gross_rate: float, forward: float, puts=None, calls=None,
                   asset: str = DEFAULT_ASSET) -> "MarketQuotes":
        return cls(
            gross_rate=float(gross_rate),
            forwards={asset: float(forward)},
            put_prices={asset: dict(puts or {})},
            call_prices={asset: dict(calls or {})},
        )

    def forward(self, asset: str = DEFAULT_ASSET) -> float:
        if asset not in self.forwards:
            raise ValidationError(f"No forward quoted for asset {asset}")
        return self.forwards[asset]

    def put_price(self, asset: str, strike: float) -> Optional[float]:
        return _lookup(self.put_prices.get(asset, {}), strike)

    def call_price(self, asset: str, strike: float) -> Optional[float]:
        return _lookup(self.call_prices.get(asset, {}), strike)

    def strikes(self, asset: str = DEFAULT_ASSET):
        """(put strikes, call strikes) quoted for an asset, ascending."""
        return (sorted(self.put_prices.get(asset, {})), sorted(self.call_prices.get(asset, {})))


def basis_expectations(basis: BasisSet, quotes: MarketQuotes) -> np.ndarray:
    """
    Risk-neutral expectation of every basis payoff implied by the quotes.

    Bond -> 1, Underlying -> F, Put/Call -> R_f * price and
    CrossCall -> R_f * S_den,t * C^den(K).
    """
    expectations = np.zeros(len(basis))
    missing = []
    for j, element in enumerate(basis):
        if isinstance(element, Bond):
            expectations[j] = 1.0
        elif isinstance(element, Underlying):
            if element.asset not in quotes.forwards:
                missing.append(element.label())
                continue
            expectations[j] = quotes.forwards[element.asset]
        elif isinstance(element, (Put, Call)):
            lookup = quotes.put_price if isinstance(element, Put) else quotes.call_price
            price = lookup(element.asset, element.strike)
            if price is None:
                missing.append(element.label())
                continue
            expectations[j] = quotes.gross_rate * price
        elif isinstance(element, CrossCall):
            cross = quotes.cross_call_prices.get((element.numerator, element.denominator))
            price = None if cross is None else _lookup(cross.prices, element.strike)
            if price is None:
                missing.append(element.label())
                continue
            expectations[j] = quotes.gross_rate * cross.spot * price
            if element.denominator in quotes.forwards:
                alternative = quotes.forwards[element.denominator] * cross.gross_rate * price
                logger.debug(
                    f"{element.label()}: R_f*S_den*C = {expectations[j]:.10g}, "
                    f"F_den*R_den*C = {alternative:.10g}"
                )
    if missing:
        raise ValidationError(f"Missing quotes for {', '.join(missing)}")
    return expectations


# ============================================================================
# FIT METHODS AND PORTFOLIOS
# ============================================================================

@dataclass(frozen=True, eq=False)
class FitMethod:
    """
    Least-squares variant used by ``fit``.

    kind is one of "ols", "wls" or "constrained". Constrained fits impose
    X beta >= 0 (payoff_nonneg) and/or beta >= -c (weight_floor) and may also
    carry weights.
    """

    kind: str = "ols"
    weights: Optional[np.ndarray] = None
    payoff_nonneg: bool = False
    weight_floor: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("ols", "wls", "constrained"):
            raise ValidationError(f"Unknown fit method {self.kind!r}")
        if self.kind == "wls" and self.weights is None:
            raise ValidationError("WLS needs a weight vector")
        if self.weights is not None:
            weights = np.asarray(self.weights, dtype=float)
            if weights.ndim != 1 or np.any(weights < 0) or not np.any(weights > 0):
                raise ValidationError("Weights must be a nonnegative vector, not all zero")
            object.__setattr__(self, "weights", weights)
        if self.weight_floor is not None and not self.weight_floor > 0:
            raise ValidationError(f"Weight floor c must be positive, got {self.weight_floor}")
        if self.kind == "constrained" and not self.payoff_nonneg and self.weight_floor is None:
            raise ValidationError("Constrained fit needs payoff_nonneg or a weight floor")

    @classmethod
    def ols(cls):
        return cls("ols")

    @classmethod
    def wls(cls, weights):
        return cls("wls", weights=weights)

    @classmethod
    def constrained(cls, payoff_nonneg: bool = True, weight_floor: Optional[float] = None,
                    weights=None):
        return cls("constrained", weights=weights, payoff_nonneg=payoff_nonneg,
                   weight_floor=weight_floor)

    def describe(self) -> Dict[str, object]:
        return {
            "kind": self.kind,
            "weighted": self.weights is not None,
            "payoff_nonneg": self.payoff_nonneg,
            "weight_floor": self.weight_floor,
        }


@dataclass(frozen=True)
class FitDiagnostics:
    l2_residual: float
    sup_residual: float
    condition: float
    min_fitted: float
    n_rows: int
    method: str


@dataclass(frozen=True, eq=False)
class ReplicatingPortfolio:
    """Fitted coefficients aligned with the basis order."""

    coefficients: np.ndarray
    basis: BasisSet
    diagnostics: FitDiagnostics

    def __post_init__(self):
        if len(self.coefficients) != len(self.basis):
            raise ValidationError("Coefficient count must equal basis size")

    def payoff(self, states) -> np.ndarray:
        """Evaluate the replicating payoff on a StateGrid, grid mapping or raw points."""
        if isinstance(states, (StateGrid, Mapping)):
            return eval_design(self.basis, states).values @ self.coefficients
        points = np.asarray(states, dtype=float)
        assets = self.basis.assets() or [DEFAULT_ASSET]
        return design_from_states(self.basis, {assets[0]: points}, points.size) @ self.coefficients

    def as_dict(self) -> Dict[str, float]:
        return dict(zip(self.basis.labels(), (float(c) for c in self.coefficients)))


@dataclass(frozen=True)
class MomentEstimate:
    estimate: float
    portfolio: ReplicatingPortfolio


# ============================================================================
# LEAST SQUARES
# ============================================================================

def _pivoted_qr(x: np.ndarray, labels: Sequence[str]):
    n, m = x.shape
    if n < m:
        raise SingularSystemError(
            f"{n} states cannot identify {m} basis elements", offending=labels[n:])
    q, r, piv = linalg.qr(x, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = max(n, m) * np.finfo(float).eps * (diag[0] if diag.size else 0.0)
    rank = int(np.sum(diag > tol))
    if rank < m:
        offending = [labels[i] for i in piv[rank:]]
        raise SingularSystemError(
            f"Design is rank deficient ({rank} < {m}); dependent column(s): {', '.join(offending)}",
            offending=offending,
        )
    return q, r, piv


def _condition(r: np.ndarray) -> float:
    singular = np.linalg.svd(r, compute_uv=False)
    return float((singular[0] / singular[-1]) ** 2)


def _least_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """min ||x|| subject to a x >= b, by nonnegative least squares on the dual."""
    p, m = a.shape
    e = np.vstack([a.T, b[np.newaxis, :]])
    f = np.zeros(m + 1)
    f[-1] = 1.0
    u, _ = optimize.nnls(e, f, maxiter=50 * (p + m + 1))
    r = e @ u - f
    if np.linalg.norm(r) <= np.finfo(float).eps * 10 or abs(r[-1]) < np.finfo(float).tiny:
        raise NumericalError("Constrained fit is infeasible")
    return -r[:m] / r[-1]


def _solve(x: np.ndarray, y: np.ndarray, method: FitMethod, labels):
    weights = method.weights
    if weights is not None:
        if weights.size != y.size:
            raise ValidationError(f"Weight vector has {weights.size} entries for {y.size} states")
        keep = weights > 0
        root = np.sqrt(weights[keep])
        xw, yw = x[keep] * root[:, np.newaxis], y[keep] * root
    else:
        xw, yw = x, y

    q, r, piv = _pivoted_qr(xw, labels)
    qty = q.T @ yw
    if method.kind == "constrained":
        rows, targets = [], []
        m = len(piv)
        if method.payoff_nonneg:
            if weights is not None:
                rows.append(x[:, piv] @ linalg.solve_triangular(r, np.eye(m)))
            else:
                rows.append(q)
            targets.append(np.zeros(rows[-1].shape[0]))
        if method.weight_floor is not None:
            rows.append(linalg.solve_triangular(r, np.eye(m)))
            targets.append(np.full(m, -float(method.weight_floor)))
        a = np.vstack(rows)
        h = np.concatenate(targets)
        shift = _least_distance(a, h - a @ qty)
        z = qty + shift
    else:
        z = qty
    beta_perm = linalg.solve_triangular(r, z)
    beta = np.empty_like(beta_perm)
    beta[piv] = beta_perm
    return beta, _condition(r)


def fit(design: DesignMatrix, target, method: Optional[FitMethod] = None) -> ReplicatingPortfolio:
    """
    Project a target vector on the design columns.

    Args:
        design: Basis evaluated on the grid
        target: Target payoff values, one per grid state
        method: FitMethod (OLS when omitted)

    Returns:
        ReplicatingPortfolio with residual diagnostics measured on the grid
    """
    method = method or FitMethod.ols()
    x = np.asarray(design.values, dtype=float)
    y = np.asarray(target, dtype=float).ravel()
    if y.size != x.shape[0]:
        raise ValidationError(f"Target has {y.size} values for {x.shape[0]} states")
    if not np.all(np.isfinite(y)):
        raise ValidationError("Target payoff must be finite on the grid")

    beta, condition = _solve(x, y, method, design.basis.labels())
    fitted = x @ beta
    residual = y - fitted
    diagnostics = FitDiagnostics(
        l2_residual=float(np.linalg.norm(residual)),
        sup_residual=float(np.max(np.abs(residual))) if residual.size else 0.0,
        condition=condition,
        min_fitted=float(np.min(fitted)) if fitted.size else 0.0,
        n_rows=int(x.shape[0]),
        method=method.kind,
    )
    logger.debug(
        f"{method.kind} fit on {x.shape[0]}x{x.shape[1]} design: "
        f"cond~{condition:.3e}, sup residual {diagnostics.sup_residual:.3e}"
    )
    return ReplicatingPortfolio(coefficients=beta, basis=design.basis, diagnostics=diagnostics)


def price(portfolio: ReplicatingPortfolio, quotes: MarketQuotes) -> float:
    """E_t^Q of the replicating payoff: expectations of the basis dotted with beta."""
    return float(basis_expectations(portfolio.basis, quotes) @ portfolio.coefficients)


def _evaluate_target(g, grid, basis):
    if isinstance(grid, StateGrid):
        return np.asarray(g(grid.points), dtype=float)
    order = list(basis.assets())
    order.extend(a for a in grid if a not in order)
    states, _ = tensor_states(grid, order)
    return np.asarray(g(*[states[a] for a in order]), dtype=float)


def estimate_moment(g, basis: BasisSet, grid, quotes: MarketQuotes,
                    method: Optional[FitMethod] = None) -> MomentEstimate:
    """
    Projection estimate of E_t^Q[g(S_T)].

    ``grid`` is a StateGrid, a mapping of grids for a multi-asset basis (g then
    receives one state vector per asset), or a (a_min, a_max) pair for the
    continuous-state limit.
    """
    if isinstance(grid, (tuple, list)) and len(grid) == 2 and np.isscalar(grid[0]):
        if method is not None and method.kind != "ols":
            raise ValidationError("The continuous-state projection supports OLS only")
        portfolio = project_continuous(basis, grid, g, breakpoints=getattr(g, "breakpoints", ()))
    else:
        design = eval_design(basis, grid)
        portfolio = fit(design, _evaluate_target(g, grid, basis), method)
    estimate = price(portfolio, quotes)
    logger.info(
        f"Projection estimate {estimate:.10g} with {len(basis)} basis elements "
        f"({portfolio.diagnostics.method}, {portfolio.diagnostics.n_rows} rows)"
    )
    return MomentEstimate(estimate=estimate, portfolio=portfolio)


# ============================================================================
# WEIGHTS
# ============================================================================

def cauchy_weights(grid: StateGrid, forward: float, scale: float) -> np.ndarray:
    """Weights proportional to a Cauchy density centered at the forward, summing to one."""
    if not scale > 0:
        raise DomainError(f"Cauchy scale must be positive, got {scale}")
    z = (grid.points - forward) / scale
    weights = 1.0 / (1.0 + z * z)
    return weights / weights.sum()


def density_weights(grid: StateGrid, density) -> np.ndarray:
    """Weights proportional to a supplied density (callable or values on the grid)."""
    values = density(grid.points) if callable(density) else density
    values = np.asarray(values, dtype=float)
    if values.shape != grid.points.shape:
        raise ValidationError("Density values must match the grid")
    if np.any(values < 0) or not np.any(values > 0):
        raise ValidationError("Density weights must be nonnegative and not all zero")
    return values / values.sum()


# ============================================================================
# CONTINUOUS-STATE PROJECTION
# ============================================================================

def project_continuous(basis: BasisSet, bounds, g, nodes_per_piece: int = 8,
                       breakpoints: Sequence[float] = ()) -> ReplicatingPortfolio:
    """
    L2(A) projection of g on a univariate basis.

    Gauss-Legendre nodes on every piece between consecutive kinks turn the
    integral problem into weighted least squares; the basis Gram is integrated
    exactly and polynomial targets are exact up to the node degree.
    """
    bounds = _check_univariate(basis, bounds)
    knots = _knots(basis, bounds, breakpoints)
    nodes, node_weights = roots_legendre(nodes_per_piece)
    left, right = knots[:-1, np.newaxis], knots[1:, np.newaxis]
    half = (right - left) / 2.0
    points = (left + half * (nodes[np.newaxis, :] + 1.0)).ravel()
    weights = (half * node_weights[np.newaxis, :]).ravel()

    assets = basis.assets() or [DEFAULT_ASSET]
    values = design_from_states(basis, {assets[0]: points}, points.size)
    design = DesignMatrix(values=values, basis=basis, grid=None)
    return fit(design, np.asarray(g(points), dtype=float), FitMethod.wls(weights))
