"""
Option-implied covariance across many assets.

Excess returns x live on a box A = A_1 x ... x A_d carrying the uniform
product measure. The cross product x_i x_j is projected on even powers of
the single-asset returns and of one or more index returns; because every
basis term is a power of a linear form, every inner product reduces to
one-dimensional monomial integrals and is exact. Pricing the projection with
option-implied variances and fourth moments gives the covariance estimate.
"""

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import linalg, signal
from scipy.special import factorial

from ..core.grid_basis import (
    DEFAULT_ASSET,
    BasisSet,
    Bond,
    Call,
    Put,
    StateGrid,
    StrikeSet,
    Underlying,
    eval_design,
    tensor_states,
)
from ..core.payoffs import Payoff
from ..core.projector import MarketQuotes, estimate_moment, fit, price
from ..utils.errors import DomainError, SingularSystemError, ValidationError

logger = logging.getLogger(__name__)

WEIGHT_ATOL = 1e-12
GRAM_RCOND = 1e-13


# ============================================================================
# DOMAIN, WEIGHTS AND MOMENTS
# ============================================================================

@dataclass(frozen=True)
class BoxDomain:
    """Per-asset intervals [lower_k, upper_k] for excess returns."""

    lower: Tuple[float, ...]
    upper: Tuple[float, ...]

    def __post_init__(self):
        lower = tuple(float(v) for v in self.lower)
        upper = tuple(float(v) for v in self.upper)
        if len(lower) != len(upper) or not lower:
            raise ValidationError("Box needs one (lower, upper) pair per asset")
        bad = [k for k, (lo, hi) in enumerate(zip(lower, upper)) if not hi > lo]
        if bad:
            raise DomainError(f"Box interval(s) {bad} are empty")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def symmetric(cls, half_widths: Sequence[float]) -> "BoxDomain":
        widths = [float(h) for h in half_widths]
        return cls(tuple(-h for h in widths), tuple(widths))

    @classmethod
    def from_variances(cls, variances: Sequence[float], width: float = 3.0) -> "BoxDomain":
        """Symmetric box of +-width standard deviations per asset."""
        return cls.symmetric([width * np.sqrt(v) for v in variances])

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def is_symmetric(self) -> bool:
        return all(lo == -hi for lo, hi in zip(self.lower, self.upper))


@dataclass(frozen=True, eq=False)
class IndexWeights:
    """Portfolio weight vectors of the quoted indices, each summing to one."""

    vectors: Tuple[np.ndarray, ...]

    def __post_init__(self):
        vectors = tuple(np.asarray(v, dtype=float) for v in self.vectors)
        if not vectors:
            raise ValidationError("At least one index is required")
        d = vectors[0].size
        for n, v in enumerate(vectors):
            if v.ndim != 1 or v.size != d:
                raise ValidationError(f"Index {n} weights must be a vector of length {d}")
            if abs(v.sum() - 1.0) > WEIGHT_ATOL:
                raise ValidationError(f"Index {n} weights sum to {v.sum():.15g}, not 1")
        object.__setattr__(self, "vectors", vectors)

    @classmethod
    def equal(cls, d: int) -> "IndexWeights":
        return cls((np.full(d, 1.0 / d),))

    @property
    def dim(self) -> int:
        return self.vectors[0].size

    def __len__(self):
        return len(self.vectors)

    def __getitem__(self, n):
        return self.vectors[n]


@dataclass(frozen=True, eq=False)
class MomentInputs:
    """Second and fourth central moments of every asset and index excess return."""

    asset_var: np.ndarray
    asset_m4: np.ndarray
    index_var: np.ndarray
    index_m4: np.ndarray
    gross_rate: float = 1.0
    tolerance: float = 1e-9

    def __post_init__(self):
        for name in ("asset_var", "asset_m4", "index_var", "index_m4"):
            object.__setattr__(self, name, np.atleast_1d(np.asarray(getattr(self, name), dtype=float)))
        if self.asset_var.shape != self.asset_m4.shape:
            raise ValidationError("Asset variances and fourth moments must align")
        if self.index_var.shape != self.index_m4.shape:
            raise ValidationError("Index variances and fourth moments must align")
        variances = np.concatenate([self.asset_var, self.index_var])
        fourth = np.concatenate([self.asset_m4, self.index_m4])
        if np.any(variances <= 0):
            raise DomainError("Variances must be positive")
        if np.any(fourth < variances ** 2 * (1.0 - self.tolerance)):
            raise DomainError("Fourth moments must be at least the squared variance")

    @classmethod
    def gaussian(cls, cov, weights: IndexWeights, gross_rate: float = 1.0) -> "MomentInputs":
        """Moments of a centred normal vector with covariance ``cov``."""
        cov = np.asarray(cov, dtype=float)
        asset_var = np.diag(cov).copy()
        index_var = np.array([w @ cov @ w for w in weights.vectors])
        return cls(asset_var, 3.0 * asset_var ** 2, index_var, 3.0 * index_var ** 2, gross_rate)

    @property
    def dim(self) -> int:
        return self.asset_var.size

    def vector(self) -> np.ndarray:
        """[1, Var_1..d, M4_1..d, (Var_M, M4_M) per index], the quartic term layout."""
        pairs = np.column_stack([self.index_var, self.index_m4]).ravel()
        return np.concatenate([[1.0], self.asset_var, self.asset_m4, pairs])


@dataclass(frozen=True, eq=False)
class CovEstimate:
    covariance: np.ndarray
    correlation: np.ndarray
    shrinkage: float = 0.0
    addition_residual: np.ndarray = field(default_factory=lambda: np.zeros(0))


# ============================================================================
# MONOMIAL INTEGRALS
# ============================================================================

@lru_cache(maxsize=4096)
def _uniform_moments(lo: float, hi: float, order: int) -> Tuple[float, ...]:
    """(1/|A|) int_A x^m dx for m = 0..order."""
    m = np.arange(order + 1, dtype=float)
    return tuple((hi ** (m + 1) - lo ** (m + 1)) / ((m + 1) * (hi - lo)))


def _merge(forms):
    merged = []
    for vector, power in forms:
        if power == 0:
            continue
        vector = np.asarray(vector, dtype=float)
        for item in merged:
            if np.array_equal(item[0], vector):
                item[1] += int(power)
                break
        else:
            merged.append([vector, int(power)])
    return merged


def linear_form_moment(forms, domain: BoxDomain) -> float:
    """
    E[prod_f (a_f . x)^{n_f}] for x uniform on the box.

    Expanding exp(sum_f t_f a_f . x) coordinate by coordinate turns the
    expectation into a product of polynomials in (t_f); each coordinate
    contributes mu_{k,|m|} prod_f a_fk^{m_f} / m_f! and the answer is the
    coefficient of prod_f t_f^{n_f} times prod_f n_f!.

    Args:
        forms: Sequence of (weight vector a_f, power n_f)
        domain: BoxDomain

    Returns:
        The moment
    """
    merged = _merge(forms)
    if not merged:
        return 1.0
    powers = tuple(p for _, p in merged)
    shape = tuple(p + 1 for p in powers)
    orders = np.indices(shape)
    total = orders.sum(axis=0)
    inverse_factorials = 1.0 / np.prod(factorial(orders), axis=0)
    a = np.array([v for v, _ in merged])
    if a.shape[1] != domain.dim:
        raise ValidationError(f"Linear forms have {a.shape[1]} coordinates for a {domain.dim}-asset box")
    broadcast = (-1,) + (1,) * len(powers)
    keep = tuple(slice(0, s) for s in shape)

    acc = None
    for k in range(domain.dim):
        column = a[:, k]
        if not np.any(column):
            continue
        mu = np.asarray(_uniform_moments(domain.lower[k], domain.upper[k], sum(powers)))
        term = mu[total] * inverse_factorials * np.prod(column.reshape(broadcast) ** orders, axis=0)
        acc = term if acc is None else signal.convolve(acc, term, method="direct")[keep]
    if acc is None:
        return 0.0
    return float(acc[powers] * np.prod(factorial(np.array(powers))))


# ============================================================================
# QUARTIC PROJECTION
# ============================================================================

class QuarticProjector:
    """
    Projection of cross products x_i x_j on
    F = {1, x_k^2, x_k^4, (w_l . x)^2, (w_l . x)^4} (plus optional extra monomials).

    The Gram matrix is built and factored once; coefficients for any set of
    pairs come from a single triangular solve.
    """

    def __init__(self, domain: BoxDomain, weights: IndexWeights,
                 extra_monomials: Sequence[Sequence[int]] = (), labels: Optional[Sequence[str]] = None):
        if weights.dim != domain.dim:
            raise ValidationError(f"Index weights have {weights.dim} entries for {domain.dim} assets")
        self.domain = domain
        self.weights = weights
        self.asset_labels = list(labels) if labels is not None else [f"x{k + 1}" for k in range(domain.dim)]
        self._check_indices()

        d = domain.dim
        eye = np.eye(d)
        self.terms = [("1", [])]
        self.terms += [(f"{self.asset_labels[k]}^2", [(eye[k], 2)]) for k in range(d)]
        self.terms += [(f"{self.asset_labels[k]}^4", [(eye[k], 4)]) for k in range(d)]
        for n, w in enumerate(weights.vectors):
            self.terms += [(f"M{n + 1}^2", [(w, 2)]), (f"M{n + 1}^4", [(w, 4)])]
        self.n_priced = len(self.terms)
        for exponents in extra_monomials:
            exponents = [int(e) for e in exponents]
            if len(exponents) != d:
                raise ValidationError(f"Extra monomial needs {d} exponents")
            label = "*".join(f"{self.asset_labels[k]}^{e}" for k, e in enumerate(exponents) if e)
            self.terms.append((label or "1", [(eye[k], e) for k, e in enumerate(exponents) if e]))

        self.gram = self._gram()
        self._scale = 1.0 / np.sqrt(np.diag(self.gram))
        scaled = self.gram * np.outer(self._scale, self._scale)
        eigenvalues = linalg.eigvalsh(scaled)
        rcond = eigenvalues[0] / eigenvalues[-1]
        if rcond < GRAM_RCOND:
            raise SingularSystemError(
                f"Quartic Gram is numerically singular (rcond {rcond:.2e})", offending=self.labels())
        self._factor = linalg.cho_factor(scaled)
        logger.debug(f"Quartic projector: {len(self.terms)} terms on {d} assets, rcond {rcond:.3e}")

    def _check_indices(self):
        vectors = self.weights.vectors
        for a in range(len(vectors)):
            for b in range(a + 1, len(vectors)):
                if np.allclose(vectors[a], vectors[b], rtol=0.0, atol=WEIGHT_ATOL):
                    raise SingularSystemError(
                        f"Index {a + 1} and index {b + 1} have identical weights",
                        offending=(f"M{a + 1}", f"M{b + 1}"),
                    )

    def labels(self):
        return [label for label, _ in self.terms]

    def _gram(self):
        m = len(self.terms)
        gram = np.empty((m, m))
        for a in range(m):
            for b in range(a, m):
                gram[a, b] = gram[b, a] = linear_form_moment(self.terms[a][1] + self.terms[b][1], self.domain)
        return gram

    def _rhs(self, i, j):
        eye = np.eye(self.domain.dim)
        target = [(eye[i], 1), (eye[j], 1)]
        return np.array([linear_form_moment(target + forms, self.domain) for _, forms in self.terms])

    def coefficients(self, pairs: Sequence[Tuple[int, int]]) -> np.ndarray:
        """One row of projection coefficients per (i, j) pair."""
        d = self.domain.dim
        for i, j in pairs:
            if i == j:
                raise ValidationError(f"Cross product needs two distinct assets, got ({i}, {j})")
            if not (0 <= i < d and 0 <= j < d):
                raise ValidationError(f"Pair ({i}, {j}) outside 0..{d - 1}")
        if not pairs:
            return np.zeros((0, len(self.terms)))
        rhs = np.column_stack([self._rhs(i, j) for i, j in pairs])
        solved = linalg.cho_solve(self._factor, rhs * self._scale[:, np.newaxis])
        return (solved * self._scale[:, np.newaxis]).T


def quartic_projection_coeffs(i: int, j: int, domain: BoxDomain, weights: IndexWeights,
                              extra_monomials: Sequence[Sequence[int]] = ()) -> np.ndarray:
    """Coefficients of x_i x_j on the quartic space, in QuarticProjector term order."""
    return QuarticProjector(domain, weights, extra_monomials).coefficients([(i, j)])[0]


def covariance_from_moments(coeffs, moments: MomentInputs) -> float:
    """Price a quartic projection: coefficients dotted with the moment vector."""
    coeffs = np.asarray(coeffs, dtype=float)
    vector = moments.vector()
    if coeffs.size != vector.size:
        raise ValidationError(
            f"{coeffs.size} coefficients for {vector.size} moments; extra monomials cannot be priced"
        )
    return float(coeffs @ vector)


def addition_residual(cov, moments: MomentInputs, weights: IndexWeights) -> np.ndarray:
    """w' Cov w - Var_M per index, with the diagonal taken from the asset variances."""
    cov = np.array(cov, dtype=float)
    np.fill_diagonal(cov, moments.asset_var)
    return np.array([w @ cov @ w for w in weights.vectors]) - moments.index_var


def _correlation(cov):
    sd = np.sqrt(np.diag(cov))
    corr = cov / np.outer(sd, sd)
    np.fill_diagonal(corr, 1.0)
    return corr


def estimate_covariance(moments: MomentInputs, domain: BoxDomain, weights: IndexWeights,
                        min_eigenvalue: Optional[float] = None) -> CovEstimate:
    """
    Full covariance matrix from the quartic projection of every pair.

    When ``min_eigenvalue`` is given, the correlation matrix is shrunk toward
    the equicorrelation of the first index.
    """
    d = moments.dim
    if domain.dim != d or weights.dim != d:
        raise ValidationError("Moments, box and index weights must have the same dimension")
    if moments.index_var.size != len(weights):
        raise ValidationError("One variance per index is required")
    projector = QuarticProjector(domain, weights)
    pairs = [(i, j) for i in range(d) for j in range(i + 1, d)]
    coeffs = projector.coefficients(pairs)
    priced = coeffs @ moments.vector()

    cov = np.diag(moments.asset_var.copy())
    for (i, j), value in zip(pairs, priced):
        cov[i, j] = cov[j, i] = value
    residual = addition_residual(cov, moments, weights)
    logger.info(f"Quartic covariance for {d} assets; max addition residual {np.max(np.abs(residual)):.2e}")
    estimate = CovEstimate(covariance=cov, correlation=_correlation(cov), addition_residual=residual)
    if min_eigenvalue is None:
        return estimate
    target = equicorrelation(moments, weights[0], index=0)
    shrunk = shrink_to_equicorrelation(estimate.correlation, target, min_eigenvalue,
                                       std=np.sqrt(moments.asset_var))
    return CovEstimate(shrunk.covariance, shrunk.correlation, shrunk.shrinkage,
                       addition_residual(shrunk.covariance, moments, weights))


# ============================================================================
# EQUICORRELATION AND SHRINKAGE
# ============================================================================

def equicorrelation(moments: MomentInputs, weights, index: int = 0) -> float:
    """(Var_M - sum w_j^2 Var_j) / (2 sum_{i<j} w_i w_j s_i s_j)."""
    w = np.asarray(weights, dtype=float)
    if w.size < 2 or w.size != moments.dim:
        raise ValidationError("Equicorrelation needs at least two assets and matching weights")
    sd = np.sqrt(moments.asset_var)
    ws = w * sd
    denominator = ws.sum() ** 2 - np.sum(ws ** 2)
    if abs(denominator) < np.finfo(float).eps * max(np.sum(ws ** 2), 1.0):
        raise DomainError("Equicorrelation is undefined when all but one weight vanish")
    numerator = moments.index_var[index] - np.sum(w ** 2 * moments.asset_var)
    return float(numerator / denominator)


def _equicorrelation_matrix(d, rho):
    return (1.0 - rho) * np.eye(d) + rho * np.ones((d, d))


def shrink_to_equicorrelation(corr, target: float, min_eigenvalue: float = 1e-3,
                              std=None, tolerance: float = 1e-6) -> CovEstimate:
    """
    (1 - alpha) C + alpha C_equi with the smallest alpha in [0, 1] whose
    minimum eigenvalue reaches ``min_eigenvalue``.

    Off-diagonal entries are clipped to [-1, 1] first; alpha is bisected to
    ``tolerance`` and the feasible end of the bracket is returned.
    """
    corr = np.array(corr, dtype=float)
    d = corr.shape[0]
    if corr.shape != (d, d) or d < 2:
        raise ValidationError("Correlation must be a square matrix of size at least 2")
    corr = np.clip((corr + corr.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    equi = _equicorrelation_matrix(d, target)
    if linalg.eigvalsh(equi)[0] < min_eigenvalue:
        raise DomainError(
            f"Equicorrelation target {target:.6g} is infeasible for {d} assets "
            f"(needs -1/{d - 1} < rho < 1 with margin {min_eigenvalue:g})"
        )

    def min_eig(alpha):
        return linalg.eigvalsh((1.0 - alpha) * corr + alpha * equi)[0]

    alpha = 0.0
    if min_eig(0.0) < min_eigenvalue:
        lo, hi = 0.0, 1.0
        while hi - lo > tolerance:
            mid = 0.5 * (lo + hi)
            if min_eig(mid) >= min_eigenvalue:
                hi = mid
            else:
                lo = mid
        alpha = hi
        logger.warning(f"Correlation matrix shrunk toward equicorrelation {target:.4f} with alpha={alpha:.6f}")

    shrunk = (1.0 - alpha) * corr + alpha * equi
    sd = np.ones(d) if std is None else np.asarray(std, dtype=float)
    return CovEstimate(covariance=shrunk * np.outer(sd, sd), correlation=shrunk, shrinkage=alpha)


# ============================================================================
# SPANNING ESTIMATOR
# ============================================================================

@dataclass(frozen=True)
class SpanningEstimate:
    """Estimate and the direction of its bias ("upper" or "lower" bound)."""

    value: float
    bound: str


@dataclass(frozen=True)
class SpanningRegression:
    b0: float
    b1: float
    b2: float
    r_squared: float


def spanning_covariance(b1: float, b2: float, var1: float, var2: float, var3: float) -> SpanningEstimate:
    """(Var_3 - b1^2 Var_1 - b2^2 Var_2) / (2 b1 b2)."""
    if b1 * b2 == 0:
        raise DomainError("Spanning estimator needs b1 * b2 != 0")
    if min(var1, var2, var3) <= 0:
        raise DomainError("Variances must be positive")
    value = (var3 - b1 ** 2 * var1 - b2 ** 2 * var2) / (2.0 * b1 * b2)
    return SpanningEstimate(value=float(value), bound="upper" if b1 * b2 > 0 else "lower")


def spanning_correlation(b1: float, b2: float, var1: float, var2: float, var3: float) -> SpanningEstimate:
    cov = spanning_covariance(b1, b2, var1, var2, var3)
    return SpanningEstimate(value=cov.value / float(np.sqrt(var1 * var2)), bound=cov.bound)


def spanning_regression(r1, r2, r3) -> SpanningRegression:
    """OLS of R_3 on (1, R_1, R_2)."""
    r1, r2, r3 = (np.asarray(r, dtype=float) for r in (r1, r2, r3))
    if not (r1.shape == r2.shape == r3.shape) or r1.size < 4:
        raise ValidationError("Return histories must align and hold at least four observations")
    x = np.column_stack([np.ones_like(r1), r1, r2])
    beta, *_ = np.linalg.lstsq(x, r3, rcond=None)
    residual = r3 - x @ beta
    total = np.sum((r3 - r3.mean()) ** 2)
    r_squared = 1.0 - np.sum(residual ** 2) / total if total > 0 else 1.0
    return SpanningRegression(float(beta[0]), float(beta[1]), float(beta[2]), float(r_squared))


# ============================================================================
# SEPARABLE CLASS AND RIDGE RESIDUALS
# ============================================================================

def _univariate_elements(quotes: MarketQuotes, asset: str):
    puts, calls = quotes.strikes(asset)
    return [Underlying(asset)] + [Put(asset, k) for k in puts] + [Call(asset, k) for k in calls]


def separable_cross_estimate(quotes: MarketQuotes, grids: Mapping[str, StateGrid],
                             assets: Tuple[str, str] = ("S1", "S2"),
                             extra_elements: Sequence = ()) -> float:
    """
    Priced projection of S_1 S_2 on single-asset payoffs only.

    With grid midpoints at the forwards the answer is F_1 F_2 whatever the
    option quotes, so no dependence is recovered.
    """
    first, second = assets
    for asset in assets:
        grid = grids[asset]
        midpoint = 0.5 * (grid.bounds[0] + grid.bounds[1])
        forward = quotes.forward(asset)
        if not np.isclose(midpoint, forward, rtol=1e-10, atol=0.0):
            raise ValidationError(
                f"Grid for {asset} is centred at {midpoint:.10g}, not at the forward {forward:.10g}"
            )
    elements = [Bond()] + _univariate_elements(quotes, first) + _univariate_elements(quotes, second)
    basis = BasisSet(tuple(elements) + tuple(extra_elements))
    design = eval_design(basis, {first: grids[first], second: grids[second]})
    states, _ = tensor_states(grids, [first, second])
    portfolio = fit(design, states[first] * states[second])
    return price(portfolio, quotes)


def ridge_projection_residual(target, directions, domain: BoxDomain, degree: int = 4,
                              n_points: int = 41) -> float:
    """
    RMS residual of projecting ``target(x)`` on sums of polynomial ridge
    functions p_v(v . x) of degree <= ``degree`` on a uniform tensor grid.
    """
    axes = [np.linspace(lo, hi, n_points) for lo, hi in zip(domain.lower, domain.upper)]
    mesh = np.meshgrid(*axes, indexing="ij")
    x = np.column_stack([m.ravel() for m in mesh])
    columns = [np.ones(x.shape[0])]
    for v in directions:
        projected = x @ np.asarray(v, dtype=float)
        columns.extend(projected ** p for p in range(1, degree + 1))
    design = np.column_stack(columns)
    y = np.asarray(target(x), dtype=float)
    beta, *_ = np.linalg.lstsq(design, y, rcond=None)
    return float(np.sqrt(np.mean((y - design @ beta) ** 2)))


# ============================================================================
# IMPLIED MOMENTS AND EXPORT
# ============================================================================

def _central_power(forward, n):
    return Payoff(
        name=f"centred_power_{n}",
        func=lambda s: (np.asarray(s, dtype=float) / forward - 1.0) ** n,
        polynomial=tuple((np.polynomial.Polynomial([-1.0, 1.0 / forward]) ** n).coef),
    )


def _implied_pair(quotes: MarketQuotes, grid: StateGrid, asset: str):
    forward = quotes.forward(asset)
    puts, calls = quotes.strikes(asset)
    basis = BasisSet.univariate(StrikeSet(tuple(puts), tuple(calls), forward), asset=asset)
    second = estimate_moment(_central_power(forward, 2), basis, grid, quotes).estimate
    fourth = estimate_moment(_central_power(forward, 4), basis, grid, quotes).estimate
    return second, fourth


def implied_moment_inputs(assets: Sequence[Tuple[MarketQuotes, StateGrid]],
                          indices: Sequence[Tuple[MarketQuotes, StateGrid]],
                          asset: str = DEFAULT_ASSET) -> MomentInputs:
    """
    Variance and fourth moment of x = S_T/F - 1 for every asset and index,
    each projected from its own option quotes.
    """
    if not assets or not indices:
        raise ValidationError("Implied moments need asset and index quotes")
    asset_moments = np.array([_implied_pair(q, g, asset) for q, g in assets])
    index_moments = np.array([_implied_pair(q, g, asset) for q, g in indices])
    return MomentInputs(
        asset_var=asset_moments[:, 0], asset_m4=asset_moments[:, 1],
        index_var=index_moments[:, 0], index_m4=index_moments[:, 1],
        gross_rate=assets[0][0].gross_rate,
    )


def write_cov_csv(path_or_buffer, estimate: CovEstimate, labels: Optional[Sequence[str]] = None) -> None:
    """Long-format CSV: covariance and correlation entries, then shrinkage and residual rows."""
    d = estimate.covariance.shape[0]
    labels = list(labels) if labels is not None else [f"x{k + 1}" for k in range(d)]
    rows = []
    for kind, matrix in (("covariance", estimate.covariance), ("correlation", estimate.correlation)):
        for i in range(d):
            for j in range(d):
                rows.append({"kind": kind, "row": labels[i], "col": labels[j], "value": matrix[i, j]})
    rows.append({"kind": "shrinkage", "row": "", "col": "", "value": estimate.shrinkage})
    for n, value in enumerate(estimate.addition_residual):
        rows.append({"kind": "addition_residual", "row": f"M{n + 1}", "col": "", "value": value})
    pd.DataFrame(rows, columns=["kind", "row", "col", "value"]).to_csv(
        path_or_buffer, index=False, float_format="%.12g")
