"""
State grids, payoff bases and design matrices.

A basis is an ordered set of traded payoffs (bond, underlying, puts, calls and
the FX cross call). Evaluated on a grid of terminal states it gives the design
matrix of the projection estimator; for a univariate basis the continuous
inner products on A = [a_min, a_max] are available in closed form.
"""

import logging
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate

from config import settings

from ..utils.errors import DomainError, ValidationError

logger = logging.getLogger(__name__)

DEFAULT_ASSET = "S"


def _fmt(value):
    return f"{value:g}"


# ============================================================================
# PAYOFF ELEMENTS
# ============================================================================

@dataclass(frozen=True)
class Bond:
    """Zero-coupon bond paying one unit at maturity."""

    @property
    def assets(self):
        return ()

    def evaluate(self, states: Mapping[str, np.ndarray], size: int) -> np.ndarray:
        return np.ones(size)

    def label(self) -> str:
        return "Bond"

    def linear_piece(self, bounds):
        return 1.0, 0.0, bounds[0], bounds[1]


@dataclass(frozen=True)
class Underlying:
    """The underlying itself, paying S_T."""

    asset: str = DEFAULT_ASSET

    @property
    def assets(self):
        return (self.asset,)

    def evaluate(self, states, size):
        return np.asarray(states[self.asset], dtype=float).copy()

    def label(self):
        return f"Underlying({self.asset})"

    def linear_piece(self, bounds):
        return 0.0, 1.0, bounds[0], bounds[1]


@dataclass(frozen=True)
class Put:
    """European put paying (K - S_T)+."""

    asset: str
    strike: float

    def __post_init__(self):
        if not self.strike > 0:
            raise ValidationError(f"Put strike must be positive, got {self.strike}")

    @property
    def assets(self):
        return (self.asset,)

    def evaluate(self, states, size):
        return np.maximum(self.strike - np.asarray(states[self.asset], dtype=float), 0.0)

    def label(self):
        return f"Put({self.asset},{_fmt(self.strike)})"

    def linear_piece(self, bounds):
        return self.strike, -1.0, bounds[0], self.strike


@dataclass(frozen=True)
class Call:
    """European call paying (S_T - K)+."""

    asset: str
    strike: float

    def __post_init__(self):
        if not self.strike > 0:
            raise ValidationError(f"Call strike must be positive, got {self.strike}")

    @property
    def assets(self):
        return (self.asset,)

    def evaluate(self, states, size):
        return np.maximum(np.asarray(states[self.asset], dtype=float) - self.strike, 0.0)

    def label(self):
        return f"Call({self.asset},{_fmt(self.strike)})"

    def linear_piece(self, bounds):
        return -self.strike, 1.0, self.strike, bounds[1]


@dataclass(frozen=True)
class CrossCall:
    """Call on the cross rate S_num/S_den paying S_den * (S_num/S_den - K)+."""

    numerator: str
    denominator: str
    strike: float

    def __post_init__(self):
        if not self.strike > 0:
            raise ValidationError(f"CrossCall strike must be positive, got {self.strike}")
        if self.numerator == self.denominator:
            raise ValidationError("CrossCall needs two distinct assets")

    @property
    def assets(self):
        return (self.numerator, self.denominator)

    def evaluate(self, states, size):
        s_num = np.asarray(states[self.numerator], dtype=float)
        s_den = np.asarray(states[self.denominator], dtype=float)
        return np.maximum(s_num - self.strike * s_den, 0.0)

    def label(self):
        return f"CrossCall({self.numerator}/{self.denominator},{_fmt(self.strike)})"

    def linear_piece(self, bounds):
        raise ValidationError("CrossCall has no univariate representation")


Element = Union[Bond, Underlying, Put, Call, CrossCall]


# ============================================================================
# STRIKES AND GRIDS
# ============================================================================

def _strictly_increasing(values):
    return all(b > a for a, b in zip(values, values[1:]))


@dataclass(frozen=True)
class StrikeSet:
    """Out-of-the-money strike menu split at the forward."""

    put_strikes: Tuple[float, ...]
    call_strikes: Tuple[float, ...]
    forward: float

    def __post_init__(self):
        object.__setattr__(self, "put_strikes", tuple(float(k) for k in self.put_strikes))
        object.__setattr__(self, "call_strikes", tuple(float(k) for k in self.call_strikes))
        if not self.forward > 0:
            raise DomainError(f"Forward must be positive, got {self.forward}")
        union = self.put_strikes + self.call_strikes
        if any(not k > 0 for k in union):
            raise ValidationError("Strikes must be positive")
        if not _strictly_increasing(self.put_strikes) or not _strictly_increasing(self.call_strikes):
            raise ValidationError("Strikes must be strictly increasing on each side")
        if len(set(union)) != len(union):
            raise ValidationError("Strikes must be unique across puts and calls")
        if self.put_strikes and self.put_strikes[-1] > self.forward:
            raise ValidationError(
                f"Put strike {self.put_strikes[-1]} lies above the forward {self.forward}"
            )
        if self.call_strikes and self.call_strikes[0] <= self.forward:
            raise ValidationError(
                f"Call strike {self.call_strikes[0]} does not lie above the forward {self.forward}"
            )

    @classmethod
    def split(cls, strikes: Sequence[float], forward: float) -> "StrikeSet":
        """Assign strikes K <= F to puts and K > F to calls."""
        ordered = sorted(float(k) for k in strikes)
        if len(set(ordered)) != len(ordered):
            raise ValidationError("Duplicate strikes in strike list")
        puts = [k for k in ordered if k <= forward]
        calls = [k for k in ordered if k > forward]
        return cls(tuple(puts), tuple(calls), float(forward))

    @property
    def strikes(self) -> Tuple[float, ...]:
        return self.put_strikes + self.call_strikes

    @property
    def n_k(self) -> int:
        return len(self.put_strikes) + len(self.call_strikes)


@dataclass(frozen=True, eq=False)
class StateGrid:
    """Strictly increasing terminal-state grid with a_min = s_1 and a_max = s_n."""

    points: np.ndarray
    bounds: Tuple[float, float]

    @property
    def size(self) -> int:
        return len(self.points)

    @property
    def mesh(self) -> float:
        return (self.bounds[1] - self.bounds[0]) / (self.size - 1)

    def is_uniform(self, rtol=1e-9) -> bool:
        steps = np.diff(self.points)
        return bool(np.allclose(steps, steps[0], rtol=rtol, atol=0.0))

    def covers(self, strikes: Sequence[float]) -> bool:
        """True when every strike lies strictly inside the grid bounds."""
        lo, hi = self.bounds
        return all(lo < k < hi for k in strikes)


def build_state_grid(bounds, n_s: Optional[int] = None, points=None) -> StateGrid:
    """
    Build a state grid on [a_min, a_max].

    Spacing is uniform with ``n_s`` points unless ``points`` is given, in which
    case those explicit points are used as they are.

    Args:
        bounds: (a_min, a_max) with 0 < a_min < a_max
        n_s: Number of uniform points (ignored when explicit points are given)
        points: Optional explicit, strictly increasing points spanning the bounds

    Returns:
        StateGrid
    """
    a_min, a_max = float(bounds[0]), float(bounds[1])
    if not a_min > 0:
        raise DomainError(f"Grid lower bound must be positive, got {a_min}")
    if not a_max > a_min:
        raise DomainError(f"Grid bounds must be increasing, got [{a_min}, {a_max}]")

    if points is not None:
        values = np.asarray(points, dtype=float)
        if values.ndim != 1 or values.size < 2:
            raise ValidationError("Explicit grid needs at least two points")
        if not np.all(np.diff(values) > 0):
            raise ValidationError("Explicit grid points must be strictly increasing")
        if not (np.isclose(values[0], a_min, rtol=1e-12, atol=0.0)
                and np.isclose(values[-1], a_max, rtol=1e-12, atol=0.0)):
            raise ValidationError(
                f"Explicit grid must start at {a_min} and end at {a_max}, "
                f"got [{values[0]}, {values[-1]}]"
            )
        values = values.copy()
        values[0], values[-1] = a_min, a_max
    else:
        if n_s is None:
            n_s = settings.DEFAULT_GRID_POINTS
        if n_s < 2:
            raise DomainError(f"A grid needs at least two points, got {n_s}")
        values = np.linspace(a_min, a_max, int(n_s))

    values.setflags(write=False)
    return StateGrid(points=values, bounds=(a_min, a_max))


# ============================================================================
# BASIS SET
# ============================================================================

def _check_option_order(elements):
    """Puts then calls per asset, cross calls last, strikes ascending within each run."""
    last_strike = {}
    seen_call, seen_cross = set(), False
    for element in elements:
        if isinstance(element, CrossCall):
            seen_cross = True
            key = ("cross", element.assets)
        elif seen_cross:
            raise ValidationError(f"{element.label()} follows a CrossCall; cross calls come last")
        elif isinstance(element, Put):
            if element.asset in seen_call:
                raise ValidationError(f"{element.label()} follows a call on {element.asset}; puts come first")
            key = ("put", element.asset)
        elif isinstance(element, Call):
            seen_call.add(element.asset)
            key = ("call", element.asset)
        else:
            continue
        previous = last_strike.get(key)
        if previous is not None and not element.strike > previous:
            raise ValidationError(
                f"{element.label()} is out of order; strikes must ascend within each option type"
            )
        last_strike[key] = element.strike


@dataclass(frozen=True)
class BasisSet:
    """Ordered, duplicate-free list of payoff elements."""

    elements: Tuple[Element, ...]

    def __post_init__(self):
        elements = tuple(self.elements)
        object.__setattr__(self, "elements", elements)
        if not elements:
            raise ValidationError("Basis must contain at least one element")
        seen = set()
        for element in elements:
            if element in seen:
                raise ValidationError(f"Duplicate basis element {element.label()}")
            seen.add(element)

        bonds = [i for i, e in enumerate(elements) if isinstance(e, Bond)]
        if bonds and bonds != [0]:
            raise ValidationError("Bond must be the first basis element")
        underlyings = [i for i, e in enumerate(elements) if isinstance(e, Underlying)]
        first_slot = 1 if bonds else 0
        if underlyings and underlyings[0] != first_slot:
            raise ValidationError("An Underlying must directly follow the Bond")

        calls = {(e.asset, e.strike) for e in elements if isinstance(e, Call)}
        clashes = sorted(
            (e.asset, e.strike) for e in elements
            if isinstance(e, Put) and (e.asset, e.strike) in calls
        )
        if clashes:
            listed = ", ".join(f"{a}@{_fmt(k)}" for a, k in clashes)
            raise ValidationError(
                f"Put and call share a strike ({listed}); drop one side, parity makes it redundant"
            )
        _check_option_order(elements)

    @classmethod
    def univariate(cls, strikes: StrikeSet, asset: str = DEFAULT_ASSET,
                   include_bond: bool = True, include_underlying: bool = True) -> "BasisSet":
        """Basis [Bond, Underlying, puts ascending, calls ascending] for one asset."""
        elements = []
        if include_bond:
            elements.append(Bond())
        if include_underlying:
            elements.append(Underlying(asset))
        elements.extend(Put(asset, k) for k in sorted(strikes.put_strikes))
        elements.extend(Call(asset, k) for k in sorted(strikes.call_strikes))
        return cls(tuple(elements))

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    @property
    def size(self) -> int:
        return len(self.elements)

    def labels(self):
        return [e.label() for e in self.elements]

    def assets(self):
        """Asset ids in order of first appearance."""
        ordered = []
        for element in self.elements:
            for asset in element.assets:
                if asset not in ordered:
                    ordered.append(asset)
        return ordered

    @property
    def is_univariate(self) -> bool:
        return len(self.assets()) <= 1 and not any(isinstance(e, CrossCall) for e in self.elements)

    @property
    def has_bond(self) -> bool:
        return bool(self.elements) and isinstance(self.elements[0], Bond)

    def strikes(self, asset: Optional[str] = None):
        """Sorted strikes of the put and call elements (optionally of one asset)."""
        return sorted(
            e.strike for e in self.elements
            if isinstance(e, (Put, Call)) and (asset is None or e.asset == asset)
        )

    def index(self, element: Element) -> int:
        return self.elements.index(element)

    def with_elements(self, extra: Sequence[Element]) -> "BasisSet":
        return BasisSet(self.elements + tuple(extra))


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """Basis evaluated state by state; columns follow the basis order."""

    values: np.ndarray
    basis: BasisSet
    grid: Optional[object] = None

    @property
    def shape(self):
        return self.values.shape


# ============================================================================
# DESIGN MATRICES
# ============================================================================

def design_from_states(basis: BasisSet, states: Mapping[str, np.ndarray], size: int) -> np.ndarray:
    """Evaluate every basis element on aligned state vectors of length ``size``."""
    missing = [a for a in basis.assets() if a not in states]
    if missing:
        raise ValidationError(f"No state values for asset(s) {', '.join(missing)}")
    columns = [element.evaluate(states, size) for element in basis]
    return np.column_stack(columns) if columns else np.empty((size, 0))


def tensor_states(grids: Mapping[str, StateGrid], order: Sequence[str]):
    """Tensor-product state set; the first asset in ``order`` is the outer index."""
    axes = [grids[a].points for a in order]
    mesh = np.meshgrid(*axes, indexing="ij")
    states = {a: m.ravel() for a, m in zip(order, mesh)}
    size = int(np.prod([len(ax) for ax in axes])) if axes else 0
    return states, size


def eval_design(basis: BasisSet, grid) -> DesignMatrix:
    """
    Evaluate a basis on a grid.

    Args:
        basis: Basis to evaluate
        grid: StateGrid for a univariate basis, or a mapping asset id -> StateGrid
              evaluated on the tensor-product state set (row-major, first asset outer)

    Returns:
        DesignMatrix with one row per state and one column per element
    """
    if isinstance(grid, StateGrid):
        assets = basis.assets()
        if len(assets) > 1:
            raise ValidationError(
                f"Basis references {len(assets)} assets; pass one grid per asset"
            )
        asset = assets[0] if assets else DEFAULT_ASSET
        states = {asset: grid.points}
        values = design_from_states(basis, states, grid.size)
        return DesignMatrix(values=values, basis=basis, grid=grid)

    if not isinstance(grid, Mapping):
        raise ValidationError("Grid must be a StateGrid or a mapping of asset id to StateGrid")
    order = [a for a in basis.assets()]
    missing = [a for a in order if a not in grid]
    if missing:
        raise ValidationError(f"Missing grid for asset(s) {', '.join(missing)}")
    for extra in grid:
        if extra not in order:
            order.append(extra)
    states, size = tensor_states(grid, order)
    values = design_from_states(basis, states, size)
    return DesignMatrix(values=values, basis=basis, grid=dict(grid))


# ============================================================================
# CONTINUOUS INNER PRODUCTS
# ============================================================================

def _check_univariate(basis: BasisSet, bounds):
    if not basis.is_univariate:
        raise ValidationError("Closed-form inner products need a univariate basis")
    a_min, a_max = float(bounds[0]), float(bounds[1])
    if not a_max > a_min:
        raise DomainError(f"Bounds must be increasing, got [{a_min}, {a_max}]")
    outside = [k for k in basis.strikes() if not a_min < k < a_max]
    if outside:
        raise DomainError(
            f"Strike(s) {', '.join(_fmt(k) for k in outside)} outside ({_fmt(a_min)}, {_fmt(a_max)})"
        )
    return a_min, a_max


def _pieces(basis, bounds):
    return [element.linear_piece(bounds) for element in basis]


def gram_analytic(basis: BasisSet, bounds) -> np.ndarray:
    """
    Exact Gram matrix <phi_i, phi_j> = int_A phi_i phi_j dS for a univariate basis.

    Every element is linear on its support, so each entry is the integral of a
    quadratic over the overlap of two intervals.
    """
    bounds = _check_univariate(basis, bounds)
    pieces = _pieces(basis, bounds)
    m = len(pieces)
    gram = np.zeros((m, m))
    for i in range(m):
        c1, b1, lo1, hi1 = pieces[i]
        for j in range(i, m):
            c2, b2, lo2, hi2 = pieces[j]
            lo, hi = max(lo1, lo2), min(hi1, hi2)
            if hi <= lo:
                continue
            length = hi - lo
            # shift to u = x - lo so both factors are (c + b*lo) + b*u
            d1 = c1 + b1 * lo
            d2 = c2 + b2 * lo
            value = (d1 * d2 * length
                     + (d1 * b2 + d2 * b1) * length ** 2 / 2.0
                     + b1 * b2 * length ** 3 / 3.0)
            gram[i, j] = value
            gram[j, i] = value
    return gram


def antiderivative_matrix(basis: BasisSet, bounds, x) -> np.ndarray:
    """Rows int_{a_min}^{x} phi_j(s) ds for each evaluation point x."""
    bounds = _check_univariate(basis, bounds)
    x = np.asarray(x, dtype=float)
    out = np.zeros((x.size, len(basis)))
    for j, (c, b, lo, hi) in enumerate(_pieces(basis, bounds)):
        length = np.clip(np.minimum(x, hi) - lo, 0.0, None)
        d = c + b * lo
        out[:, j] = d * length + b * length ** 2 / 2.0
    return out


def _knots(basis, bounds, breakpoints=()):
    a_min, a_max = bounds
    inner = [k for k in list(basis.strikes()) + [float(p) for p in breakpoints] if a_min < k < a_max]
    return np.unique(np.array([a_min, *inner, a_max], dtype=float))


def inner_products(basis: BasisSet, bounds, g, breakpoints=()) -> np.ndarray:
    """
    Vector <phi_j, g> = int_A phi_j g dS.

    Exact when ``g`` carries ascending polynomial coefficients in a
    ``polynomial`` attribute; otherwise adaptive quadrature on every piece
    between consecutive strikes and the given breakpoints of g.
    """
    bounds = _check_univariate(basis, bounds)
    pieces = _pieces(basis, bounds)
    coefficients = getattr(g, "polynomial", None)
    out = np.zeros(len(pieces))

    if coefficients is not None:
        target = np.polynomial.Polynomial(coefficients)
        for j, (c, b, lo, hi) in enumerate(pieces):
            antideriv = (target * np.polynomial.Polynomial([c, b])).integ()
            out[j] = antideriv(hi) - antideriv(lo)
        return out

    def scalar_g(s):
        return float(np.asarray(g(np.array([s])), dtype=float).ravel()[0])

    knots = _knots(basis, bounds, breakpoints)
    for left, right in zip(knots[:-1], knots[1:]):
        # int g and int s*g on the piece; every element is c + b*s here
        i0, _ = integrate.quad(scalar_g, left, right, epsabs=1e-13, epsrel=1e-12, limit=200)
        i1, _ = integrate.quad(lambda s: s * scalar_g(s), left, right,
                               epsabs=1e-13, epsrel=1e-12, limit=200)
        for j, (c, b, lo, hi) in enumerate(pieces):
            if left >= lo and right <= hi:
                out[j] += c * i0 + b * i1
    return out
