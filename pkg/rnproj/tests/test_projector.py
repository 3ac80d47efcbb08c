"""
Tests for the projection estimator: least-squares variants, pricing and the
continuous-state limit.
"""

import numpy as np
import pytest

from rnproj.core.cm_estimator import CMInputs, cm_estimate
from rnproj.core.grid_basis import (
    BasisSet,
    Bond,
    Call,
    DesignMatrix,
    Put,
    StrikeSet,
    Underlying,
    build_state_grid,
    eval_design,
)
from rnproj.core.payoffs import indicator, put_payoff, square
from rnproj.core.projector import (
    FitMethod,
    MarketQuotes,
    basis_expectations,
    cauchy_weights,
    estimate_moment,
    fit,
    price,
    project_continuous,
)
from rnproj.models.black_scholes import BSParams, bs_price, bs_quotes, true_moment
from rnproj.utils.errors import DomainError, SingularSystemError, ValidationError


def test_put_call_parity_is_exact():
    """A put is bond*K - underlying + call, so its projection price is exact."""
    rng = np.random.default_rng(11)
    for _ in range(100):
        params = BSParams(spot=rng.uniform(0.5, 1.5), rate=rng.uniform(0.0, 0.1),
                          vol=rng.uniform(0.1, 0.5), maturity=rng.uniform(0.1, 2.0))
        strike = params.spot * rng.uniform(0.7, 1.3)
        forward = params.forward
        quotes = MarketQuotes.univariate(params.gross_rate, forward,
                                         calls={strike: bs_price(params, strike, "call")})
        basis = BasisSet((Bond(), Underlying("S"), Call("S", strike)))
        grid = build_state_grid((0.25 * min(strike, forward), 3.0 * max(strike, forward)), 401)
        result = estimate_moment(put_payoff(strike), basis, grid, quotes)
        expected = params.gross_rate * bs_price(params, strike, "put")
        assert result.estimate == pytest.approx(expected, abs=1e-9)
        assert result.portfolio.diagnostics.sup_residual < 1e-10


def test_projection_converges_faster_than_cm():
    """
    Strikes spaced h apart through the forward on [0.2F, 3.4F]: the CM error
    falls like h^2 and the projection error stays below it.
    """
    params = BSParams(spot=1.0, rate=0.05, vol=0.2, maturity=1.0)
    forward = params.forward
    truth = true_moment(params, square()).value
    sizes, cm_errors, projection_errors = [], [], []
    for m in (5, 10, 20, 40, 80):
        h = 0.8 * forward / m
        strikes = StrikeSet.split(forward + h * np.arange(-m, 3 * m + 1), forward)
        quotes = bs_quotes(params, strikes)
        cm = cm_estimate(CMInputs.from_payoff(square(), strikes, quotes))
        grid = build_state_grid((0.1 * forward, 4.0 * forward), 4001)
        projection = estimate_moment(square(), BasisSet.univariate(strikes), grid, quotes).estimate
        sizes.append(strikes.n_k)
        cm_errors.append(abs(cm - truth))
        projection_errors.append(abs(projection - truth))

    slope = np.polyfit(np.log(sizes), np.log(cm_errors), 1)[0]
    assert -2.6 <= slope <= -1.4
    bound = cm_errors[0] * sizes[0] ** 2
    for n, error, cm_error in zip(sizes, projection_errors, cm_errors):
        assert error <= cm_error
        assert error * n ** 2 <= bound


def test_uniform_strike_weights_track_curvature():
    """Option weights from the continuous projection approach h * g''(K) in the interior."""
    bounds = (1.0, 2.0)
    errors = []
    for n in (4, 8, 16, 32):
        h = 1.0 / n
        strikes = StrikeSet.split(1.0 + h * np.arange(1, n), 1.5)
        basis = BasisSet.univariate(strikes)
        portfolio = project_continuous(basis, bounds, np.exp)
        weights = portfolio.coefficients[2:]
        ks = np.array(basis.strikes())
        interior = np.abs(ks - 1.5) < 0.25
        errors.append(np.max(np.abs(weights[interior] - h * np.exp(ks[interior]))))
    for coarse, fine in zip(errors[:-1], errors[1:]):
        assert coarse / fine >= 6.0


class TestFit:
    grid = build_state_grid((0.5, 1.5), 201)
    basis = BasisSet.univariate(StrikeSet.split([0.8, 0.9, 1.1, 1.2], 1.0))

    def test_linear_target_is_replicated(self):
        design = eval_design(self.basis, self.grid)
        portfolio = fit(design, 2.0 + 3.0 * self.grid.points)
        np.testing.assert_allclose(portfolio.coefficients, [2.0, 3.0, 0, 0, 0, 0], atol=1e-10)
        assert portfolio.as_dict()["Bond"] == pytest.approx(2.0)

    def test_nonnegative_payoff_constraint(self):
        design = eval_design(self.basis, self.grid)
        target = indicator(1.0)(self.grid.points)
        ols = fit(design, target)
        constrained = fit(design, target, FitMethod.constrained(payoff_nonneg=True))
        assert constrained.diagnostics.min_fitted >= -1e-9
        assert constrained.diagnostics.l2_residual >= ols.diagnostics.l2_residual - 1e-10
        assert constrained.diagnostics.method == "constrained"

    def test_weight_floor(self):
        design = eval_design(self.basis, self.grid)
        target = indicator(1.0)(self.grid.points)
        floored = fit(design, target, FitMethod.constrained(payoff_nonneg=False, weight_floor=0.5))
        assert np.all(floored.coefficients >= -0.5 - 1e-9)

    def test_weighted_fit_matches_ols_on_exact_targets(self):
        design = eval_design(self.basis, self.grid)
        target = 1.0 - self.grid.points + np.maximum(self.grid.points - 1.1, 0.0)
        weights = cauchy_weights(self.grid, 1.0, 0.1)
        assert weights.sum() == pytest.approx(1.0)
        weighted = fit(design, target, FitMethod.wls(weights))
        np.testing.assert_allclose(weighted.coefficients, fit(design, target).coefficients, atol=1e-9)

    def test_spanned_columns_leave_fit_unchanged(self):
        design = eval_design(self.basis, self.grid)
        target = np.log(self.grid.points) + indicator(1.0)(self.grid.points)
        rng = np.random.default_rng(4)
        mixing = np.eye(design.shape[1])
        mixing[:, -1] += rng.uniform(-1.0, 1.0, design.shape[1])
        same_span = DesignMatrix(values=design.values @ mixing, basis=design.basis)
        fitted = design.values @ fit(design, target).coefficients
        refitted = same_span.values @ fit(same_span, target).coefficients
        assert np.max(np.abs(fitted - refitted)) < 1e-9

    def test_ols_scales_with_target(self):
        design = eval_design(self.basis, self.grid)
        target = self.grid.points ** 2
        np.testing.assert_allclose(fit(design, 3.7 * target).coefficients,
                                   3.7 * fit(design, target).coefficients, rtol=1e-10, atol=1e-12)

    def test_rank_deficiency_names_column(self):
        basis = BasisSet((Bond(), Underlying("S"), Put("S", 0.8), Call("S", 1.5)))
        grid = build_state_grid((0.5, 1.0), 101)
        with pytest.raises(SingularSystemError) as info:
            fit(eval_design(basis, grid), grid.points ** 2)
        assert info.value.offending == ("Call(S,1.5)",)
        assert info.value.exit_code == 3

    def test_too_few_states(self):
        grid = build_state_grid((0.5, 1.5), 2)
        with pytest.raises(SingularSystemError):
            fit(eval_design(self.basis, grid), grid.points)

    def test_target_length_checked(self):
        with pytest.raises(ValidationError):
            fit(eval_design(self.basis, self.grid), np.ones(3))

    def test_method_validation(self):
        with pytest.raises(ValidationError):
            FitMethod("wls")
        with pytest.raises(ValidationError):
            FitMethod.constrained(payoff_nonneg=False)
        with pytest.raises(ValidationError):
            FitMethod.constrained(weight_floor=-1.0)
        with pytest.raises(DomainError):
            cauchy_weights(self.grid, 1.0, 0.0)


class TestPricing:
    def test_basis_expectations(self):
        quotes = MarketQuotes.univariate(1.02, 1.05, {0.9: 0.01}, {1.1: 0.03})
        basis = BasisSet((Bond(), Underlying("S"), Put("S", 0.9), Call("S", 1.1)))
        np.testing.assert_allclose(basis_expectations(basis, quotes),
                                   [1.0, 1.05, 1.02 * 0.01, 1.02 * 0.03])

    def test_missing_quote(self):
        quotes = MarketQuotes.univariate(1.02, 1.05, {0.9: 0.01}, {})
        basis = BasisSet((Bond(), Underlying("S"), Call("S", 1.1)))
        with pytest.raises(ValidationError, match="Call"):
            basis_expectations(basis, quotes)

    def test_negative_price_rejected(self):
        with pytest.raises(ValidationError):
            MarketQuotes.univariate(1.0, 1.0, {0.9: -0.01})

    def test_price_is_linear(self, bs_basis, bs_market):
        grid = build_state_grid((40.0, 250.0), 801)
        portfolio = fit(eval_design(bs_basis, grid), grid.points)
        assert price(portfolio, bs_market) == pytest.approx(bs_market.forward(), rel=1e-10)


def test_continuous_and_fine_grid_agree(bs_basis, bs_market):
    bounds = (40.0, 250.0)
    continuous = estimate_moment(square(), bs_basis, bounds, bs_market).estimate
    gridded = estimate_moment(square(), bs_basis, build_state_grid(bounds, 20001), bs_market).estimate
    assert gridded == pytest.approx(continuous, rel=1e-6)


def test_continuous_projection_is_ols_only(bs_basis, bs_market):
    with pytest.raises(ValidationError):
        estimate_moment(square(), bs_basis, (40.0, 250.0), bs_market,
                        FitMethod.constrained(payoff_nonneg=True))
