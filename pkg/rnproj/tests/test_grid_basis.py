"""
Tests for strike sets, state grids, bases and the closed-form inner products.
"""

import numpy as np
import pytest
from scipy import integrate

from rnproj.core.grid_basis import (
    BasisSet,
    Bond,
    Call,
    CrossCall,
    Put,
    StrikeSet,
    Underlying,
    antiderivative_matrix,
    build_state_grid,
    eval_design,
    gram_analytic,
    inner_products,
    tensor_states,
)
from rnproj.core.payoffs import Payoff, square
from rnproj.utils.errors import DomainError, ValidationError


class TestStrikeSet:
    def test_split_at_forward(self):
        strikes = StrikeSet.split([90, 100, 110, 120], 100.0)
        assert strikes.put_strikes == (90.0, 100.0)
        assert strikes.call_strikes == (110.0, 120.0)
        assert strikes.n_k == 4

    def test_duplicate_strikes_rejected(self):
        with pytest.raises(ValidationError):
            StrikeSet.split([90, 90, 110], 100.0)

    def test_put_above_forward_rejected(self):
        with pytest.raises(ValidationError):
            StrikeSet((90.0, 105.0), (110.0,), 100.0)

    def test_nonpositive_forward(self):
        with pytest.raises(DomainError):
            StrikeSet((), (1.0,), 0.0)


class TestStateGrid:
    def test_uniform_grid(self):
        grid = build_state_grid((1.0, 2.0), 11)
        assert grid.size == 11
        assert grid.mesh == pytest.approx(0.1)
        assert grid.is_uniform()
        assert grid.covers([1.5])
        assert not grid.covers([2.0])

    @pytest.mark.parametrize("bounds", [(0.0, 1.0), (-1.0, 1.0), (2.0, 1.0)])
    def test_bad_bounds(self, bounds):
        with pytest.raises(DomainError):
            build_state_grid(bounds, 11)

    def test_too_few_points(self):
        with pytest.raises(DomainError):
            build_state_grid((1.0, 2.0), 1)

    def test_explicit_points_must_span_bounds(self):
        with pytest.raises(ValidationError):
            build_state_grid((1.0, 2.0), points=[1.0, 1.5, 1.9])
        grid = build_state_grid((1.0, 2.0), points=[1.0, 1.2, 2.0])
        assert not grid.is_uniform()

    def test_points_are_read_only(self):
        grid = build_state_grid((1.0, 2.0), 5)
        with pytest.raises(ValueError):
            grid.points[0] = 3.0


class TestBasisSet:
    def test_univariate_order(self):
        basis = BasisSet.univariate(StrikeSet.split([80, 90, 110], 100.0))
        assert basis.labels() == ["Bond", "Underlying(S)", "Put(S,80)", "Put(S,90)", "Call(S,110)"]
        assert basis.is_univariate
        assert basis.has_bond

    def test_duplicate_element(self):
        with pytest.raises(ValidationError):
            BasisSet((Bond(), Put("S", 1.0), Put("S", 1.0)))

    def test_put_and_call_at_same_strike(self):
        with pytest.raises(ValidationError, match="share a strike"):
            BasisSet((Bond(), Underlying("S"), Put("S", 1.0), Call("S", 1.0)))

    def test_bond_must_come_first(self):
        with pytest.raises(ValidationError):
            BasisSet((Underlying("S"), Bond()))

    @pytest.mark.parametrize("elements", [
        (Bond(), Underlying("S"), Put("S", 0.9), Put("S", 0.8)),
        (Bond(), Underlying("S"), Call("S", 1.2), Call("S", 1.1)),
        (Bond(), Underlying("S"), Call("S", 1.1), Put("S", 0.9)),
        (Bond(), CrossCall("S1", "S2", 1.0), Call("S1", 1.1)),
        (Bond(), CrossCall("S1", "S2", 1.0), CrossCall("S1", "S2", 0.9)),
    ])
    def test_option_order_enforced(self, elements):
        with pytest.raises(ValidationError, match="order|come"):
            BasisSet(elements)

    def test_legs_keep_their_own_order(self):
        basis = BasisSet((Bond(), Underlying("S1"), Call("S1", 1.2), Underlying("S2"),
                          Put("S2", 0.8), Call("S2", 1.1), CrossCall("S1", "S2", 0.9)))
        assert basis.size == 7

    def test_cross_call_needs_two_assets(self):
        with pytest.raises(ValidationError):
            CrossCall("S1", "S1", 1.0)


def test_eval_design_columns():
    grid = build_state_grid((0.5, 1.5), 101)
    basis = BasisSet((Bond(), Underlying("S"), Put("S", 0.9), Call("S", 1.1)))
    design = eval_design(basis, grid)
    s = grid.points
    assert design.shape == (101, 4)
    np.testing.assert_allclose(design.values[:, 0], 1.0)
    np.testing.assert_allclose(design.values[:, 1], s)
    np.testing.assert_allclose(design.values[:, 2], np.maximum(0.9 - s, 0.0))
    np.testing.assert_allclose(design.values[:, 3], np.maximum(s - 1.1, 0.0))


def test_tensor_states_first_asset_outer():
    grids = {"S1": build_state_grid((1.0, 2.0), 2), "S2": build_state_grid((3.0, 4.0), 3)}
    states, size = tensor_states(grids, ["S1", "S2"])
    assert size == 6
    np.testing.assert_array_equal(states["S1"], [1, 1, 1, 2, 2, 2])
    np.testing.assert_array_equal(states["S2"], [3, 3.5, 4, 3, 3.5, 4])


def test_multi_asset_design_needs_all_grids():
    basis = BasisSet((Bond(), Underlying("S1"), Underlying("S2")))
    with pytest.raises(ValidationError):
        eval_design(basis, {"S1": build_state_grid((1.0, 2.0), 3)})


class TestInnerProducts:
    bounds = (0.5, 2.0)
    basis = BasisSet((Bond(), Underlying("S"), Put("S", 1.0), Call("S", 1.5)))

    def test_gram_closed_form(self):
        gram = gram_analytic(self.basis, self.bounds)
        assert gram[0, 0] == pytest.approx(1.5)
        assert gram[0, 1] == pytest.approx(1.875)
        assert gram[1, 1] == pytest.approx(2.625)
        assert gram[2, 2] == pytest.approx(0.5 ** 3 / 3.0)
        assert gram[3, 3] == pytest.approx(0.5 ** 3 / 3.0)
        assert gram[2, 3] == 0.0
        np.testing.assert_allclose(gram, gram.T)

    def test_gram_matches_quadrature(self):
        gram = gram_analytic(self.basis, self.bounds)
        elements = list(self.basis)
        for i, a in enumerate(elements):
            for j, b in enumerate(elements):
                value, _ = integrate.quad(
                    lambda s: a.evaluate({"S": np.array([s])}, 1)[0] * b.evaluate({"S": np.array([s])}, 1)[0],
                    *self.bounds, points=[1.0, 1.5],
                )
                assert gram[i, j] == pytest.approx(value, abs=1e-10)

    def test_discrete_gram_converges(self):
        grid = build_state_grid(self.bounds, 100_001)
        x = eval_design(self.basis, grid).values
        gram = gram_analytic(self.basis, self.bounds)
        assert np.max(np.abs(grid.mesh * x.T @ x - gram)) < 1e-4
        # trapezoid row weights remove the O(mesh) endpoint term
        rows = np.ones(grid.size)
        rows[[0, -1]] = 0.5
        assert np.max(np.abs(grid.mesh * (x * rows[:, np.newaxis]).T @ x - gram)) < 1e-6

    def test_antiderivative(self):
        rows = antiderivative_matrix(self.basis, self.bounds, [0.5, 1.0, 2.0])
        np.testing.assert_allclose(rows[0], 0.0)
        assert rows[1, 2] == pytest.approx(0.125)
        assert rows[2, 0] == pytest.approx(1.5)
        assert rows[2, 3] == pytest.approx(0.125)

    def test_polynomial_and_quadrature_paths_agree(self):
        exact = inner_products(self.basis, self.bounds, square())
        generic = inner_products(self.basis, self.bounds, Payoff("sq", lambda s: s ** 2))
        np.testing.assert_allclose(exact, generic, rtol=1e-9, atol=1e-12)

    def test_strike_outside_bounds(self):
        with pytest.raises(DomainError):
            gram_analytic(self.basis, (0.5, 1.2))

    def test_multi_asset_basis_rejected(self):
        basis = BasisSet((Bond(), Underlying("S1"), Underlying("S2")))
        with pytest.raises(ValidationError):
            gram_analytic(basis, self.bounds)
