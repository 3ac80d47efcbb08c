from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from rnproj.core.grid_basis import BasisSet, StrikeSet
from rnproj.core.payoffs import call_payoff, indicator, log, power
from rnproj.core.projector import estimate_moment
from rnproj.core.rn_distribution import (
    RNDistribution,
    estimate_cdf,
    moment_from_distribution,
    rearrange_monotone,
)
from rnproj.utils.errors import DomainError, ValidationError

BOUNDS = (40.0, 250.0)


@pytest.fixture
def dist(bs_basis, bs_market):
    return estimate_cdf(bs_basis, BOUNDS, bs_market, np.linspace(*BOUNDS, 421))


def test_cdf_boundary_values(dist):
    assert abs(dist.cdf[0]) <= 1e-8
    assert abs(dist.cdf[-1] - 1.0) <= 1e-8
    assert not dist.monotonized


def test_cdf_tracks_lognormal(bs_params, dist):
    inside = (dist.eval_points > 70.0) & (dist.eval_points < 150.0)
    np.testing.assert_allclose(dist.cdf[inside], bs_params.cdf(dist.eval_points[inside]), atol=0.03)


def test_pdf_is_linear_between_strikes(dist):
    piece = (dist.eval_points > 100.5) & (dist.eval_points < 104.5)
    x, y = dist.eval_points[piece], dist.pdf[piece]
    assert x.size >= 3
    slope, intercept = np.polyfit(x, y, 1)
    np.testing.assert_allclose(y, slope * x + intercept, atol=1e-10)


def test_moment_consistency(bs_basis, bs_market, dist):
    rng = np.random.default_rng(3)
    targets = [power(n) for n in (1, 2, 3, 1.5, 0.5)] + [log()]
    targets += [indicator(x) for x in rng.uniform(45.0, 240.0, 7)]
    targets += [call_payoff(k) for k in rng.uniform(45.0, 240.0, 7)]
    for g in targets:
        projected = estimate_moment(g, bs_basis, BOUNDS, bs_market).estimate
        integrated = moment_from_distribution(g, dist)
        assert abs(projected - integrated) <= 1e-6 * (1.0 + abs(projected)), g.name


def test_default_eval_points(bs_basis, bs_market):
    result = estimate_cdf(bs_basis, BOUNDS, bs_market)
    assert result.eval_points.size == 501
    assert result.eval_points[0] == BOUNDS[0]
    assert result.eval_points[-1] == BOUNDS[1]


def test_needs_bond(bs_strikes, bs_market):
    basis = BasisSet.univariate(bs_strikes, include_bond=False)
    with pytest.raises(ValidationError):
        estimate_cdf(basis, BOUNDS, bs_market)


def test_eval_points_checked(bs_basis, bs_market):
    with pytest.raises(DomainError):
        estimate_cdf(bs_basis, BOUNDS, bs_market, [30.0, 100.0])
    with pytest.raises(ValidationError):
        estimate_cdf(bs_basis, BOUNDS, bs_market, [100.0, 90.0])


def test_strike_outside_bounds(bs_basis, bs_market):
    with pytest.raises(DomainError):
        estimate_cdf(bs_basis, (70.0, 250.0), bs_market)


class TestRearrangement:
    def _raw(self, cdf):
        x = np.linspace(1.0, 2.0, len(cdf))
        basis = BasisSet.univariate(StrikeSet((1.5,), (), 1.6))
        return RNDistribution(
            eval_points=x, cdf=np.asarray(cdf, dtype=float), pdf=np.zeros(len(cdf)),
            monotonized=False, basis=basis, bounds=(1.0, 2.0),
            density_coefficients=np.zeros(len(basis)),
        )

    def test_sorts_and_clips(self):
        result = rearrange_monotone(self._raw([-0.01, 0.3, 0.2, 0.9, 1.02]))
        np.testing.assert_allclose(result.cdf, [0.0, 0.2, 0.3, 0.9, 1.0])
        assert result.monotonized
        assert np.all(np.diff(result.cdf) >= 0)

    def test_monotone_input_unchanged(self):
        raw = self._raw([0.0, 0.25, 0.5, 0.75, 1.0])
        result = rearrange_monotone(raw)
        np.testing.assert_array_equal(result.cdf, raw.cdf)
        np.testing.assert_array_equal(result.pdf, raw.pdf)

    def test_estimated_cdf_rearranged(self, dist):
        result = rearrange_monotone(dist)
        assert np.all(np.diff(result.cdf) >= 0)
        assert result.cdf.min() >= 0.0 and result.cdf.max() <= 1.0

    def test_rearranging_twice_changes_nothing(self, dist):
        once = rearrange_monotone(dist)
        twice = rearrange_monotone(once)
        np.testing.assert_array_equal(twice.cdf, once.cdf)
        np.testing.assert_array_equal(twice.pdf, once.pdf)

    def test_moves_no_further_from_lognormal(self, bs_params, dist):
        wobble = 0.03 * np.sin(dist.eval_points / 3.0)
        raw = replace(dist, cdf=dist.cdf + wobble)
        truth = bs_params.cdf(dist.eval_points)
        before = np.max(np.abs(raw.cdf - truth))
        after = np.max(np.abs(rearrange_monotone(raw).cdf - truth))
        assert np.any(np.diff(raw.cdf) < 0)
        assert after <= before + 1e-15

    def test_moment_uses_grid_values(self, dist, caplog):
        value = moment_from_distribution(power(1), rearrange_monotone(dist))
        assert value == pytest.approx(moment_from_distribution(power(1), dist), rel=0.02)
        assert "trapezoidal" in caplog.text


def test_to_csv(dist, tmp_path):
    path = tmp_path / "dist.csv"
    dist.to_csv(path)
    frame = pd.read_csv(path)
    assert list(frame.columns) == ["x", "cdf", "pdf", "monotonized"]
    assert len(frame) == dist.eval_points.size
