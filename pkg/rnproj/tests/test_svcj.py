import json
import math

import numpy as np
import pytest

from config import settings
from rnproj.models.svcj import SVCJParams, svcj_simulate
from rnproj.utils.errors import DomainError, ParseError, ValidationError


@pytest.fixture
def params():
    return SVCJParams.from_json()


def test_shipped_calibration(params):
    assert params.time_unit == "daily"
    assert params.lam == pytest.approx(1.512)
    assert params.kappa_annual == pytest.approx(0.0570 * settings.TRADING_DAYS)
    assert params.sigma_v_annual == pytest.approx(0.08 * math.sqrt(settings.TRADING_DAYS))
    assert params.default_v0() == pytest.approx(0.0062 + 1.512 * 0.2213 / (0.0570 * 252))


def test_dict_round_trip(params):
    data = params.to_dict()
    assert "lambda" in data and "lam" not in data
    assert SVCJParams.from_dict(data) == params


def test_missing_and_unknown_fields(params):
    data = params.to_dict()
    del data["kappa"]
    data["nu"] = 1.0
    with pytest.raises(ValidationError, match="kappa"):
        SVCJParams.from_dict(data)


def test_invalid_values(params):
    data = params.to_dict()
    data["rho"] = -1.5
    with pytest.raises(DomainError):
        SVCJParams.from_dict(data)
    data["rho"] = 0.0
    data["time_unit"] = "weekly"
    with pytest.raises(ValidationError):
        SVCJParams.from_dict(data)


def test_broken_calibration_file(tmp_path):
    path = tmp_path / "svcj.json"
    path.write_text('{\n  "kappa": 0.05,\n  oops\n}\n')
    with pytest.raises(ParseError) as info:
        SVCJParams.from_json(path)
    assert info.value.line == 3


def test_annual_units_used_as_given(params):
    annual = SVCJParams.from_dict({**params.to_dict(), "time_unit": "annual", "kappa": 3.0})
    assert annual.kappa_annual == 3.0
    assert annual.sigma_v_annual == params.sigma_v


class TestSimulation:
    def test_same_seed_same_paths_for_any_thread_count(self, params):
        kwargs = dict(s0=1.0, v0=None, maturity=0.1, n_paths=45_000, n_steps=5, seed=17)
        single = svcj_simulate(params, threads=1, **kwargs)
        pooled = svcj_simulate(params, threads=3, **kwargs)
        np.testing.assert_array_equal(single.values, pooled.values)
        assert single.values.size == 45_000
        assert single.metadata["block_size"] == 20_000

    def test_seed_changes_paths(self, params):
        a = svcj_simulate(params, 1.0, None, 0.1, 1000, 5, seed=1)
        b = svcj_simulate(params, 1.0, None, 0.1, 1000, 5, seed=2)
        assert not np.array_equal(a.values, b.values)

    def test_discounted_price_is_a_martingale(self, params):
        maturity = 0.25
        sample = svcj_simulate(params, 1.0, None, maturity, 100_000, 20, seed=3)
        se = np.std(sample.values, ddof=1) / math.sqrt(sample.values.size)
        assert abs(sample.mean - math.exp(params.r * maturity)) <= 5 * se

    def test_default_step_count(self, params):
        sample = svcj_simulate(params, 1.0, 0.04, 0.5, 100, None, seed=0)
        assert sample.n_steps == 126

    def test_rejects_negative_variance(self, params):
        with pytest.raises(DomainError):
            svcj_simulate(params, 1.0, -0.01, 1.0, 10, 5, seed=0)

    def test_rejects_empty_run(self, params):
        with pytest.raises(ValidationError):
            svcj_simulate(params, 1.0, None, 1.0, 0, 5, seed=0)


def test_calibration_file_is_json():
    data = json.loads(settings.SVCJ_CALIBRATION_PATH.read_text())
    assert data["time_unit"] == "daily"
