"""
Tests for the experiment configuration, the three studies and the runner.

Full-size reproductions are marked slow; set RNP_RUN_SLOW=1 to run them.
"""

import json

import numpy as np
import pytest

from rnproj.experiments.config import (
    ExperimentConfig,
    ResultTable,
    replication_rng,
    run_replications,
)
from rnproj.experiments.fx_recovery import fx_draw, run_fx_recovery
from rnproj.experiments.runner import run_experiment
from rnproj.experiments.sector import sector_run, run_sector_mse
from rnproj.experiments.univariate import run_univariate_convergence
from rnproj.models.joint_normal import JointNormalFX
from rnproj.utils.errors import ParseError, ValidationError

SMALL_UNIVARIATE = {
    "study": "univariate_convergence",
    "strike_design": "uniform_random",
    "n_k": [10, 20],
    "n_mc": 3,
    "seed": 5,
    "params": {"grid_points": 2001},
}


def _mean_errors(table):
    frame = table.to_frame()
    return frame.groupby(["cell", "quantity", "estimator"])["error"].mean()


class TestConfig:
    @pytest.mark.parametrize("study", ["univariate_convergence", "fx_recovery", "sector_mse"])
    def test_shipped_defaults_load(self, study):
        config = ExperimentConfig.default(study)
        assert config.study == study
        assert config.seed == 0

    def test_shipped_univariate_default(self):
        config = ExperimentConfig.default("univariate_convergence")
        assert config.n_k == tuple(range(10, 140, 10))
        assert config.range_fraction == 0.9
        assert config.n_mc == 500

    @pytest.mark.parametrize("overrides", [
        {"study": "nope"},
        {"model": "Heston"},
        {"strike_design": "chebyshev"},
        {"range_mode": "all"},
        {"n_mc": 0},
        {"n_k": [2, 10]},
        {"range_fraction": 1.0},
        {"seed": -1},
    ])
    def test_invalid_values(self, overrides):
        with pytest.raises(ValidationError):
            ExperimentConfig.from_dict({"study": "fx_recovery", **overrides})

    def test_unknown_key(self):
        with pytest.raises(ValidationError, match="strikes"):
            ExperimentConfig.from_dict({"study": "fx_recovery", "strikes": 5})

    def test_missing_study(self):
        with pytest.raises(ValidationError):
            ExperimentConfig.from_dict({"n_mc": 5})

    def test_bad_file(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"study": "fx_recovery",\n "n_mc": }')
        with pytest.raises(ParseError) as info:
            ExperimentConfig.from_json(path)
        assert info.value.line == 2
        path.write_text('{"study": "fx_recovery", "n_mc": 0}')
        with pytest.raises(ParseError):
            ExperimentConfig.from_json(path)

    def test_dict_round_trip(self):
        config = ExperimentConfig.from_dict(SMALL_UNIVARIATE)
        assert ExperimentConfig.from_dict(config.to_dict()) == config


class TestReplications:
    def test_streams_are_reproducible(self):
        a = replication_rng(3, 1, 2).standard_normal(5)
        b = replication_rng(3, 1, 2).standard_normal(5)
        np.testing.assert_array_equal(a, b)

    def test_streams_are_distinct(self):
        draws = {tuple(replication_rng(3, c, r).standard_normal(3)) for c in range(3) for r in range(3)}
        assert len(draws) == 9

    def test_pool_keeps_task_order(self):
        rows = run_replications(lambda n: [{"n": n}, {"n": -n}], [1, 2, 3], threads=3)
        assert rows == [{"n": 1}, {"n": -1}, {"n": 2}, {"n": -2}, {"n": 3}, {"n": -3}]


def test_result_table_summary():
    table = ResultTable("demo")
    for r, error in enumerate([0.1, 0.3]):
        table.add("c", r, "svix", "cm", 1.0 + error, 1.0, error)
    summary = table.summary()
    assert summary.loc[0, "count"] == 2
    assert summary.loc[0, "mean"] == pytest.approx(0.2)
    assert summary.loc[0, "mean_estimate"] == pytest.approx(1.2)


class TestUnivariate:
    def test_projection_beats_cm_at_thirty_strikes(self):
        config = ExperimentConfig(study="univariate_convergence", n_k=(30,))
        errors = _mean_errors(run_univariate_convergence(config, threads=1))
        for quantity in ("svix", "vix"):
            assert errors[("n_k=030", quantity, "projection")] < errors[("n_k=030", quantity, "cm")]

    def test_equal_spacing_has_one_replication(self):
        config = ExperimentConfig(study="univariate_convergence", n_k=(10, 20), n_mc=7,
                                  params={"grid_points": 401})
        frame = run_univariate_convergence(config, threads=2).to_frame()
        assert len(frame) == 2 * 2 * 2
        assert set(frame["replication"]) == {0}
        assert (frame["error"] >= 0).all()

    def test_varying_range_cells(self):
        config = ExperimentConfig(study="univariate_convergence", range_mode="varying_range",
                                  range_fractions=(0.5, 0.9), params={"grid_points": 401})
        frame = run_univariate_convergence(config, threads=1).to_frame()
        assert sorted(set(frame["cell"])) == ["range=0.50", "range=0.90"]


class TestFXRecovery:
    def test_single_draw(self):
        draw = fx_draw(JointNormalFX(rho=0.5), grid_points=81)
        assert draw["corr_est"] == pytest.approx(draw["corr_true"], abs=0.15)
        assert 0.0 <= draw["tail_est"] <= 1.0
        assert draw["tail_independent"] <= draw["tail_est"] + 0.05

    def test_small_run(self):
        config = ExperimentConfig(study="fx_recovery", n_mc=3, params={"grid_points": 81})
        frame = run_fx_recovery(config, threads=2).to_frame()
        assert len(frame) == 2 * 3 * 3
        assert set(frame["cell"]) == {"normal", "nonlinear"}
        tails = frame[frame["quantity"] == "tail"]
        assert tails["estimate"].between(0.0, 1.0).all()

    def test_unknown_design(self):
        config = ExperimentConfig(study="fx_recovery", n_mc=1, params={"designs": ["copula"]})
        with pytest.raises(ValidationError):
            run_fx_recovery(config)


class TestSector:
    def test_single_run(self):
        run = sector_run(np.random.default_rng(0), d=4, n_draws=20_000)
        assert run["mse_projection"] >= 0.0
        assert run["mse_equicorrelation"] >= 0.0
        assert 0.0 <= run["shrinkage"] <= 1.0
        assert run["max_addition_residual"] < 1e-8

    def test_small_run(self):
        config = ExperimentConfig(study="sector_mse", n_mc=2, params={"d": 4, "n_draws": 20_000})
        frame = run_sector_mse(config, threads=2).to_frame()
        assert len(frame) == 2 * 4
        assert set(frame["estimator"]) == {"equicorrelation", "projection", "projection_shrunk"}


class TestRunner:
    def test_needs_study_or_config(self):
        with pytest.raises(ValidationError):
            run_experiment()

    def test_writes_tables(self, tmp_path):
        config_path = tmp_path / "small.json"
        config_path.write_text(json.dumps(SMALL_UNIVARIATE))
        out = run_experiment(config_path=config_path, seed=9, out_dir=tmp_path / "out", threads=2)
        assert sorted(p.name for p in out.iterdir()) == ["meta.json", "results.csv", "summary.csv"]
        meta = json.loads((out / "meta.json").read_text())
        assert meta["seed"] == 9
        assert "numpy" in meta["versions"]

    def test_identical_seeds_give_identical_files(self, tmp_path):
        config_path = tmp_path / "small.json"
        config_path.write_text(json.dumps(SMALL_UNIVARIATE))
        first = run_experiment(config_path=config_path, out_dir=tmp_path / "a", threads=1)
        second = run_experiment(config_path=config_path, out_dir=tmp_path / "b", threads=4)
        for name in ("results.csv", "summary.csv", "meta.json"):
            assert (first / name).read_bytes() == (second / name).read_bytes()

    def test_seed_changes_results(self, tmp_path):
        config_path = tmp_path / "small.json"
        config_path.write_text(json.dumps(SMALL_UNIVARIATE))
        first = run_experiment(config_path=config_path, out_dir=tmp_path / "a", threads=1)
        second = run_experiment(config_path=config_path, seed=6, out_dir=tmp_path / "b", threads=1)
        assert (first / "results.csv").read_bytes() != (second / "results.csv").read_bytes()


# ============================================================================
# FULL-SIZE REPRODUCTIONS
# ============================================================================

@pytest.mark.slow
def test_fixed_range_errors_at_130_strikes():
    config = ExperimentConfig(study="univariate_convergence", n_k=(130,))
    errors = _mean_errors(run_univariate_convergence(config))
    for quantity in ("svix", "vix"):
        assert errors[("n_k=130", quantity, "projection")] <= 0.04
        assert 0.05 <= errors[("n_k=130", quantity, "cm")] <= 0.20


@pytest.mark.slow
def test_widest_range_ratio():
    config = ExperimentConfig(study="univariate_convergence", range_mode="varying_range",
                              range_fractions=(0.99,))
    errors = _mean_errors(run_univariate_convergence(config))
    cm = errors[("range=0.99", "svix", "cm")] + errors[("range=0.99", "vix", "cm")]
    projection = errors[("range=0.99", "svix", "projection")] + errors[("range=0.99", "vix", "projection")]
    assert cm / projection >= 20


@pytest.mark.slow
def test_fx_recovery_reproduction():
    frame = run_fx_recovery(ExperimentConfig.default("fx_recovery")).to_frame()
    projection = frame[frame["estimator"] == "projection"]
    mae = projection.groupby(["cell", "quantity"])["error"].mean()
    for design in ("normal", "nonlinear"):
        assert mae[(design, "corr")] <= 0.05
        assert mae[(design, "tail")] <= 0.01


@pytest.mark.slow
def test_sector_reproduction():
    frame = run_sector_mse(ExperimentConfig.default("sector_mse")).to_frame()
    means = frame.groupby(["quantity", "estimator"])["estimate"].mean()
    equi = means[("corr_mse", "equicorrelation")]
    projection = means[("corr_mse", "projection")]
    assert projection < equi
    assert equi == pytest.approx(0.1436, rel=0.2)
    assert projection == pytest.approx(0.1284, rel=0.2)
    assert 0.10 <= means[("within_run_corr", "projection")] <= 0.30
