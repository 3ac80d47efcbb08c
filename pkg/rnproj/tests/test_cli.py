"""
Command line tests: every command runs through main() with files in tmp_path.
"""

import json

import pandas as pd
import pytest

from rnproj.cli import main

RAW_CHAIN = (
    "date,expiry,strike,side,bid,ask,underlying,forward\n"
    "2024-01-02,2024-03-15,90,put,0.9,1.1,99,100\n"
    "2024-01-02,2024-03-15,95,put,1.9,2.1,99,100\n"
    "2024-01-02,2024-03-15,105,put,6.0,6.4,99,100\n"
    "2024-01-02,2024-03-15,105,call,1.9,2.1,99,100\n"
    "2024-01-02,2024-03-15,110,call,0.9,1.1,99,100\n"
)


@pytest.fixture
def quotes_file(tmp_path, bs_quote_dict):
    path = tmp_path / "quotes.json"
    path.write_text(json.dumps(bs_quote_dict))
    return path


def test_estimate_moment(tmp_path, quotes_file, bs_params):
    out = tmp_path / "moment.json"
    assert main(["estimate-moment", "--payoff", "svix", "--quotes", str(quotes_file),
                 "--output", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["index"] == pytest.approx(bs_params.vol, abs=0.02)
    assert "cm_estimate" in report
    assert report["config"]["bounds_defaulted"] is True
    assert report["config"]["quotes"] == str(quotes_file)
    assert "Bond" in report["portfolio"]


def test_estimate_moment_to_stdout(quotes_file, capsys):
    assert main(["estimate-moment", "--payoff", "power:1", "--quotes", str(quotes_file),
                 "--bounds", "30", "250", "--grid-points", "501"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["estimate"] == pytest.approx(report["config"]["forward"], rel=1e-10)
    assert report["config"]["grid_points"] == 501


def test_constrained_fit_option(quotes_file, capsys):
    assert main(["estimate-moment", "--payoff", "indicator:100", "--quotes", str(quotes_file),
                 "--nonneg"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["config"]["method"]["kind"] == "constrained"
    assert report["diagnostics"]["min_fitted"] >= -1e-9


def test_malformed_json_exits_with_two(tmp_path, capsys):
    path = tmp_path / "quotes.json"
    path.write_text('{"gross_rate": 1.0,\n "forward": }')
    assert main(["estimate-moment", "--payoff", "svix", "--quotes", str(path)]) == 2
    assert "error:" in capsys.readouterr().err


def test_singular_design_exits_with_three(tmp_path, capsys):
    path = tmp_path / "quotes.json"
    path.write_text(json.dumps({"gross_rate": 1.0, "forward": 100.0,
                                "puts": {"50": 0.01, "90": 1.0}, "calls": {"110": 1.5}}))
    code = main(["estimate-moment", "--payoff", "svix", "--quotes", str(path), "--bounds", "80", "150"])
    assert code == 3
    assert "Put(S,50)" in capsys.readouterr().err


def test_estimate_distribution(tmp_path, quotes_file):
    out = tmp_path / "dist.csv"
    assert main(["estimate-distribution", "--quotes", str(quotes_file), "--eval-points", "101",
                 "--rearrange", "--output", str(out)]) == 0
    frame = pd.read_csv(out)
    assert len(frame) == 101
    assert frame["monotonized"].all()
    assert frame["cdf"].is_monotonic_increasing


def test_chain_csv_quotes(tmp_path, capsys):
    chain = tmp_path / "chain.csv"
    chain.write_text(RAW_CHAIN)
    assert main(["estimate-moment", "--payoff", "power:1", "--quotes", str(chain), "--gross-rate", "1.0"]) == 0
    assert json.loads(capsys.readouterr().out)["estimate"] == pytest.approx(100.0, rel=1e-10)
    assert main(["estimate-moment", "--payoff", "power:1", "--quotes", str(chain)]) == 2


def test_fx_corr(tmp_path, fx_market, fx_bounds, capsys):
    path = tmp_path / "fx.json"
    path.write_text(json.dumps(fx_market.to_dict()))
    argv = ["fx-corr", "--market", str(path), "--grid-points", "81",
            "--bounds1", *map(str, fx_bounds[0]), "--bounds2", *map(str, fx_bounds[1])]
    assert main(argv) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["corr"] == pytest.approx(0.5, abs=0.15)
    assert 0.0 <= report["tail"]["joint"] <= 1.0
    assert report["config"]["market"] == str(path)


def test_clean(tmp_path):
    raw, out = tmp_path / "raw.csv", tmp_path / "clean.csv"
    raw.write_text(RAW_CHAIN)
    assert main(["clean", "--input", str(raw), "--output", str(out), "--check-parity",
                 "--gross-rate", "1.0"]) == 0
    frame = pd.read_csv(out)
    assert list(zip(frame["side"], frame["strike"])) == [("call", 105), ("call", 110), ("put", 90), ("put", 95)]
    assert (frame["forward"] == 100).all()


def test_fx_smile(tmp_path):
    pillars, out = tmp_path / "pillars.csv", tmp_path / "smile.csv"
    pillars.write_text(
        "date,tenor,pair,atm_vol,rr_10,rr_25,bf_10,bf_25,spot,domestic_rate,foreign_rate\n"
        "2024-01-02,3M,EURUSD,0.08,-0.009,-0.005,0.006,0.002,1.10,0.05,0.035\n"
        "2024-01-02,1M,GBPUSD,0.07,-0.006,-0.003,0.004,0.0015,1.27,0.05,0.045\n"
    )
    assert main(["fx-smile", "--pillars", str(pillars), "--output", str(out)]) == 0
    frame = pd.read_csv(out)
    assert len(frame) == 10
    assert list(frame["label"][:5]) == ["10P", "25P", "ATM", "25C", "10C"]


@pytest.mark.parametrize("command", [["experiments", "run"], ["simulate"]])
def test_experiments_run(tmp_path, capsys, command):
    config = tmp_path / "small.json"
    config.write_text(json.dumps({
        "study": "univariate_convergence", "n_k": [10], "seed": 1,
        "params": {"grid_points": 401},
    }))
    out = tmp_path / "out"
    assert main(command + ["--config", str(config), "--out", str(out), "--threads", "1"]) == 0
    assert f"Wrote results to {out}" in capsys.readouterr().out
    assert (out / "results.csv").exists()


def test_experiments_need_a_study(capsys):
    assert main(["experiments", "run"]) == 2
    assert "error:" in capsys.readouterr().err


def test_missing_quote_file(tmp_path):
    assert main(["estimate-moment", "--payoff", "svix", "--quotes", str(tmp_path / "nope.json")]) == 2
