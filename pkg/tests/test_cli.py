import json

import pytest

from qlbs.bsm import bsm_put_price
from qlbs.cli import main
from qlbs.market import load_paths


def run_cli(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


class TestPriceBs:
    def test_json_output(self, capsys):
        code, out = run_cli(capsys, "price-bs", "--sigma", "0.15")
        assert code == 0
        payload = json.loads(out)
        assert payload["price"] == pytest.approx(
            bsm_put_price(100, 100, 0.03, 0.15, 1.0))
        assert -1.0 <= payload["delta"] <= 0.0

    def test_csv_output(self, capsys):
        code, out = run_cli(capsys, "price-bs", "--format", "csv")
        header, values = out.strip().splitlines()
        assert header.split(",") == ["price", "delta", "d1", "d2"]
        assert len(values.split(",")) == 4


class TestSimulate:
    def test_writes_loadable_csv(self, tmp_path, capsys):
        dest = tmp_path / "paths.csv"
        code, _ = run_cli(capsys, "simulate", "--paths", "8", "--steps", "5",
                          "--seed", "3", "--out", str(dest))
        assert code == 0
        paths = load_paths(dest)
        assert paths.n_paths == 8
        assert paths.n_steps == 5


class TestSolverCommands:
    def test_price_dp(self, tmp_path, capsys):
        coeffs = tmp_path / "coeffs.csv"
        code, out = run_cli(capsys, "price-qlbs-dp", "--paths", "500",
                            "--seed", "2", "--dump-coefficients", str(coeffs))
        assert code == 0
        payload = json.loads(out)
        assert 0.0 < payload["price"] < 100.0
        assert payload["hedge"] < 0.0
        lines = coeffs.read_text().strip().splitlines()
        assert lines[0].startswith("t,kind,")
        assert len(lines) == 1 + 2 * 24

    def test_price_fqi_with_dataset_round_trip(self, tmp_path, capsys):
        dataset = tmp_path / "dataset.csv"
        code, out = run_cli(capsys, "price-qlbs-fqi", "--paths", "400",
                            "--seed", "2", "--noise", "0.2",
                            "--dataset-out", str(dataset))
        assert code == 0
        direct = json.loads(out)["price"]

        code, out = run_cli(capsys, "price-qlbs-fqi",
                            "--dataset-in", str(dataset))
        assert code == 0
        reloaded = json.loads(out)["price"]
        assert reloaded == pytest.approx(direct, abs=1e-9)


class TestExperiment:
    def test_single_scenario_csv(self, tmp_path, capsys):
        dest = tmp_path / "report.csv"
        config = tmp_path / "config.json"
        config.write_text(json.dumps({
            "scenario": "single",
            "market": {"s0": 100, "mu": 0.05, "sigma": 0.15, "r": 0.03,
                       "maturity": 1.0, "n_steps": 4, "n_paths": 200, "seed": 0},
            "strike": 100.0,
            "state_kinds": ["drift-adjusted"],
            "seeds": [0],
        }))
        code, out = run_cli(capsys, "experiment", "single",
                            "--config", str(config), "--out", str(dest))
        assert code == 0
        assert "2 rows" in out
        lines = [l for l in dest.read_text().splitlines() if not l.startswith("#")]
        assert lines[0].startswith("scenario,method,state,seed")
        assert len(lines) == 3

    def test_strict_mode_fails_on_cell_error(self, tmp_path, capsys):
        dest = tmp_path / "report.csv"
        config = tmp_path / "config.json"
        config.write_text(json.dumps({
            "scenario": "single",
            "market": {"s0": 100, "mu": 0.05, "sigma": 0.15, "r": 0.03,
                       "maturity": 1.0, "n_steps": 4, "n_paths": 100, "seed": 0},
            "strike": -1.0,
            "state_kinds": ["price"],
            "seeds": [0],
        }))
        code, _ = run_cli(capsys, "experiment", "single", "--config", str(config),
                          "--out", str(dest), "--strict")
        assert code == 1
