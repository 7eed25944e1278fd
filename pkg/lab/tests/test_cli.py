import math

import numpy as np
import orjson
import pytest
import src.experiments as experiments
import src.main as main
import src.spectral as spectral
from src.config import ExperimentConfig, load_experiment
from src.schemas import DataKind


def run(capsys, *argv):
    code = main.main(list(argv))
    out = capsys.readouterr().out
    return code, orjson.loads(out)


class TestParser:
    def test_plan(self, capsys):
        code, plan = run(capsys, "plan", "--s", "0.5", "--T0", "10", "--delta_exp", "0")
        assert code == 0
        assert plan["growth_exponent"] == pytest.approx(0.125)
        assert plan["N_exponent"] == pytest.approx(0.75)

    def test_plan_writes_file(self, capsys, tmp_path):
        code, _ = run(capsys, "plan", "--s", "0.6", "--out", str(tmp_path))
        assert code == 0
        plan = orjson.loads((tmp_path / "plan.json").read_bytes())
        assert plan["s"] == 0.6

    def test_regime_error(self, capsys):
        code, error = run(capsys, "plan", "--s", "0.2")
        assert code == 2
        assert error["error"] == "regime"

    @pytest.mark.parametrize(
        "argv",
        [
            ["run", "--threads", "0"],
            ["run", "--seed", "-1"],
            ["integrate"],
            [],
        ],
    )
    def test_usage_errors(self, capsys, argv):
        code, error = run(capsys, *argv)
        assert code == 2
        assert error["error"] == "configuration"
        assert "usage" in error

    def test_bad_config_file(self, capsys, tmp_path):
        path = tmp_path / "bad.env"
        path.write_text("GRID__N=16\nGRID__L=16.0\nSOLVER__DT=0\n")
        code, error = run(capsys, "run", "--config", str(path), "--out", str(tmp_path))
        assert code == 2
        assert error["problems"][0]["line"] == 3


class TestRun:
    @pytest.fixture(autouse=True)
    def setup(self, demo_config, tmp_path, fresh_kernels):
        self.config = str(demo_config)
        self.tmp_path = tmp_path

    def test_artifacts(self, capsys):
        out = self.tmp_path / "a"
        code, result = run(capsys, "run", "--config", self.config, "--out", str(out))
        assert code == 0
        assert result["command"] == "run"
        assert sorted(p.name for p in out.iterdir()) == [
            "config.env",
            "snapshot_final.bin",
            "summary.json",
            "trajectory.csv",
            "trajectory.gp",
        ]
        summary = orjson.loads((out / "summary.json").read_bytes())
        assert summary["complete"]
        assert summary["samples"] == 3
        assert summary["mass_relative_drift"] <= 1e-10
        header = (out / "trajectory.csv").read_text().splitlines()[0]
        assert header.split(",") == [
            "t",
            "mass",
            "energy",
            "l4x4_accum",
            "E_Iu",
            "commutator_l2",
            "morawetz_action",
        ]

    def test_deterministic(self, capsys):
        for name in ("a", "b"):
            code, _ = run(
                capsys, "run", "--config", self.config, "--out", str(self.tmp_path / name)
            )
            assert code == 0
        for name in ("trajectory.csv", "summary.json", "snapshot_final.bin"):
            first = (self.tmp_path / "a" / name).read_bytes()
            assert first == (self.tmp_path / "b" / name).read_bytes()

    def test_dumped_config_reloads(self, capsys):
        out = self.tmp_path / "a"
        run(capsys, "run", "--config", self.config, "--out", str(out), "--seed", "9")
        reloaded = load_experiment(out / "config.env")
        assert reloaded.data.seed == 9
        assert reloaded.grid.n == 16

    def test_integration_failure(self, capsys, mocker):
        mocker.patch(
            "src.solver._step", side_effect=lambda values, *args: values * np.nan
        )
        code, error = run(capsys, "run", "--config", self.config, "--out", "unused")
        assert code == 3
        assert error["error"] == "integration_failure"
        assert error["step"] == 1

    def test_unexpected_error(self, capsys, mocker):
        mocker.patch("src.experiments.cmd_run", side_effect=RuntimeError("disk full"))
        code, error = run(capsys, "run", "--config", self.config)
        assert code == 1
        assert error == {
            "error": "internal",
            "message": "disk full",
            "type": "RuntimeError",
        }


class TestCommands:
    @pytest.fixture(autouse=True)
    def setup(self, demo_config, tmp_path, fresh_kernels):
        self.config = str(demo_config)
        self.out = tmp_path

    def test_morawetz(self, capsys):
        code, result = run(
            capsys, "morawetz", "--config", self.config, "--out", str(self.out)
        )
        assert code == 0
        assert set(result["artifacts"]) == {"morawetz", "terms", "plot"}
        report = orjson.loads((self.out / "morawetz.json").read_bytes())
        assert set(report) == {"u_level", "Iu_level", "identity", "positivity"}
        assert report["positivity"] == {"all_positive": True, "samples": 3}
        assert report["u_level"]["M"] == pytest.approx(0.01 ** (1 / 3))
        assert not report["u_level"]["clamped"]

    def test_regions(self, capsys):
        code, _ = run(capsys, "regions", "--config", self.config, "--out", str(self.out))
        assert code == 0
        reports = [
            orjson.loads((self.out / f"region_{r}.json").read_bytes())
            for r in (1, 2, 3, 4)
        ]
        assert reports[0]["worst_sigma"] == 0.0
        assert [report["region"] for report in reports] == [1, 2, 3, 4]

    def test_sweep(self, capsys):
        code, result = run(
            capsys, "sweep-n", "--config", self.config, "--out", str(self.out)
        )
        assert code == 0
        lines = (self.out / "sweep.csv").read_text().splitlines()
        assert lines[0] == (
            "N,amplitude_scale,sup_increment,drift_baseline,"
            "commutator_increment,slope_so_far,commutator_l1l2"
        )
        assert len(lines) == 3
        assert "plot" in result["artifacts"]

    def test_oracle_validate(self, capsys):
        code, result = run(capsys, "oracle-validate", "--out", str(self.out))
        assert code == 0
        assert result == {"command": "oracle-validate", "reports": 14, "failed": 0}
        assert len((self.out / "oracle.jsonl").read_text().splitlines()) == 14

    def test_oracle_violation(self, capsys, broken_kernels):
        code, error = run(capsys, "oracle-validate")
        assert code == 4
        assert error["error"] == "oracle_violation"
        assert {v["quantity"] for v in error["violations"]} == {"morawetz_action"}


class TestStandardSuite:
    def test_members(self, grid):
        suite = experiments.standard_suite(grid)
        assert list(suite) == ["gaussian_rest", "gaussian_moving", "random_hs"]
        assert spectral.sobolev_norm(suite["random_hs"], 0.3) == pytest.approx(1.0)

    def test_cutoff_in_lattice_units(self, grid):
        assert experiments.lattice_cutoff(grid, 2) == pytest.approx(4 * math.pi / grid.L)

    def test_unset_data_kind_follows_the_command(self, grid):
        cfg = ExperimentConfig()
        assert cfg.data.kind is None
        smooth = experiments.initial_data(cfg, grid)
        rough = experiments.initial_data(cfg, grid, DataKind.random_hs)
        expected = spectral.synthesize_random_hs(grid, 0.3, seed=0)
        assert np.array_equal(smooth.values, spectral.synthesize_gaussian(grid).values)
        assert np.array_equal(rough.values, expected.values)
