import os

import numpy as np
import pytest

from purephase import cli
from purephase.config import RunConfig, config_from_file, parse_config_file
from purephase.states import DomainError

pytestmark = pytest.mark.filterwarnings("ignore::purephase.frames.OccupancyWarning")

SMOKE = dict(
    frames=1500,
    calib_frames=1500,
    magnifications=(0.5, 1.0, 2.0),
    calib_width_px=256,
    mean_pair_rate=4.0,
)


class TestConfig:
    def test_defaults_match_reference_experiment(self):
        cfg = RunConfig()
        assert cfg.sigma_plus == 286.0
        assert cfg.sigma_minus == 13.0
        assert cfg.wavelength_um == 0.81
        assert cfg.f_um == 10e4 and cfg.f2_um == 15e4 and cfg.f3_um == 12.5e4
        assert cfg.fm_um == 15e4

    def test_crystal_route(self):
        cfg = RunConfig(crystal_length_um=1000.0, pump_wavelength_um=0.405, pump_index=1.0)
        assert cfg.sigma_minus == pytest.approx(4.63529, rel=1e-5)
        assert RunConfig(pump_waist_um=900.0).sigma_plus == 450.0

    def test_parse_file(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text(
            "# comment\n"
            "sigma_plus_um = 300\n"
            "magnifications = 0.5, -1.5\n"
            "seed=7\n"
        )
        values = parse_config_file(path)
        assert values == {"sigma_plus_um": 300.0, "magnifications": (0.5, -1.5), "seed": 7}

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("sigma_plu_um=300\n")
        with pytest.raises(DomainError, match="unknown configuration key"):
            parse_config_file(path)

    def test_overrides_win(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("seed=7\nout_dir=filedir\n")
        cfg = config_from_file(path, {"seed": 99, "out_dir": None})
        assert cfg.seed == 99
        assert cfg.out_dir == "filedir"

    def test_validation(self):
        with pytest.raises(DomainError):
            RunConfig(magnifications=())
        with pytest.raises(DomainError):
            RunConfig(magnifications=(0.0,))
        with pytest.raises(DomainError):
            RunConfig(mode="3d")

    def test_hash_tracks_content(self):
        a = RunConfig()
        b = RunConfig(seed=99)
        assert a.config_hash() != b.config_hash()
        assert a.config_hash() == RunConfig().config_hash()


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli_out")
    cfg_path = out / "run.cfg"
    lines = [f"out_dir={out}"]
    for key, value in SMOKE.items():
        if key == "magnifications":
            value = ",".join(str(v) for v in value)
        lines.append(f"{key}={value}")
    cfg_path.write_text("\n".join(lines) + "\n")
    return out, cfg_path


class TestCliEndToEnd:
    def test_full_chain(self, workdir):
        out, cfg_path = workdir
        for command in ("calibrate", "predict", "simulate", "estimate", "clean", "fit", "sweep", "report"):
            assert cli.main([command, "--config", str(cfg_path)]) == 0
        expected = [
            "calibrate_report.txt",
            "predict_tilt.csv",
            "frames_m+0.50.ppf",
            "frames_m+0.50.ppf.meta",
            "density_m+0.50.csv",
            "density_m+0.50.pgm",
            "cleaned_m+0.50.csv",
            "fit_m+0.50.txt",
            "fits.csv",
            "sweep_report.txt",
            "report.txt",
        ]
        for name in expected:
            assert (out / name).exists(), name
        report = (out / "report.txt").read_text()
        assert report.startswith("config_hash=")

    def test_pipeline_is_deterministic(self, workdir):
        out, cfg_path = workdir
        before = (out / "density_m+1.00.csv").read_bytes()
        frames_before = (out / "frames_m+1.00.ppf").read_bytes()
        assert cli.main(["simulate", "--config", str(cfg_path)]) == 0
        assert cli.main(["estimate", "--config", str(cfg_path)]) == 0
        assert (out / "frames_m+1.00.ppf").read_bytes() == frames_before
        assert (out / "density_m+1.00.csv").read_bytes() == before

    def test_seed_changes_artifacts(self, workdir, tmp_path):
        out, cfg_path = workdir
        other = tmp_path / "seeded"
        assert (
            cli.main(
                ["simulate", "--config", str(cfg_path), "--seed", "777", "--out", str(other), "--mag", "0.5"]
            )
            == 0
        )
        assert (other / "frames_m+0.50.ppf").read_bytes() != (out / "frames_m+0.50.ppf").read_bytes()

    def test_tilt_table_matches_prediction(self, workdir):
        out, _ = workdir
        rows = [
            line.split(",")
            for line in (out / "fits.csv").read_text().splitlines()
            if line and not line.startswith(("#", "magnification"))
        ]
        for row in rows:
            theta_fit, theta_pred = float(row[1]), float(row[3])
            assert abs(theta_fit - theta_pred) <= 5.0

    def test_predicted_curve_monotone_on_branch(self, workdir):
        out, _ = workdir
        rows = [
            line.split(",")
            for line in (out / "predict_tilt.csv").read_text().splitlines()
            if line and not line.startswith(("#", "magnification"))
        ]
        by_mag = sorted((float(r[0]), float(r[2])) for r in rows)
        abs_thetas = [t for _, t in by_mag]
        assert all(a >= b for a, b in zip(abs_thetas, abs_thetas[1:]))

    def test_predict_reference_panels(self, tmp_path):
        # the three theory panels of the reference figure
        out = tmp_path / "panels"
        assert cli.main(["predict", "--out", str(out), "--mag=-0.3,-0.75,-2.5"]) == 0
        for tag in ("m-0.30", "m-0.75", "m-2.50"):
            assert (out / f"predict_rho_{tag}.csv").exists()
            assert (out / f"predict_rho_{tag}.pgm").exists()


class TestCliErrors:
    def test_empty_magnifications_is_usage_error(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("magnifications=\n")
        assert cli.main(["predict", "--config", str(cfg)]) == 2

    def test_missing_frames_file(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(f"out_dir={tmp_path}\n")
        assert cli.main(["estimate", "--config", str(cfg)]) == 2

    def test_thread_cap_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("PUREPHASE_THREADS", "1")
        monkeypatch.delenv("OMP_NUM_THREADS", raising=False)
        cli._apply_thread_cap()
        assert os.environ["OMP_NUM_THREADS"] == "1"
