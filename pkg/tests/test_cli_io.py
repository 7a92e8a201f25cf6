import hashlib
import json
import struct

import numpy as np
import pytest

from layerqg.cli import main
from layerqg.errors import (ConfigurationError, FieldFormatError,
                            FieldLengthError)
from layerqg.fieldio import read_field, write_field
from layerqg.runconfig import RunSettings, parse_config, realize
from layerqg.spectral import LayerField

from conftest import random_band_coeffs


class TestConfigParsing:
    def write(self, tmp_path, text):
        path = tmp_path / "run.cfg"
        path.write_text(text)
        return path

    def test_single_assignment(self, tmp_path):
        settings, defaulted = parse_config(self.write(tmp_path, "gamma=0.5\n"))
        assert settings.gamma == 0.5
        assert "gamma" not in defaulted
        assert "dt" in defaulted

    def test_negative_gamma_named(self, tmp_path):
        with pytest.raises(ConfigurationError, match="gamma must be positive"):
            parse_config(self.write(tmp_path, "gamma=-1\n"))

    def test_empty_file_all_defaults(self, tmp_path):
        settings, defaulted = parse_config(self.write(tmp_path, ""))
        assert settings == RunSettings()
        assert sorted(defaulted) == sorted(settings.echo())

    def test_comments_and_blanks(self, tmp_path):
        text = "# a comment\n\ngamma=0.25   # trailing\n"
        settings, _ = parse_config(self.write(tmp_path, text))
        assert settings.gamma == 0.25

    def test_unknown_keys_all_listed(self, tmp_path):
        with pytest.raises(ConfigurationError) as err:
            parse_config(self.write(tmp_path, "gamma=0.5\nfoo=1\nbar=2\n"))
        assert "bar" in str(err.value) and "foo" in str(err.value)

    def test_parse_error_carries_line_number(self, tmp_path):
        with pytest.raises(ConfigurationError, match=":2:"):
            parse_config(self.write(tmp_path, "gamma=0.5\nnot a pair\n"))

    def test_bad_value_type(self, tmp_path):
        with pytest.raises(ConfigurationError, match="modes_x"):
            parse_config(self.write(tmp_path, "modes_x=twelve\n"))

    def test_dealiasing_constraint_named(self, tmp_path):
        with pytest.raises(ConfigurationError, match="dealiasing"):
            parse_config(self.write(tmp_path, "modes_x=16\ngrid_x=20\n"))

    def test_dt_ceiling_named(self, tmp_path):
        with pytest.raises(ConfigurationError, match="stability ceiling"):
            parse_config(self.write(tmp_path, "gamma=0.5\ndt=1.5\n"))

    def test_realize_builds_consistent_objects(self, tmp_path):
        settings, _ = parse_config(self.write(
            tmp_path, "modes_x=8\nmodes_y=8\nsigma=0.5\nnoise_modes=16\n"))
        config = realize(settings, seed=3)
        assert config.basis.nx == 8
        assert config.noise.k == 16
        assert len(config.pairs) >= 2 * config.noise.k


class TestFieldIO:
    def test_round_trip_spectral_bit_exact(self, tmp_path, basis16):
        rng = np.random.default_rng(0)
        field = LayerField.from_coeffs(basis16,
                                       random_band_coeffs(rng, basis16))
        path = tmp_path / "f.lqg"
        write_field(path, field)
        back = read_field(path, basis16)
        assert np.array_equal(back.coeffs, field.coeffs)

    def test_round_trip_grid_bit_exact(self, tmp_path, basis16):
        rng = np.random.default_rng(1)
        grid = rng.standard_normal((3,) + basis16.grid_shape)
        field = LayerField.from_grid(basis16, grid)
        path = tmp_path / "g.lqg"
        write_field(path, field)
        back = read_field(path, basis16)
        assert np.array_equal(back.grid, grid)

    def test_corrupted_magic(self, tmp_path, basis16):
        path = tmp_path / "bad.lqg"
        write_field(path, LayerField.zero(basis16))
        raw = bytearray(path.read_bytes())
        raw[:4] = b"NOPE"
        path.write_bytes(bytes(raw))
        with pytest.raises(FieldFormatError, match="magic"):
            read_field(path, basis16)

    def test_unsupported_version(self, tmp_path, basis16):
        path = tmp_path / "v9.lqg"
        write_field(path, LayerField.zero(basis16))
        raw = bytearray(path.read_bytes())
        raw[4:8] = struct.pack("<I", 9)
        path.write_bytes(bytes(raw))
        with pytest.raises(FieldFormatError, match="version"):
            read_field(path, basis16)

    def test_truncated_payload(self, tmp_path, basis16):
        path = tmp_path / "short.lqg"
        write_field(path, LayerField.zero(basis16))
        raw = path.read_bytes()
        path.write_bytes(raw[:-16])
        with pytest.raises(FieldLengthError):
            read_field(path, basis16)

    def test_dims_vs_payload_mismatch(self, tmp_path, basis16):
        # header nx inflated beyond the payload length
        path = tmp_path / "mismatch.lqg"
        write_field(path, LayerField.zero(basis16))
        raw = bytearray(path.read_bytes())
        raw[8:12] = struct.pack("<I", 99)
        path.write_bytes(bytes(raw))
        with pytest.raises(FieldLengthError):
            read_field(path, basis16)


def run_cli(*argv):
    return main(list(argv))


class TestCli:
    def write_cfg(self, tmp_path, extra=""):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "modes_x=12\nmodes_y=12\ngamma=0.5\nsigma=0\n"
            "nonlinearity=off\ndt=0.01\nhorizon=0.1\n"
            "init=mode:1,1:1,0,0\n" + extra)
        return cfg

    def test_run_decay_columns(self, tmp_path):
        cfg = self.write_cfg(tmp_path)
        out = tmp_path / "out"
        assert run_cli("run", "--config", str(cfg), "--seed", "7",
                       "--out", str(out)) == 0
        rows = (out / "series.csv").read_text().strip().split("\n")
        header = rows[0].split(",")
        assert header[0] == "time"
        data = np.array([[float(v) for v in r.split(",")] for r in rows[1:]])
        t, l2 = data[:, 0], data[:, header.index("l2")]
        assert np.max(np.abs(l2 / (l2[0] * np.exp(-0.5 * t)) - 1)) < 1e-12

    def test_csv_numbers_round_trip(self, tmp_path):
        cfg = self.write_cfg(tmp_path, "sigma=1.0\n")
        out = tmp_path / "out"
        run_cli("run", "--config", str(cfg), "--seed", "3", "--out", str(out))
        rows = (out / "series.csv").read_text().strip().split("\n")[1:]
        for row in rows[:20]:
            for token in row.split(","):
                v = float(token)
                assert np.isfinite(v)
                assert f"{v:.17g}" == token

    def test_manifest_checksums(self, tmp_path):
        cfg = self.write_cfg(tmp_path)
        out = tmp_path / "out"
        run_cli("run", "--config", str(cfg), "--seed", "7", "--out", str(out),
                "--snap-every", "5")
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["master_seed"] == 7
        assert "defaults_applied" in manifest
        for artifact in manifest["artifacts"]:
            digest = hashlib.sha256(
                (out / artifact["path"]).read_bytes()).hexdigest()
            assert digest == artifact["sha256"]

    def test_rerun_is_byte_identical(self, tmp_path):
        cfg = self.write_cfg(tmp_path, "sigma=1.0\n")
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            run_cli("run", "--config", str(cfg), "--seed", "11",
                    "--out", str(out), "--snap-every", "5")
            outs.append(out)
        for fname in ("series.csv", "snapshot_000000.lqg"):
            assert (outs[0] / fname).read_bytes() == \
                (outs[1] / fname).read_bytes()

    def test_thread_count_does_not_change_bytes(self, tmp_path):
        cfg = tmp_path / "inv.cfg"
        cfg.write_text("modes_x=12\nmodes_y=12\ngamma=0.5\nsigma=1.0\n"
                       "nonlinearity=off\ndt=0.02\nhorizon=20\ninit=zero\n"
                       "observables=l2,h1\n")
        digests = []
        for threads in ("1", "4"):
            out = tmp_path / f"t{threads}"
            assert run_cli("invariant", "--config", str(cfg), "--seed", "9",
                           "--out", str(out), "--horizons", "10,20",
                           "--paths", "4", "--threads", threads) == 0
            digests.append(hashlib.sha256(
                (out / "invariant.csv").read_bytes()).hexdigest())
        assert digests[0] == digests[1]

    def test_viscosity_report_rows(self, tmp_path):
        cfg = tmp_path / "v.cfg"
        cfg.write_text("modes_x=8\nmodes_y=8\ngamma=0.5\nsigma=1.0\n"
                       "dt=0.005\nhorizon=0.1\ninit=lowband:3:1.0:2\n"
                       "noise_modes=16\n")
        out = tmp_path / "out"
        assert run_cli("viscosity", "--config", str(cfg), "--seed", "1",
                       "--out", str(out),
                       "--eps-ladder", "0.2,0.1,0.05") == 0
        rows = (out / "viscosity.csv").read_text().strip().split("\n")
        assert len(rows) == 1 + 2    # header + one row per rung pair

    def test_constraint_error_exit_code(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("gamma=-1\n")
        out = tmp_path / "out"
        assert run_cli("run", "--config", str(cfg), "--seed", "1",
                       "--out", str(out)) == 2

    def test_blow_up_exit_code(self, tmp_path):
        cfg = tmp_path / "blow.cfg"
        cfg.write_text("modes_x=8\nmodes_y=8\ngamma=0.5\nsigma=0\n"
                       "dt=0.01\nhorizon=0.1\ninit=mode:1,1:1e200,0,0\n"
                       "cfl_safety=0\nnoise_modes=8\n")
        out = tmp_path / "out"
        assert run_cli("run", "--config", str(cfg), "--seed", "1",
                       "--out", str(out)) == 3

    def test_diagnose_outputs(self, tmp_path):
        cfg = tmp_path / "d.cfg"
        cfg.write_text("modes_x=8\nmodes_y=8\ngamma=0.5\nsigma=1.0\n"
                       "dt=0.005\nhorizon=0.1\ninit=lowband:3:1.0:2\n"
                       "noise_modes=16\n")
        out = tmp_path / "out"
        assert run_cli("diagnose", "--config", str(cfg), "--seed", "1",
                       "--out", str(out)) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["l2_dominated"] and manifest["l4_dominated"]
        header = (out / "diagnostics.csv").read_text().split("\n")[0]
        assert "weak_residual" in header
