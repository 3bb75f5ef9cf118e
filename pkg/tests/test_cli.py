import math
import warnings

import numpy as np
import pytest

from pointer_engine import cli, sweep
from pointer_engine.cli import (
    CSV_COLUMNS,
    RunConfig,
    parse_config,
    read_rows_csv,
    to_model_params,
    write_rows_csv,
)
from pointer_engine.errors import ParseError, RegimeWarning, ValidationError
from pointer_engine.hilbert import FockCutoff
from pointer_engine.model import ModelParams

warnings.simplefilter("ignore", RegimeWarning)


class TestParseConfig:
    def test_empty_gives_reference_defaults(self):
        cfg = parse_config("")
        assert cfg.Omega == 100.0
        assert cfg.x0 == 2.5
        assert cfg.kappa_h == 1e-3
        assert cfg.kappa_c == 0.1
        assert cfg.nbar_h == 1.0
        assert cfg.gamma == 1e-3
        assert cfg.nbar_c == 0.0

    def test_comments_and_blank_lines(self):
        cfg = parse_config("# a comment\n\nOmega = 50 # trailing comment\n")
        assert cfg.Omega == 50.0
        assert "Omega" in cfg.explicit

    def test_active_passive_conflict(self):
        with pytest.raises(ValidationError):
            parse_config("gamma = 0.1\nzeta = 0.1\n")

    def test_zeta_alone_disables_default_gamma(self):
        cfg = parse_config("zeta = 0.1\n")
        assert cfg.gamma == 0.0
        assert cfg.zeta == 0.1

    def test_negative_frequency_rejected(self):
        with pytest.raises(ValidationError):
            parse_config("Omega = -1\n")

    def test_unknown_key_rejected(self):
        with pytest.raises(ValidationError, match="frobnicate"):
            parse_config("frobnicate = 3\n")

    def test_parse_error_reports_line(self):
        with pytest.raises(ParseError, match="line 3"):
            parse_config("Omega = 100\n# fine\nthis is not a pair\n")

    def test_bad_number_reports_key(self):
        with pytest.raises(ParseError, match="x0"):
            parse_config("x0 = banana\n")

    def test_f_alias(self):
        cfg = parse_config("zeta = 0.1\nf = theta\n")
        assert cfg.f == "heaviside"

    def test_to_model_params(self):
        cfg = parse_config("zeta = 0.1\nDelta = 12.5\nnbar_c = 1\nn_max = 20\n")
        p = to_model_params(cfg)
        assert isinstance(p, ModelParams)
        assert p.cutoff.n_max == 20
        assert p.mode == "passive"


class TestCsvRoundTrip:
    def _tiny_rows(self):
        base = ModelParams(Omega=20.0, x0=1.0, kappa_h=1e-3, kappa_c=0.1,
                           nbar_h=1.0, nbar_c=0.2, gamma=1e-3, cutoff=FockCutoff(12))
        rows, _ = sweep.run_custom(base, "gamma", [7e-4, 1.3e-3])
        return rows

    def test_round_trip_full_precision(self, tmp_path):
        rows = self._tiny_rows()
        path = tmp_path / "out.csv"
        write_rows_csv(rows, str(path), meta={"note": "test"})
        records = read_rows_csv(str(path))
        assert len(records) == len(rows)
        for rec, row in zip(records, rows):
            assert rec["Wdot"] == row.report.Wdot  # exact, 17 significant digits
            assert rec["Qdot_h"] == row.report.Qdot_h
            assert rec["residual"] == row.residual
            assert rec["axis_value"] == row.axis_value
            assert rec["converged"] is True
            assert rec["n_max"] == row.n_max

    def test_header_and_schema(self, tmp_path):
        rows = self._tiny_rows()
        path = tmp_path / "out.csv"
        write_rows_csv(rows, str(path))
        lines = path.read_text().splitlines()
        header = [ln for ln in lines if not ln.startswith("#")][0]
        assert header.split(",") == CSV_COLUMNS

    def test_deterministic_bytes(self, tmp_path):
        rows_a = self._tiny_rows()
        rows_b = self._tiny_rows()
        pa, pb = tmp_path / "a.csv", tmp_path / "b.csv"
        write_rows_csv(rows_a, str(pa))
        write_rows_csv(rows_b, str(pb))
        assert pa.read_bytes() == pb.read_bytes()


class TestCommands:
    BASE_ARGS = ["--set", "Omega=20", "--set", "x0=1.0", "--set", "n_max=12",
                 "--set", "nbar_c=0.2"]

    def test_point_writes_row_satisfying_first_law(self, tmp_path, capsys):
        out = tmp_path / "point.csv"
        code = cli.main(["point", *self.BASE_ARGS, "--out", str(out)])
        assert code == 0
        rec = read_rows_csv(str(out))[0]
        scale = max(abs(rec["Qdot_h"]), abs(rec["Qdot_c"]), abs(rec["Qdot_m"]), 1e-12)
        assert abs(rec["Qdot_h"] + rec["Qdot_c"] + rec["Qdot_m"]) < 1e-6 * scale
        assert "eta" in capsys.readouterr().out

    def test_custom_single_value_matches_point(self, tmp_path):
        out_point = tmp_path / "p.csv"
        out_sweep = tmp_path / "s.csv"
        assert cli.main(["point", *self.BASE_ARGS, "--out", str(out_point)]) == 0
        assert cli.main([
            "sweep", *self.BASE_ARGS, "--experiment", "custom",
            "--set", "axis=gamma", "--set", "axis_values=0.001",
            "--out", str(out_sweep),
        ]) == 0
        rec_p = read_rows_csv(str(out_point))[0]
        rec_s = read_rows_csv(str(out_sweep))[0]
        for col in ("Qdot_h", "Qdot_c", "Qdot_m", "Qdot_ba", "Wdot", "eta",
                    "W_max", "p_inf", "n_max"):
            if isinstance(rec_p[col], float) and math.isnan(rec_p[col]):
                assert math.isnan(rec_s[col])
            else:
                assert rec_s[col] == pytest.approx(rec_p[col], rel=1e-12)

    def test_config_file_and_override(self, tmp_path):
        cfg_file = tmp_path / "run.cfg"
        cfg_file.write_text("Omega = 20\nx0 = 1.0\nn_max = 12\ngamma = 2e-3\n")
        out = tmp_path / "out.csv"
        code = cli.main(["point", "--config", str(cfg_file),
                         "--set", "gamma=1e-3", "--out", str(out)])
        assert code == 0

    def test_exit_code_config_error(self, capsys):
        assert cli.main(["point", "--set", "Omega=-5"]) == 1
        assert cli.main(["point", "--set", "nonsense=1"]) == 1
        assert cli.main(["point", "--set", "oops"]) == 1
        capsys.readouterr()

    def test_sweep_summary_printed(self, tmp_path, capsys):
        out = tmp_path / "sweep.csv"
        code = cli.main([
            "sweep", *self.BASE_ARGS, "--experiment", "custom",
            "--set", "axis=gamma", "--set", "axis_values=0.0005,0.001,0.002",
            "--out", str(out),
        ])
        assert code == 0
        text = capsys.readouterr().out
        assert "rows: 3" in text
        assert "argmax" in text

    def test_sweep_partial_failure_exit_code(self, tmp_path):
        # x0=2.5 cannot fit in n_max=10: projector construction fails per row
        code = cli.main([
            "sweep", "--set", "Omega=100", "--set", "x0=2.5", "--set", "n_max=10",
            "--experiment", "custom", "--set", "axis=gamma",
            "--set", "axis_values=0.001",
        ])
        assert code == 2
