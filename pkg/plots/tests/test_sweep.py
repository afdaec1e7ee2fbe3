"""Sweep-figure tests: schema handling, golden data arrays, rendering."""

from pathlib import Path

import numpy as np
import pytest

from sausage_plots import (
    SchemaError,
    main,
    prepare_arrays,
    read_sweep_csv,
    render_sweep,
)

FIXTURE = Path(__file__).parent / "fixtures_sweep.csv"
GOLDEN = Path(__file__).parent / "golden" / "prepared_sweep.npz"
HEADER = "r,gamma_hat,std_error,n_realizations,T,dt,m,J,eps,seed\n"


class TestReadSweepCsv:
    def test_rows_sorted_ascending(self):
        table = read_sweep_csv(FIXTURE)
        assert np.all(np.diff(table.r) > 0)
        assert np.all(table.r > 0)
        # the fixture file is deliberately shuffled; sorting must carry the
        # other columns along
        assert table.gamma_hat[0] == 0.4646
        assert table.gamma_hat[-1] == 1.6286

    def test_missing_column_is_named(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("r,gamma_hat\n1.0,0.5\n")
        with pytest.raises(SchemaError, match="std_error"):
            read_sweep_csv(bad)

    def test_empty_file_is_schema_error(self, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_text("")
        with pytest.raises(SchemaError):
            read_sweep_csv(empty)

    def test_header_only_is_schema_error(self, tmp_path):
        hdr = tmp_path / "hdr.csv"
        hdr.write_text(HEADER)
        with pytest.raises(SchemaError, match="no data rows"):
            read_sweep_csv(hdr)

    def test_nonpositive_r_rejected(self, tmp_path):
        neg = tmp_path / "neg.csv"
        neg.write_text(HEADER + "-1.0,0.5,0.01,4,100,0.01,4,1000,0.25,1\n")
        with pytest.raises(SchemaError, match="positive"):
            read_sweep_csv(neg)

    def test_non_numeric_cell_rejected(self, tmp_path):
        bad = tmp_path / "nan.csv"
        bad.write_text(HEADER + "1.0,abc,0.01,4,100,0.01,4,1000,0.25,1\n")
        with pytest.raises(SchemaError, match="non-numeric"):
            read_sweep_csv(bad)


class TestPreparedArrays:
    def test_matches_golden(self):
        data = prepare_arrays(read_sweep_csv(FIXTURE))
        golden = np.load(GOLDEN)
        assert set(golden.files) == set(data)
        for key in golden.files:
            assert np.array_equal(data[key], golden[key]), key

    def test_repeated_loads_identical(self):
        a = prepare_arrays(read_sweep_csv(FIXTURE))
        b = prepare_arrays(read_sweep_csv(FIXTURE))
        for key in a:
            assert np.array_equal(a[key], b[key])


class TestRenderSweep:
    def test_renders_fixture(self, tmp_path):
        out = render_sweep(
            FIXTURE, tmp_path / "sweep.png",
            eps=0.25, alpha=0.0942, capp_value=1.4587, small_r_value=0.3927,
        )
        assert out.exists() and out.stat().st_size > 0

    def test_single_row_is_valid(self, tmp_path):
        one = tmp_path / "one.csv"
        one.write_text(HEADER + "1.0,0.7281,0.021,8,1000,0.01,4,2000,0.25,1\n")
        out = render_sweep(
            one, tmp_path / "one.png",
            eps=0.25, alpha=None, capp_value=1.4587, small_r_value=0.3927,
        )
        assert out.exists() and out.stat().st_size > 0


class TestMain:
    def args(self, csv, out):
        return [
            str(csv), str(out),
            "--eps", "0.25", "--cap", "1.4587", "--small-r-ref", "0.3927",
        ]

    def test_success(self, tmp_path, capsys):
        out = tmp_path / "fig.png"
        assert main(self.args(FIXTURE, out)) == 0
        assert out.exists()
        assert str(out) in capsys.readouterr().out

    def test_schema_error_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("r,gamma_hat\n1.0,0.5\n")
        assert main(self.args(bad, tmp_path / "fig.png")) == 2
        assert "std_error" in capsys.readouterr().err
