import csv

import numpy as np
import pytest

from codedtrain.cli import cli_main
from codedtrain.harness import (
    ConfigError,
    DataError,
    METRICS_HEADER,
    config_from_mapping,
    load_csv,
    parse_config_file,
    synth_dataset,
)
from codedtrain.trainers import Model

LR = Model.LOGISTIC_REGRESSION


class TestSynthDataset:
    def test_label_coding_and_balance(self):
        d = synth_dataset(200, 10, 7, LR)
        assert set(np.unique(d.y)) <= {0.0, 1.0}
        assert 0.3 <= d.y.mean() <= 0.7
        s = synth_dataset(200, 10, 7, Model.SVM)
        assert set(np.unique(s.y)) <= {-1.0, 1.0}

    def test_deterministic(self):
        a = synth_dataset(50, 5, 3, LR)
        b = synth_dataset(50, 5, 3, LR)
        assert a.x.tobytes() == b.x.tobytes()
        assert a.y.tobytes() == b.y.tobytes()

    def test_single_sample(self):
        d = synth_dataset(1, 1, 0, LR)
        assert d.x.shape == (1, 1) and d.y.shape == (1,)

    def test_bad_shape(self):
        with pytest.raises(ValueError):
            synth_dataset(0, 3, 0, LR)


class TestLoadCsv:
    def _write(self, tmp_path, text):
        path = tmp_path / "data.csv"
        path.write_text(text)
        return str(path)

    def test_lr_parse(self, tmp_path):
        path = self._write(tmp_path, "1,0.5,2.0\n0,1.5,-1.0\n")
        d = load_csv(path, LR)
        assert d.x.shape == (2, 2)
        assert np.array_equal(d.y, [1.0, 0.0])

    def test_svm_label_mapping(self, tmp_path):
        path = self._write(tmp_path, "1,0.5,2.0\n0,1.5,-1.0\n")
        d = load_csv(path, Model.SVM)
        assert np.array_equal(d.y, [1.0, -1.0])

    def test_ragged_row_reports_line(self, tmp_path):
        path = self._write(tmp_path, "1,0.5\n0,1.5,2.0\n")
        with pytest.raises(DataError, match=":2"):
            load_csv(path, LR)

    def test_non_numeric_cell(self, tmp_path):
        path = self._write(tmp_path, "1,0.5\n0,abc\n")
        with pytest.raises(DataError, match=":2"):
            load_csv(path, LR)

    def test_label_outside_admissible_set(self, tmp_path):
        path = self._write(tmp_path, "2,0.5\n")
        with pytest.raises(DataError):
            load_csv(path, LR)

    def test_header_flag(self, tmp_path):
        path = self._write(tmp_path, "label,f0\n1,0.5\n")
        with pytest.raises(DataError):
            load_csv(path, LR)  # header row is non-numeric
        d = load_csv(path, LR, header=True)
        assert d.x.shape == (1, 1)

    def test_minus_one_accepted_for_lr(self, tmp_path):
        path = self._write(tmp_path, "-1,0.5\n1,1.5\n")
        d = load_csv(path, LR)
        assert np.array_equal(d.y, [0.0, 1.0])


class TestConfig:
    def test_file_plus_overrides(self, tmp_path):
        path = tmp_path / "exp.cfg"
        path.write_text(
            "# experiment\nn = 8\nk = 5\nscheme = rlnc\nlambda = 0.5\nnum-iter = 7\n"
        )
        mapping = parse_config_file(str(path))
        cfg = config_from_mapping(mapping)
        assert (cfg.n, cfg.k, cfg.scheme, cfg.lam, cfg.num_iter) == (8, 5, "rlnc", 0.5, 7)

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            config_from_mapping({"bogus": "1"})

    def test_bad_value_type(self):
        with pytest.raises(ConfigError):
            config_from_mapping({"n": "lots"})

    def test_validate_k_le_n(self):
        with pytest.raises(ConfigError):
            config_from_mapping({"n": "3", "k": "5"}).validate()

    def test_explicit_straggler_ids(self):
        cfg = config_from_mapping({"stragglers": "1,3", "n": "5", "k": "2"})
        assert cfg.straggler_ids() == [1, 3]

    def test_malformed_config_line(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("just words\n")
        with pytest.raises(ConfigError):
            parse_config_file(str(path))


def _read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


class TestCli:
    def test_train_writes_metrics_csv(self, tmp_path, capsys):
        out = tmp_path / "metrics.csv"
        code = cli_main(
            [
                "train", "--n", "5", "--k", "3", "--scheme", "mds", "--model", "lr",
                "--stragglers", "2", "--num-iter", "6", "--rows", "40", "--cols", "6",
                "--output", str(out),
            ]
        )
        assert code == 0
        rows = _read_csv(out)
        assert rows[0] == METRICS_HEADER
        encode_rows = [r for r in rows if r[0] == "encode"]
        iter_rows = [r for r in rows if r[0] == "iterate"]
        total_rows = [r for r in rows if r[0] == "total"]
        assert len(encode_rows) == 5
        assert len(iter_rows) == 6
        assert len(total_rows) == 1

    def test_invalid_dims_usage_error(self, capsys):
        assert cli_main(["train", "--k", "6", "--n", "5"]) == 2
        assert "error:" in capsys.readouterr().err

    def test_unknown_flag_usage_error(self, capsys):
        assert cli_main(["train", "--bogus", "1"]) == 2

    def test_bandwidth_table(self, capsys):
        assert cli_main(["bandwidth-table", "--n", "220", "--k", "160"]) == 0
        out = capsys.readouterr().out.strip().splitlines()
        assert out[0] == "scheme,n,k,per_worker,total"
        assert out[1].split(",")[4] == "9600"
        assert out[2].split(",")[4] == "4800"
        assert abs(float(out[3].split(",")[4]) - 439.3157) < 0.01

    def test_overhead_prints_reference(self, capsys):
        code = cli_main(
            ["overhead", "--scheme", "rlnc", "--n", "22", "--k", "16",
             "--trials", "2000", "--seed", "0"]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "mean_extra" in out
        assert "0.032" in out  # reference value printed, not asserted

    def test_overhead_mds_zero(self, capsys):
        assert cli_main(["overhead", "--scheme", "mds", "--trials", "10"]) == 0
        line = capsys.readouterr().out.strip().splitlines()[1]
        assert line.split(",")[4] == "0"

    def test_encode_bench(self, tmp_path):
        out = tmp_path / "bench.csv"
        code = cli_main(
            ["encode-bench", "--n", "4", "--k", "2", "--scheme", "rlnc",
             "--rows", "20", "--cols", "4", "--output", str(out)]
        )
        assert code == 0
        rows = _read_csv(out)
        assert [r[0] for r in rows[1:]] == ["encode"] * 4 + ["total"]
        encode_nanos = [int(r[5]) for r in rows[1:5]]
        assert all(v > 0 for v in encode_nanos)

    def test_config_file_with_flag_override(self, tmp_path):
        cfg = tmp_path / "exp.cfg"
        out = tmp_path / "m.csv"
        cfg.write_text("n = 4\nk = 2\nnum-iter = 3\nrows = 24\ncols = 4\n")
        code = cli_main(
            ["train", "--config", str(cfg), "--num-iter", "2", "--output", str(out)]
        )
        assert code == 0
        iter_rows = [r for r in _read_csv(out) if r[0] == "iterate"]
        assert len(iter_rows) == 2

    def test_weights_out(self, tmp_path):
        out = tmp_path / "m.csv"
        wout = tmp_path / "w.txt"
        code = cli_main(
            ["train", "--n", "4", "--k", "2", "--num-iter", "2", "--rows", "20",
             "--cols", "4", "--output", str(out), "--weights-out", str(wout)]
        )
        assert code == 0
        w = np.loadtxt(wout)
        assert w.shape == (4,)

    def test_missing_csv_dataset(self, tmp_path):
        code = cli_main(
            ["train", "--dataset", "csv", "--csv-path", str(tmp_path / "nope.csv")]
        )
        assert code == 2


class TestReproducibleCsv:
    def test_non_timing_columns_identical(self, tmp_path):
        outs = []
        for i in range(2):
            out = tmp_path / f"m{i}.csv"
            code = cli_main(
                ["train", "--n", "6", "--k", "3", "--scheme", "rlnc", "--model", "svm",
                 "--stragglers", "2", "--num-iter", "5", "--rows", "30", "--cols", "5",
                 "--output", str(out)]
            )
            assert code == 0
            outs.append(_read_csv(out))
        a, b = outs
        assert len(a) == len(b)
        timing = {METRICS_HEADER.index("encode_nanos"), METRICS_HEADER.index("wall_nanos")}
        for ra, rb in zip(a, b):
            stripped_a = [c for i, c in enumerate(ra) if i not in timing]
            stripped_b = [c for i, c in enumerate(rb) if i not in timing]
            assert stripped_a == stripped_b
