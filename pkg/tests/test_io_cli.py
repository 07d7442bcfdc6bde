import csv
import json

import numpy as np
import pytest

from ising_impute import io as fio
from ising_impute.cli import main
from ising_impute.dataset import MISSING, ObservedDataset
from ising_impute.errors import ValidationError
from ising_impute.identifiability import restricted_distribution
from ising_impute.polyagamma import pg_mean

FAST = ["--iterations", "60", "--burn-in", "20", "--thinning", "2"]


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


class TestFormats:
    def test_dataset_round_trip(self, tmp_path, rng):
        cells = rng.integers(0, 2, (50, 4))
        cells[rng.random((50, 4)) < 0.3] = MISSING
        cells[:, 0] = 1
        d = ObservedDataset(cells=cells)
        fio.write_dataset(tmp_path / "d.csv", d)
        back = fio.read_dataset(tmp_path / "d.csv")
        assert np.array_equal(back.cells, d.cells)
        lines = (tmp_path / "d.csv").read_text().splitlines()
        assert lines[0] == "item_1,item_2,item_3,item_4"
        assert set(",".join(lines[1:]).split(",")) <= {"0", "1", "NA"}

    @pytest.mark.parametrize("text", [
        "item_1,item_2\n0,2\n",
        "item_1,item_2\n0,na\n",
        "a,b\n0,1\n",
        "item_1,item_2\n0\n",
        "item_1,item_2\nNA,NA\n",
    ])
    def test_dataset_parse_errors(self, tmp_path, text):
        (tmp_path / "bad.csv").write_text(text)
        with pytest.raises(ValidationError):
            fio.read_dataset(tmp_path / "bad.csv")

    def test_float_formatting_round_trips(self, rng):
        for x in rng.normal(size=100) * 10.0 ** rng.integers(-8, 8, 100):
            assert float(fio.fmt_float(x)) == x
        assert fio.fmt_float(0.1) == "0.1"
        assert fio.fmt_float(np.nan) == "NA"

    def test_draws_round_trip(self, tmp_path, rng):
        x = rng.normal(size=(2, 5, 6))
        fio.write_draws(tmp_path / "d.csv", x)
        assert np.array_equal(fio.read_draws(tmp_path / "d.csv"), x)
        header = (tmp_path / "d.csv").read_text().splitlines()[0]
        assert header == "chain,draw,s_1_1,s_2_1,s_3_1,s_2_2,s_3_2,s_3_3"

    def test_matrix_json_round_trip(self, tmp_path, study2_truth):
        fio.write_matrix_json(tmp_path / "m.json", study2_truth, study="II")
        assert np.array_equal(fio.read_matrix_json(tmp_path / "m.json"), study2_truth)

    def test_dot_export(self, tmp_path):
        S = np.zeros((3, 3))
        S[0, 1] = S[1, 0] = 0.7
        S[1, 2] = S[2, 1] = -0.9
        S[0, 2] = S[2, 0] = 0.2
        fio.write_dot(tmp_path / "g.dot", S, threshold=0.5)
        text = (tmp_path / "g.dot").read_text()
        assert text.startswith("graph ")
        assert "1 -- 2 [weight=0.7, color=blue" in text
        assert "2 -- 3 [weight=-0.9, color=orange" in text
        assert "1 -- 3" not in text and "->" not in text

    def test_restricted_table_round_trip(self, tmp_path, study2_truth):
        r = restricted_distribution(study2_truth)
        fio.write_restricted_table(tmp_path / "t.csv", r)
        back = fio.read_restricted_table(tmp_path / "t.csv")
        assert np.array_equal(back.codes, r.codes)
        assert np.array_equal(back.probs, r.probs) and back.prob_00 == r.prob_00


@pytest.fixture
def in_tmp(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


class TestSimulate:
    def test_study2_mask_audit(self, in_tmp):
        assert main(["simulate", "--study", "II", "--n", "8000", "--seed", "7", "--out-dir", "s"]) == 0
        d = fio.read_dataset("s/data.csv")
        assert d.cells.shape == (8000, 6)
        screened_out = (d.cells[:, 0] == 0) & (d.cells[:, 1] == 0)
        assert np.array_equal(d.missing_mask.any(axis=1), screened_out)
        assert np.all(d.missing_mask[screened_out][:, 2:])
        truth = json.loads((in_tmp / "s/truth.json").read_text())
        assert truth["matrix"][0][1] == 0.5 and truth["missingness"]["kind"] == "SCREENING"

    def test_study1_anchor_observed(self, in_tmp):
        assert main(["simulate", "--study", "I", "--n", "1000", "--out-dir", "s"]) == 0
        d = fio.read_dataset("s/data.csv")
        assert not d.missing_mask[:, 5].any() and d.n_missing > 0

    def test_zero_matrix(self, in_tmp):
        assert main(["simulate", "--j", "3", "--s", "zero", "--n", "100", "--out-dir", "s"]) == 0
        d = fio.read_dataset("s/data.csv")
        assert d.n_missing == 0 and d.cells.shape == (100, 3)
        assert np.all(np.abs(d.cells.mean(axis=0) - 0.5) < 0.2)

    def test_config_file_and_override(self, in_tmp):
        (in_tmp / "c.json").write_text(json.dumps({"study": "III", "n": 50, "mcar_rate": 0.1}))
        assert main(["simulate", "--config", "c.json", "--n", "80", "--out-dir", "s"]) == 0
        d = fio.read_dataset("s/data.csv")
        assert d.n_items == 15 and d.n_rows == 80

    def test_invalid(self, in_tmp, capsys):
        assert main(["simulate", "--study", "IV", "--n", "10"]) == 2
        assert main(["simulate", "--j", "3", "--n", "10", "--mcar-rate", "2"]) == 2
        (in_tmp / "c.json").write_text(json.dumps({"bogus": 1}))
        assert main(["simulate", "--config", "c.json", "--n", "10"]) == 2
        assert "error" in capsys.readouterr().err


class TestFit:
    def test_complete_case_berkson_sign(self, in_tmp):
        main(["simulate", "--study", "II", "--n", "8000", "--seed", "3", "--out-dir", "s"])
        assert main(["fit", "s/data.csv", "--method", "complete", "--seed", "1", "--out-dir", "f"]) == 0
        est = fio.read_matrix_json("f/estimate_complete_case.json")
        assert est[0, 1] < -2

    def test_chains_report_psrf(self, in_tmp):
        main(["simulate", "--study", "II", "--n", "300", "--out-dir", "s"])
        assert main(["fit", "s/data.csv", "--chains", "10", "--out-dir", "f", *FAST]) == 0
        diag = json.loads((in_tmp / "f/diagnostics_proposed.json").read_text())
        assert diag["max_psrf"] >= 1.0 - 0.05 and len(diag["psrf"]) == 21
        assert diag["n_chains"] == 10 and diag["observed_cells_unchanged"]
        draws = fio.read_draws(in_tmp / "f/draws_proposed.csv")
        assert draws.shape == (10, 20, 21)
        assert (in_tmp / "f/network_proposed.dot").exists()

    def test_complete_data_matches_complete_method(self, in_tmp):
        main(["simulate", "--j", "4", "--s", "random", "--n", "400", "--out-dir", "s"])
        assert main(["fit", "s/data.csv", "--out-dir", "a", *FAST]) == 0
        assert main(["fit", "s/data.csv", "--method", "complete", "--out-dir", "b", *FAST]) == 0
        a = fio.read_matrix_json("a/estimate_proposed.json")
        b = fio.read_matrix_json("b/estimate_complete_case.json")
        assert np.array_equal(a, b)
        assert (in_tmp / "a/draws_proposed.csv").read_bytes() == (in_tmp / "b/draws_complete_case.csv").read_bytes()

    def test_empty_complete_case_exit_code(self, in_tmp):
        (in_tmp / "d.csv").write_text("item_1,item_2\n0,NA\nNA,1\n1,NA\n")
        assert main(["fit", "d.csv", "--method", "complete", *FAST]) == 4
        assert main(["fit", "d.csv", "--method", "all", "--out-dir", "o", *FAST]) == 4
        assert (in_tmp / "o/estimate_proposed.json").exists()

    def test_validation_exit_codes(self, in_tmp):
        (in_tmp / "d.csv").write_text("item_1,item_2\nNA,NA\n1,0\n")
        assert main(["fit", "d.csv", *FAST]) == 2
        assert main(["fit", "d.csv", "--drop-empty-rows", *FAST]) == 0
        assert main(["fit", "missing.csv"]) == 2
        assert main(["fit", "d.csv", "--drop-empty-rows", "--iterations", "5", "--burn-in", "9"]) == 2

    def test_record_beta(self, in_tmp):
        main(["simulate", "--study", "I", "--n", "200", "--out-dir", "s"])
        assert main(["fit", "s/data.csv", "--record-beta", "--no-dot", "--out-dir", "f", *FAST]) == 0
        rows = read_rows(in_tmp / "f/beta_proposed.csv")
        assert len(rows) == 20 * 6
        assert not (in_tmp / "f/network_proposed.dot").exists()


class TestPgTest:
    def test_rows(self, in_tmp):
        assert main(["pg-test", "--c", "0,2", "--draws", "20000", "--out-dir", "p"]) == 0
        rows = read_rows(in_tmp / "p/pg_test.csv")
        assert [float(r["c"]) for r in rows] == [0.0, 2.0]
        assert abs(float(rows[0]["z_score"])) < 4
        assert float(rows[1]["pg_mean"]) == pg_mean(2.0)
        assert float(rows[1]["pg_mean"]) == pytest.approx(np.tanh(1.0) / 4, abs=1e-14)

    def test_deterministic(self, in_tmp):
        main(["pg-test", "--draws", "5000", "--seed", "3", "--out-dir", "a"])
        main(["pg-test", "--draws", "5000", "--seed", "3", "--out-dir", "b"])
        assert (in_tmp / "a/pg_test.csv").read_bytes() == (in_tmp / "b/pg_test.csv").read_bytes()


class TestRecover:
    def test_study2_table(self, in_tmp, study2_truth):
        fio.write_restricted_table(in_tmp / "t.csv", restricted_distribution(study2_truth))
        assert main(["recover", "t.csv", "--out-dir", "r"]) == 0
        np.testing.assert_allclose(fio.read_matrix_json("r/recovered.json"), study2_truth, atol=1e-8)

    def test_bad_table(self, in_tmp):
        (in_tmp / "t.csv").write_text("item_1,item_2,item_3,prob\n1,0,0,0.5\n")
        assert main(["recover", "t.csv"]) == 2


class TestStudyAndReplay:
    def test_study_tables(self, in_tmp):
        args = ["study", "III", "--reps", "2", "--n", "150", "--methods", "proposed,complete",
                "--out-dir", "st", *FAST]
        assert main(args) == 0
        rec = read_rows(in_tmp / "st/recovery.csv")
        assert {r["method"] for r in rec} == {"proposed", "complete_case"}
        for r in rec:
            if r["auc"] != "NA":
                assert 0 <= float(r["auc"]) <= 1
        mse = read_rows(in_tmp / "st/mse_bias.csv")
        assert len(mse) == 2 * 120
        assert (in_tmp / "st/roc.csv").exists() and (in_tmp / "st/estimates_long.csv").exists()

    def test_replay_identical(self, in_tmp, capsys):
        main(["simulate", "--study", "II", "--n", "300", "--seed", "5", "--out-dir", "s"])
        assert main(["fit", "s/data.csv", "--method", "all", "--chains", "2", "--out-dir", "f", *FAST]) == 0
        assert main(["replay", "f/manifest.json", "--out-dir", str(in_tmp / "again")]) == 0
        assert "identical" in capsys.readouterr().out
        for name in json.loads((in_tmp / "f/manifest.json").read_text())["outputs"]:
            assert (in_tmp / "f" / name).read_bytes() == (in_tmp / "again" / name).read_bytes()

    def test_replay_detects_change(self, in_tmp):
        main(["pg-test", "--draws", "1000", "--out-dir", "p"])
        m = json.loads((in_tmp / "p/manifest.json").read_text())
        m["outputs"]["pg_test.csv"] = "0" * 64
        (in_tmp / "p/manifest.json").write_text(json.dumps(m))
        assert main(["replay", "p/manifest.json", "--out-dir", str(in_tmp / "q")]) == 1

    def test_threads_env(self, in_tmp, monkeypatch):
        monkeypatch.setenv("ISING_IMPUTE_THREADS", "2")
        main(["simulate", "--study", "II", "--n", "200", "--out-dir", "s"])
        assert main(["fit", "s/data.csv", "--chains", "2", "--out-dir", "a", *FAST]) == 0
        monkeypatch.setenv("ISING_IMPUTE_THREADS", "1")
        assert main(["fit", "s/data.csv", "--chains", "2", "--out-dir", "b", *FAST]) == 0
        assert (in_tmp / "a/draws_proposed.csv").read_bytes() == (in_tmp / "b/draws_proposed.csv").read_bytes()
        monkeypatch.setenv("ISING_IMPUTE_THREADS", "zero")
        assert main(["fit", "s/data.csv", "--out-dir", "c", *FAST]) == 2
