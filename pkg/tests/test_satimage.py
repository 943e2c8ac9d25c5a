"""Landsat dataset acquisition: parsing, conversion, search order."""

import numpy as np
import pytest

from forestflow import satimage


def _raw_lines(n_rows, start=0):
    lines = []
    labels = ["1", "2", "3", "4", "5", "7"]
    for i in range(start, start + n_rows):
        fields = [str((i * 7 + j) % 256) for j in range(satimage.N_COVARIATES)]
        fields.append(labels[i % len(labels)])
        lines.append(" ".join(fields))
    return "\n".join(lines) + "\n"


@pytest.fixture(scope="module")
def full_raw():
    trn = _raw_lines(4435)
    tst = _raw_lines(2000, start=4435)
    return trn, tst


class TestParseRaw:
    def test_accepts_blank_lines(self):
        rows, labels = satimage._parse_raw("\n" + _raw_lines(3) + "\n", "sat.trn")
        assert len(rows) == 3 and len(labels) == 3
        assert labels[1] == "2"

    def test_wrong_field_count_names_line(self):
        bad = _raw_lines(2) + "1 2 3\n"
        with pytest.raises(ValueError, match="sat.trn: line 3: expected 37"):
            satimage._parse_raw(bad, "sat.trn")

    def test_non_numeric_covariate(self):
        bad = _raw_lines(1).replace("0 ", "zero ", 1)
        with pytest.raises(ValueError, match="non-numeric covariate"):
            satimage._parse_raw(bad, "sat.tst")


class TestDatasetFromRaw:
    def test_builds_full_dataset(self, full_raw):
        data = satimage.dataset_from_raw(*full_raw)
        assert data.n_rows == satimage.N_ROWS
        assert data.covariate_names == satimage.COVARIATE_NAMES
        assert set(map(str, data.class_names)) == set(satimage.CLASS_LABELS)

    def test_wrong_row_count_rejected(self):
        with pytest.raises(ValueError, match="expected 6435 rows"):
            satimage.dataset_from_raw(_raw_lines(10), _raw_lines(5, start=10))

    def test_wrong_classes_rejected(self, full_raw):
        trn, tst = full_raw
        with pytest.raises(ValueError, match="expected classes"):
            satimage.dataset_from_raw(
                trn.replace(" 7\n", " 6\n"), tst.replace(" 7\n", " 6\n")
            )


class TestWriteCsv:
    def test_integers_stay_integers(self, tmp_path, full_raw):
        data = satimage.dataset_from_raw(*full_raw)
        out = tmp_path / "satimage.csv"
        satimage.write_csv(data, out)
        header, first = out.read_text().splitlines()[:2]
        assert header.startswith("x.1,x.2,") and header.endswith(",class")
        assert "." not in first.rsplit(",", 1)[0]  # no float formatting

    def test_round_trips_through_csv_loader(self, tmp_path, full_raw):
        data = satimage.dataset_from_raw(*full_raw)
        out = tmp_path / "satimage.csv"
        satimage.write_csv(data, out)
        again = satimage._from_csv(out)
        assert np.array_equal(again.rows, data.rows)
        assert np.array_equal(again.response_codes, data.response_codes)
        assert tuple(map(str, again.class_names)) == tuple(
            map(str, data.class_names)
        )


class TestLoad:
    @pytest.fixture(autouse=True)
    def isolate(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        monkeypatch.delenv("FORESTFLOW_SATIMAGE", raising=False)
        self.tmp_path = tmp_path
        self.monkeypatch = monkeypatch

    def test_missing_everywhere_gives_instructions(self):
        with pytest.raises(FileNotFoundError) as exc:
            satimage.load()
        msg = str(exc.value)
        assert "FORESTFLOW_SATIMAGE" in msg
        assert "satimage.csv" in msg
        assert "sat.trn" in msg and "sat.tst" in msg
        assert "archive.ics.uci.edu" in msg

    def test_env_points_at_csv(self, full_raw):
        data = satimage.dataset_from_raw(*full_raw)
        csv = self.tmp_path / "somewhere.csv"
        satimage.write_csv(data, csv)
        self.monkeypatch.setenv("FORESTFLOW_SATIMAGE", str(csv))
        assert satimage.load().n_rows == satimage.N_ROWS

    def test_directory_with_csv(self, full_raw):
        data = satimage.dataset_from_raw(*full_raw)
        root = self.tmp_path / "store"
        root.mkdir()
        satimage.write_csv(data, root / satimage.CSV_NAME)
        assert satimage.load(data_dir=root).n_rows == satimage.N_ROWS

    def test_directory_with_raw_pair(self, full_raw):
        trn, tst = full_raw
        root = self.tmp_path / "data"
        root.mkdir()
        (root / "sat.trn").write_text(trn)
        (root / "sat.tst").write_text(tst)
        # ./data is the default search root
        assert satimage.load().n_rows == satimage.N_ROWS

    def test_foreign_csv_headers_renamed(self, full_raw):
        data = satimage.dataset_from_raw(*full_raw)
        csv = self.tmp_path / "foreign.csv"
        satimage.write_csv(data, csv)
        text = csv.read_text().splitlines()
        text[0] = ",".join(f"V{j}" for j in range(1, 37)) + ",class"
        csv.write_text("\n".join(text) + "\n")
        loaded = satimage._from_csv(csv)
        assert loaded.covariate_names == satimage.COVARIATE_NAMES
