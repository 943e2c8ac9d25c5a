"""Acquisition of the Statlog (Landsat Satellite) dataset: 6435
ground-truthed pixels, 36 spectral covariates (named x.1 .. x.36), six
soil classes labeled 1, 2, 3, 4, 5 and 7.

The raw distribution ships as two space-separated files, sat.trn and
sat.tst, each row 36 integer covariates followed by the class label.
``load`` looks for a converted CSV or the raw pair (environment variable
FORESTFLOW_SATIMAGE, then an explicit directory, then ./data) and
``fetch`` downloads the raw files when network access permits.
"""

from __future__ import annotations

import os
import urllib.request
from pathlib import Path

import numpy as np

from forestflow.forest_io import read_dataset
from forestflow.rf_core import Dataset

__all__ = [
    "COVARIATE_NAMES",
    "RESPONSE_COLUMN",
    "CLASS_LABELS",
    "N_ROWS",
    "RAW_URLS",
    "dataset_from_raw",
    "write_csv",
    "fetch",
    "load",
]

N_ROWS = 6435
N_COVARIATES = 36
COVARIATE_NAMES = tuple(f"x.{j}" for j in range(1, N_COVARIATES + 1))
RESPONSE_COLUMN = "class"
CLASS_LABELS = frozenset({"1", "2", "3", "4", "5", "7"})
CSV_NAME = "satimage.csv"
RAW_NAMES = ("sat.trn", "sat.tst")
RAW_URLS = tuple(
    f"https://archive.ics.uci.edu/ml/machine-learning-databases/statlog/satimage/{name}"
    for name in RAW_NAMES
)


def _parse_raw(text, source):
    rows, labels = [], []
    for lineno, line in enumerate(text.splitlines(), start=1):
        fields = line.split()
        if not fields:
            continue
        if len(fields) != N_COVARIATES + 1:
            raise ValueError(
                f"{source}: line {lineno}: expected {N_COVARIATES + 1} fields, "
                f"found {len(fields)}"
            )
        try:
            rows.append([float(v) for v in fields[:-1]])
        except ValueError:
            raise ValueError(f"{source}: line {lineno}: non-numeric covariate") from None
        labels.append(fields[-1])
    return rows, labels


def dataset_from_raw(trn_text, tst_text):
    """Convert the raw sat.trn + sat.tst contents (in that order) into a
    validated Dataset."""
    rows, labels = _parse_raw(trn_text, "sat.trn")
    tst_rows, tst_labels = _parse_raw(tst_text, "sat.tst")
    rows.extend(tst_rows)
    labels.extend(tst_labels)
    data = Dataset.from_labels(COVARIATE_NAMES, np.array(rows, dtype=np.float64), labels)
    _check(data)
    return data


def _check(data):
    if data.n_rows != N_ROWS or data.n_covariates != N_COVARIATES:
        raise ValueError(
            f"expected {N_ROWS} rows x {N_COVARIATES} covariates, "
            f"got {data.n_rows} x {data.n_covariates}"
        )
    found = set(map(str, data.class_names))
    if found != CLASS_LABELS:
        raise ValueError(
            f"expected classes {sorted(CLASS_LABELS)}, found {sorted(found)}"
        )


def write_csv(data, path):
    """Write the dataset as CSV with header x.1..x.36,class; integer
    covariates stay integers."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join([*data.covariate_names, RESPONSE_COLUMN]) + "\n")
        labels = data.responses
        for i in range(data.n_rows):
            cells = [
                str(int(v)) if float(v).is_integer() else repr(float(v))
                for v in data.rows[i]
            ]
            cells.append(str(labels[i]))
            fh.write(",".join(cells) + "\n")


def fetch(dest_dir, timeout=120):
    """Download sat.trn and sat.tst into ``dest_dir``; returns the two
    file paths.  Needs direct network access to the UCI archive."""
    dest = Path(dest_dir)
    dest.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, url in zip(RAW_NAMES, RAW_URLS):
        target = dest / name
        if not target.is_file():
            with urllib.request.urlopen(url, timeout=timeout) as resp:
                target.write_bytes(resp.read())
        paths.append(target)
    return tuple(paths)


def _from_csv(path):
    data = read_dataset(path, RESPONSE_COLUMN)
    if data.covariate_names != COVARIATE_NAMES:
        if data.n_covariates != N_COVARIATES:
            raise ValueError(
                f"{path}: expected {N_COVARIATES} covariate columns, "
                f"found {data.n_covariates}"
            )
        # foreign column names: keep the column order, rename canonically
        data = Dataset(
            COVARIATE_NAMES, data.rows, data.response_codes, data.class_names
        )
    _check(data)
    return data


def load(data_dir=None, fetch_missing=False):
    """Locate and load the dataset.

    Search order: $FORESTFLOW_SATIMAGE (a CSV file or a directory), then
    ``data_dir``, then ./data; inside a directory, satimage.csv then the
    sat.trn/sat.tst pair.  With ``fetch_missing`` the raw files are
    downloaded into ``data_dir`` (or ./data) first.  Raises
    FileNotFoundError with supply instructions when nothing is found.
    """
    roots = []
    env = os.environ.get("FORESTFLOW_SATIMAGE")
    if env:
        roots.append(Path(env))
    if data_dir is not None:
        roots.append(Path(data_dir))
    roots.append(Path("data"))

    if fetch_missing:
        fetch(Path(data_dir) if data_dir is not None else Path("data"))

    for root in roots:
        if root.is_file():
            return _from_csv(root)
        if root.is_dir():
            csv_path = root / CSV_NAME
            if csv_path.is_file():
                return _from_csv(csv_path)
            trn, tst = (root / n for n in RAW_NAMES)
            if trn.is_file() and tst.is_file():
                return dataset_from_raw(
                    trn.read_text(encoding="utf-8"), tst.read_text(encoding="utf-8")
                )
    searched = ", ".join(str(r) for r in roots)
    raise FileNotFoundError(
        "Statlog Landsat data not found (searched: "
        f"{searched}). Supply it by setting FORESTFLOW_SATIMAGE to a "
        f"converted CSV or a directory holding {CSV_NAME} or "
        f"{' + '.join(RAW_NAMES)}, or download the raw files from "
        f"{' and '.join(RAW_URLS)} into ./data"
    )
