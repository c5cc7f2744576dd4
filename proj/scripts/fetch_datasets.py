#!/usr/bin/env python3
"""Materialize the benchmark CSVs the acceptance suite consumes.

Writes into data/:
  wdb.csv  Wisconsin Diagnostic Breast Cancer (569 x 30, binary label in the
           last column), taken from scikit-learn's bundled copy.
  pim.csv  Pima Indians Diabetes (768 x 8, binary label in the last column),
           downloaded from the UCI repository; needs network access.

Both files are plain comma-separated with no header; the label is the last
column, encoded 0/1.
"""

import csv
import io
import sys
import urllib.request
from pathlib import Path

DATA_DIR = Path(__file__).resolve().parent.parent / "data"

PIMA_URLS = [
    "https://raw.githubusercontent.com/jbrownlee/Datasets/master/pima-indians-diabetes.data.csv",
    "https://archive.ics.uci.edu/ml/machine-learning-databases/pima-indians-diabetes/pima-indians-diabetes.data",
]


def write_wdb() -> None:
    from sklearn.datasets import load_breast_cancer

    bunch = load_breast_cancer()
    out = DATA_DIR / "wdb.csv"
    with out.open("w", newline="") as f:
        writer = csv.writer(f)
        for row, label in zip(bunch.data, bunch.target):
            writer.writerow([repr(float(v)) for v in row] + [int(label)])
    print(f"wrote {out} ({len(bunch.target)} rows)")


def write_pim() -> None:
    out = DATA_DIR / "pim.csv"
    last_error = None
    for url in PIMA_URLS:
        try:
            with urllib.request.urlopen(url, timeout=30) as resp:
                text = resp.read().decode("utf-8")
            rows = [r for r in csv.reader(io.StringIO(text)) if r]
            if len(rows) != 768 or len(rows[0]) != 9:
                raise ValueError(f"unexpected shape from {url}: {len(rows)} rows")
            with out.open("w", newline="") as f:
                csv.writer(f).writerows(rows)
            print(f"wrote {out} ({len(rows)} rows)")
            return
        except Exception as exc:  # noqa: BLE001 - report and try the next mirror
            last_error = exc
            print(f"  {url}: {exc}", file=sys.stderr)
    print(
        "could not download the Pima Indians Diabetes dataset; "
        "place it manually at data/pim.csv (768 rows, 8 features + 0/1 label)",
        file=sys.stderr,
    )
    raise SystemExit(1 if last_error else 0)


def main() -> None:
    DATA_DIR.mkdir(exist_ok=True)
    write_wdb()
    write_pim()


if __name__ == "__main__":
    main()
