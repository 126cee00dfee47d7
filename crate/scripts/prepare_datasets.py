#!/usr/bin/env python3
"""Convert the raw dataset files into the CSV layout read by `dcshap`.

The raw files are not downloaded by this script. Point it at local copies:

  adult.data / adult.test   UCI Census Income (e.g. from the `responsibly` wheel)
  pima.dat                  KEEL Pima Indians Diabetes (e.g. from `imbalanced_databases`)
  heart_disease.tab         Cleveland heart disease (e.g. from the `orange3` wheel)
  iris.csv, wine_data.csv   scikit-learn bundled copies

Usage:
  prepare_datasets.py --adult-dir DIR --pima FILE --heart FILE --sklearn-data DIR --out data/
"""
import argparse
import csv
import json
import os
import re

ADULT_COLUMNS = [
    "age", "workclass", "fnlwgt", "education", "education-num", "marital-status",
    "occupation", "relationship", "race", "sex", "capital-gain", "capital-loss",
    "hours-per-week", "native-country", "income",
]

WINE_COLUMNS = [
    "alcohol", "malic_acid", "ash", "alcalinity_of_ash", "magnesium", "total_phenols",
    "flavanoids", "nonflavanoid_phenols", "proanthocyanins", "color_intensity", "hue",
    "od280_od315", "proline",
]


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    print(f"{path}: {len(rows)} rows")


def adult(src_dir, out):
    rows = []
    for name in ("adult.data", "adult.test"):
        with open(os.path.join(src_dir, name)) as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("|"):
                    continue
                cells = [c.strip() for c in line.split(",")]
                cells[-1] = cells[-1].rstrip(".")
                assert len(cells) == len(ADULT_COLUMNS), line
                rows.append(cells)
    write_csv(os.path.join(out, "adult.csv"), ADULT_COLUMNS, rows)


def pima(src, out):
    header, rows = [], []
    with open(src) as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("@attribute"):
                header.append(line.split()[1])
            elif line and not line.startswith("@"):
                cells = [c.strip() for c in line.split(",")]
                cells[-1] = "1" if cells[-1] == "positive" else "0"
                rows.append(cells)
    header[-1] = "diabetes"
    write_csv(os.path.join(out, "pima.csv"), header, rows)


def heart(src, out):
    with open(src) as fh:
        lines = fh.read().splitlines()
    header = [re.sub(r"[^A-Za-z0-9]+", "_", h.strip()).strip("_") for h in lines[0].split("\t")]
    rows = []
    for line in lines[3:]:
        cells = line.split("\t")
        if "?" in cells:
            continue
        rows.append(cells)
    header[-1] = "disease"
    write_csv(os.path.join(out, "heart.csv"), header, rows)


def sklearn_csv(src, out, name, header):
    with open(src) as fh:
        lines = fh.read().splitlines()[1:]
    rows = [l.split(",") for l in lines if l]
    write_csv(os.path.join(out, f"{name}.csv"), header, rows)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--adult-dir", required=True)
    ap.add_argument("--pima", required=True)
    ap.add_argument("--heart", required=True)
    ap.add_argument("--sklearn-data", required=True)
    ap.add_argument("--out", required=True)
    a = ap.parse_args()
    os.makedirs(a.out, exist_ok=True)
    adult(a.adult_dir, a.out)
    pima(a.pima, a.out)
    heart(a.heart, a.out)
    sklearn_csv(os.path.join(a.sklearn_data, "iris.csv"), a.out, "iris",
                ["sepal_length", "sepal_width", "petal_length", "petal_width", "species"])
    sklearn_csv(os.path.join(a.sklearn_data, "wine_data.csv"), a.out, "wine",
                WINE_COLUMNS + ["cultivar"])
    manifest = {
        "adult": {"path": "adult.csv", "label_column": "income"},
        "pima": {"path": "pima.csv", "label_column": "diabetes"},
        "heart": {"path": "heart.csv", "label_column": "disease"},
        "iris": {"path": "iris.csv", "label_column": "species"},
        "wine": {"path": "wine.csv", "label_column": "cultivar"},
    }
    with open(os.path.join(a.out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


if __name__ == "__main__":
    main()
