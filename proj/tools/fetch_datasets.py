#!/usr/bin/env python3
"""Materialize the Adult, COMPAS and German Credit CSVs under data/.

The raw UCI / ProPublica files are taken from the `responsibly` wheel on
PyPI, which redistributes them unmodified. Conversion is deliberately thin:

  adult.csv   adult.data + adult.test concatenated, header added, cells
              whitespace-stripped. Missing cells keep their raw "?" token and
              test-split labels keep their trailing "." (the schema handles
              both).
  compas.csv  compas-scores-two-years.csv copied byte for byte.
  german.csv  german.data (space separated, no header) rewritten as CSV with
              the attribute names from the UCI documentation.
"""

import argparse
import csv
import hashlib
import io
import pathlib
import subprocess
import sys
import tempfile
import zipfile

WHEEL = "responsibly-0.1.2-py3-none-any.whl"
WHEEL_SHA256 = "38cd0f88de722d2276bc106910588e56feb1037dcf2a526fb0fec510f66d190b"

ADULT_COLUMNS = [
    "age", "workclass", "fnlwgt", "education", "education-num",
    "marital-status", "occupation", "relationship", "race", "sex",
    "capital-gain", "capital-loss", "hours-per-week", "native-country",
    "income",
]

GERMAN_COLUMNS = [
    "checking_status", "duration", "credit_history", "purpose",
    "credit_amount", "savings_status", "employment", "installment_rate",
    "personal_status_sex", "other_debtors", "residence_since", "property",
    "age", "other_installment_plans", "housing", "existing_credits", "job",
    "num_dependents", "telephone", "foreign_worker", "credit_risk",
]


def fetch_wheel(workdir: pathlib.Path) -> pathlib.Path:
    subprocess.run(
        [sys.executable, "-m", "pip", "download", "--no-deps", "--quiet",
         "-d", str(workdir), "responsibly==0.1.2"],
        check=True,
    )
    path = workdir / WHEEL
    digest = hashlib.sha256(path.read_bytes()).hexdigest()
    if digest != WHEEL_SHA256:
        raise SystemExit(f"checksum mismatch for {WHEEL}: {digest}")
    return path


def write_adult(z: zipfile.ZipFile, out: pathlib.Path) -> int:
    rows = []
    for member in ("adult.data", "adult.test"):
        text = z.read(f"responsibly/dataset/adult/{member}").decode()
        for line in text.splitlines():
            if not line.strip() or line.startswith("|"):
                continue
            cells = [c.strip() for c in line.split(",")]
            if len(cells) != len(ADULT_COLUMNS):
                continue
            rows.append(cells)
    with out.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ADULT_COLUMNS)
        w.writerows(rows)
    return len(rows)


def write_compas(z: zipfile.ZipFile, out: pathlib.Path) -> int:
    raw = z.read("responsibly/dataset/compas/compas-scores-two-years.csv")
    out.write_bytes(raw)
    return raw.count(b"\n") - 1


def write_german(z: zipfile.ZipFile, out: pathlib.Path) -> int:
    text = z.read("responsibly/dataset/german/german.data").decode()
    rows = [line.split() for line in text.splitlines() if line.strip()]
    with out.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(GERMAN_COLUMNS)
        w.writerows(rows)
    return len(rows)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parents[1] / "data"))
    parser.add_argument("--wheel", help="use an already downloaded wheel")
    args = parser.parse_args()

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        wheel = pathlib.Path(args.wheel) if args.wheel else fetch_wheel(pathlib.Path(tmp))
        with zipfile.ZipFile(wheel) as z:
            print("adult.csv ", write_adult(z, out / "adult.csv"), "rows")
            print("compas.csv", write_compas(z, out / "compas.csv"), "rows")
            print("german.csv", write_german(z, out / "german.csv"), "rows")
    return 0


if __name__ == "__main__":
    sys.exit(main())
