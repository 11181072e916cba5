#!/usr/bin/env python3
"""Download the nine benchmark datasets and normalize them to the CSV
layout the run configs expect: comma-separated, no header row, class
label in the last column.

    python scripts/fetch_data.py            # everything into ./data
    python scripts/fetch_data.py --only magic spam
    python scripts/fetch_data.py --out /tmp/data --force

Two datasets ship as Excel workbooks and need an extra package each:
cryotherapy wants `openpyxl`, credit wants `xlrd`. Every other dataset
uses only the standard library. A dataset whose download or conversion
fails is reported and skipped; the rest still complete.
"""

import argparse
import csv
import io
import sys
import urllib.error
import urllib.request
import zipfile
from pathlib import Path

# Some mirrors reject the default urllib agent.
USER_AGENT = "Mozilla/5.0 (dataset fetcher; stdlib urllib)"
TIMEOUT = 60


def fetch(url: str) -> bytes:
    request = urllib.request.Request(url, headers={"User-Agent": USER_AGENT})
    with urllib.request.urlopen(request, timeout=TIMEOUT) as response:
        return response.read()


def fetch_any(sources):
    """Try (url, member) pairs in order; member picks a file out of a zip."""
    errors = []
    for url, member in sources:
        try:
            raw = fetch(url)
        except (urllib.error.URLError, OSError, ValueError) as e:
            errors.append(f"{url}: {e}")
            continue
        if member is None:
            return raw
        try:
            with zipfile.ZipFile(io.BytesIO(raw)) as archive:
                for name in archive.namelist():
                    if name.lower().endswith(member.lower()):
                        return archive.read(name)
            errors.append(f"{url}: no member ending in {member!r}")
        except zipfile.BadZipFile as e:
            errors.append(f"{url}: {e}")
    raise RuntimeError("all sources failed:\n  " + "\n  ".join(errors))


def fmt_cell(value) -> str:
    """Excel floats like 1.0 come back as '1'; everything else verbatim."""
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    return str(value).strip()


def delimited_rows(raw: bytes, delimiter=None, skip=0, drop_first_col=False):
    """Rows from text data; `delimiter=None` splits on any whitespace."""
    text = raw.decode("utf-8", errors="replace")
    rows = []
    for line in text.splitlines()[skip:]:
        line = line.strip()
        if not line:
            continue
        cells = line.split(delimiter) if delimiter else line.split()
        if drop_first_col:
            cells = cells[1:]
        rows.append([c.strip() for c in cells])
    return rows


def xlsx_rows(raw: bytes, skip=1, drop_first_col=False):
    try:
        import openpyxl
    except ImportError:
        raise RuntimeError("needs openpyxl (pip install openpyxl)") from None
    book = openpyxl.load_workbook(io.BytesIO(raw), read_only=True, data_only=True)
    sheet = book[book.sheetnames[0]]
    rows = []
    for i, row in enumerate(sheet.iter_rows(values_only=True)):
        if i < skip or all(v is None for v in row):
            continue
        cells = [fmt_cell(v) for v in row]
        rows.append(cells[1:] if drop_first_col else cells)
    return rows


def xls_rows(raw: bytes, skip=1, drop_first_col=False):
    try:
        import xlrd
    except ImportError:
        raise RuntimeError("needs xlrd (pip install xlrd)") from None
    book = xlrd.open_workbook(file_contents=raw)
    sheet = book.sheet_by_index(0)
    rows = []
    for i in range(skip, sheet.nrows):
        cells = [fmt_cell(sheet.cell_value(i, c)) for c in range(sheet.ncols)]
        rows.append(cells[1:] if drop_first_col else cells)
    return rows


UCI_FILES = "https://archive.ics.uci.edu/ml/machine-learning-databases"
UCI_ZIPS = "https://archive.ics.uci.edu/static/public"

DATASETS = {
    "cryotherapy": {
        "sources": [
            (f"{UCI_FILES}/00429/Cryotherapy.xlsx", None),
            (f"{UCI_ZIPS}/429/cryotherapy+dataset.zip", "Cryotherapy.xlsx"),
        ],
        "convert": lambda raw: xlsx_rows(raw, skip=1),
        "shape": (90, 6),
    },
    "heart": {
        "sources": [
            (f"{UCI_FILES}/statlog/heart/heart.dat", None),
            (f"{UCI_ZIPS}/145/statlog+heart.zip", "heart.dat"),
        ],
        "convert": lambda raw: delimited_rows(raw),
        "shape": (270, 13),
    },
    "segment": {
        "sources": [
            (f"{UCI_FILES}/statlog/segment/segment.dat", None),
            (f"{UCI_ZIPS}/147/statlog+image+segmentation.zip", "segment.dat"),
        ],
        "convert": lambda raw: delimited_rows(raw),
        "shape": (2310, 19),
    },
    "glass": {
        "sources": [
            (f"{UCI_FILES}/glass/glass.data", None),
            (f"{UCI_ZIPS}/42/glass+identification.zip", "glass.data"),
        ],
        # First column is a row id.
        "convert": lambda raw: delimited_rows(raw, ",", drop_first_col=True),
        "shape": (214, 9),
    },
    "magic": {
        "sources": [
            (f"{UCI_FILES}/magic/magic04.data", None),
            (f"{UCI_ZIPS}/159/magic+gamma+telescope.zip", "magic04.data"),
        ],
        "convert": lambda raw: delimited_rows(raw, ","),
        "shape": (19020, 10),
    },
    "diabetes": {
        "sources": [
            (
                "https://raw.githubusercontent.com/jbrownlee/Datasets/master/"
                "pima-indians-diabetes.data.csv",
                None,
            ),
            (f"{UCI_FILES}/pima-indians-diabetes/pima-indians-diabetes.data", None),
        ],
        "convert": lambda raw: delimited_rows(raw, ","),
        "shape": (768, 8),
    },
    "credit": {
        "sources": [
            (f"{UCI_FILES}/00350/default%20of%20credit%20card%20clients.xls", None),
            (f"{UCI_ZIPS}/350/default+of+credit+card+clients.zip", ".xls"),
        ],
        # Two header rows (variable codes, then names), then an id column.
        "convert": lambda raw: xls_rows(raw, skip=2, drop_first_col=True),
        "shape": (30000, 23),
    },
    "ionosphere": {
        "sources": [
            (f"{UCI_FILES}/ionosphere/ionosphere.data", None),
            (f"{UCI_ZIPS}/52/ionosphere.zip", "ionosphere.data"),
        ],
        "convert": lambda raw: delimited_rows(raw, ","),
        "shape": (351, 34),
    },
    "spam": {
        "sources": [
            (f"{UCI_FILES}/spambase/spambase.data", None),
            (f"{UCI_ZIPS}/94/spambase.zip", "spambase.data"),
        ],
        "convert": lambda raw: delimited_rows(raw, ","),
        "shape": (4601, 57),
    },
}


def write_csv(rows, path: Path):
    with path.open("w", newline="") as handle:
        csv.writer(handle, lineterminator="\n").writerows(rows)


def process(name: str, out_dir: Path, force: bool) -> bool:
    entry = DATASETS[name]
    target = out_dir / f"{name}.csv"
    if target.exists() and not force:
        print(f"{name}: {target} already exists, skipping (use --force to refetch)")
        return True
    try:
        raw = fetch_any(entry["sources"])
        rows = entry["convert"](raw)
    except RuntimeError as e:
        print(f"{name}: FAILED: {e}", file=sys.stderr)
        return False

    expected_rows, expected_features = entry["shape"]
    widths = {len(r) for r in rows}
    if len(rows) != expected_rows or widths != {expected_features + 1}:
        print(
            f"{name}: WARNING: got {len(rows)} rows of widths {sorted(widths)}, "
            f"expected {expected_rows} rows of width {expected_features + 1} "
            "(source layout may have changed; writing anyway)",
            file=sys.stderr,
        )
    write_csv(rows, target)
    print(f"{name}: wrote {len(rows)} rows -> {target}")
    return True


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--out",
        type=Path,
        default=Path(__file__).resolve().parent.parent / "data",
        help="output directory (default: the repository's data/)",
    )
    parser.add_argument(
        "--only",
        nargs="+",
        choices=sorted(DATASETS),
        help="fetch just these datasets",
    )
    parser.add_argument("--force", action="store_true", help="refetch existing files")
    args = parser.parse_args()

    args.out.mkdir(parents=True, exist_ok=True)
    names = args.only or sorted(DATASETS)
    failures = [name for name in names if not process(name, args.out, args.force)]
    if failures:
        print(f"failed: {', '.join(failures)}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
