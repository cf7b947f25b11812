"""Materialize MovieLens-100K in its original file layouts.

GroupLens does not allow redistribution, so the data is not shipped with
this repository.  When files.grouplens.org is reachable, download
``ml-100k.zip`` yourself and unpack it.  Otherwise this script rebuilds
``u.data``, ``u.item`` and ``u.genre`` from the copy bundled inside the
``recbole`` wheel (the ratings are identical; titles lose their year suffix
formatting and release dates are reduced to the year).

Usage::

    python scripts/fetch_movielens.py [OUT_DIR]

``OUT_DIR`` defaults to ``$COLDSTART_CRBM_DATA/ml-100k`` or
``/root/data/ml-100k``.
"""

import io
import os
import subprocess
import sys
import tempfile
import zipfile
from pathlib import Path

# u.genre order; u.item flag columns follow it
GENRES = [
    "unknown", "Action", "Adventure", "Animation", "Children's", "Comedy",
    "Crime", "Documentary", "Drama", "Fantasy", "Film-Noir", "Horror",
    "Musical", "Mystery", "Romance", "Sci-Fi", "Thriller", "War", "Western",
]
PREFIX = "recbole/dataset_example/ml-100k/"


def _wheel_bytes():
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(
            [sys.executable, "-m", "pip", "download", "--no-deps", "--quiet",
             "-d", tmp, "recbole==1.2.1"],
            check=True,
        )
        (whl,) = Path(tmp).glob("recbole-*.whl")
        return whl.read_bytes()


def main(out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    z = zipfile.ZipFile(io.BytesIO(_wheel_bytes()))

    inter = z.read(PREFIX + "ml-100k.inter").decode("latin-1").splitlines()
    with open(out / "u.data", "w", encoding="latin-1", newline="\n") as fh:
        for line in inter[1:]:
            fh.write(line + "\n")

    items = z.read(PREFIX + "ml-100k.item").decode("latin-1").splitlines()
    with open(out / "u.item", "w", encoding="latin-1", newline="\n") as fh:
        for line in items[1:]:
            item_id, title, year, classes = (line.split("\t") + [""] * 4)[:4]
            present = set(classes.split())
            flags = ["1" if g in present else "0" for g in GENRES]
            fields = [item_id, f"{title} ({year})" if year else title, year, "", ""]
            fh.write("|".join(fields + flags) + "\n")

    with open(out / "u.genre", "w", encoding="latin-1", newline="\n") as fh:
        for i, g in enumerate(GENRES):
            fh.write(f"{g}|{i}\n")

    print(f"wrote {len(inter) - 1} ratings and {len(items) - 1} items to {out}")


if __name__ == "__main__":
    default = Path(os.environ.get("COLDSTART_CRBM_DATA", "/root/data")) / "ml-100k"
    main(sys.argv[1] if len(sys.argv) > 1 else default)
