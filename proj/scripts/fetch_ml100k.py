#!/usr/bin/env python3
# Copyright 2026 The lfgrec Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Fetch MovieLens 100k into data/ml-100k (u.data, u.user, u.occupation).

Tries the GroupLens archive first. Without access to it, the same rows are
rebuilt from the copy bundled in the RecBole wheel on PyPI.
"""

import argparse
import hashlib
import io
import subprocess
import sys
import tempfile
import urllib.request
import zipfile
from pathlib import Path

GROUPLENS_URL = "https://files.grouplens.org/datasets/movielens/ml-100k.zip"
U_DATA_MD5 = "6e47046882bad158b0efbb84cd5cb987"
OCCUPATIONS = [
    "administrator", "artist", "doctor", "educator", "engineer", "entertainment", "executive",
    "healthcare", "homemaker", "lawyer", "librarian", "marketing", "none", "other", "programmer",
    "retired", "salesman", "scientist", "student", "technician", "writer",
]


def from_grouplens(out: Path) -> None:
    with urllib.request.urlopen(GROUPLENS_URL, timeout=30) as resp:
        archive = zipfile.ZipFile(io.BytesIO(resp.read()))
    for name in ("u.data", "u.user", "u.occupation"):
        (out / name).write_bytes(archive.read(f"ml-100k/{name}"))


def from_recbole(out: Path) -> None:
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run([sys.executable, "-m", "pip", "download", "recbole==1.2.1", "--no-deps",
                        "-d", tmp, "-q"], check=True)
        wheel = next(Path(tmp).glob("recbole-*.whl"))
        with zipfile.ZipFile(wheel) as z:
            inter = z.read("recbole/dataset_example/ml-100k/ml-100k.inter").decode()
            users = z.read("recbole/dataset_example/ml-100k/ml-100k.user").decode()

    rows = []
    for line in inter.splitlines()[1:]:
        if line.strip():
            user, item, rating, ts = line.split("\t")
            rows.append(f"{user}\t{item}\t{int(float(rating))}\t{int(float(ts))}\n")
    (out / "u.data").write_text("".join(rows))

    people = []
    for line in users.splitlines()[1:]:
        if line.strip():
            people.append("|".join(line.split("\t")[:5]) + "\n")
    people.sort(key=lambda s: int(s.split("|", 1)[0]))
    (out / "u.user").write_text("".join(people))
    (out / "u.occupation").write_text("".join(o + "\n" for o in OCCUPATIONS))


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=Path("data/ml-100k"))
    parser.add_argument("--source", choices=["auto", "grouplens", "recbole"], default="auto")
    args = parser.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    sources = {"grouplens": [from_grouplens], "recbole": [from_recbole],
               "auto": [from_grouplens, from_recbole]}[args.source]
    for fetch in sources:
        try:
            fetch(args.out)
            break
        except Exception as exc:  # noqa: BLE001 - fall through to the next source
            print(f"{fetch.__name__}: {exc}", file=sys.stderr)
    else:
        return 1

    digest = hashlib.md5((args.out / "u.data").read_bytes()).hexdigest()
    if digest != U_DATA_MD5:
        print(f"warning: u.data md5 {digest} differs from the GroupLens release", file=sys.stderr)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
