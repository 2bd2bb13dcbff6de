#!/usr/bin/env python3
"""Fetch MovieLens-100K into data/ml-100k/u.data.

The ratings ship inside the recbole wheel (dataset_example/ml-100k), which is
reachable through pip mirrors when grouplens.org is not.
"""

import argparse
import pathlib
import subprocess
import sys
import tempfile
import zipfile

MEMBER = "recbole/dataset_example/ml-100k/ml-100k.inter"


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    root = pathlib.Path(__file__).resolve().parent.parent
    parser.add_argument("--out", type=pathlib.Path, default=root / "data" / "ml-100k" / "u.data")
    args = parser.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(
            [sys.executable, "-m", "pip", "download", "recbole==1.2.1", "--no-deps", "-d", tmp],
            check=True,
        )
        wheel = next(pathlib.Path(tmp).glob("recbole-*.whl"))
        with zipfile.ZipFile(wheel) as zf:
            lines = zf.read(MEMBER).decode().splitlines()

    # header: user_id:token item_id:token rating:float timestamp:float
    rows = [line for line in lines[1:] if line.strip()]
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text("\n".join(rows) + "\n")
    print(f"wrote {len(rows)} ratings to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
