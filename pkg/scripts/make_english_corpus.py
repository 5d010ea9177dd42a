"""Rebuild tests/data/english_pd.txt.gz from the shakespeare 0.6 source distribution.

Usage: python scripts/make_english_corpus.py <unpacked shakespeare-0.6 dir> <out.txt.gz>

The texts are public-domain Project Gutenberg editions. Every run of
characters outside ``[A-Za-z']`` becomes one space, apostrophes become spaces,
and everything is lowercased.
"""

import glob
import gzip
import os
import re
import sys

EXTRA = [
    "miltondata/texts/paradise_lost_(no_introduction)_gut.txt",
    "miltondata/texts/paradise_regained_gut.txt",
    "miltondata/texts/areopagitica_gut.txt",
    "miltondata/texts/lallegro_il_penseroso_comus_and_lycidas_gut.txt",
    "shksprdata/ancillary/britannica-11th.txt",
]


def main(root, out):
    files = sorted(glob.glob(os.path.join(root, "shksprdata/texts/*_gut.txt")))
    files += [os.path.join(root, f) for f in EXTRA]
    parts = []
    for path in files:
        with open(path, encoding="utf-8", errors="replace") as fh:
            text = re.sub(r"[^A-Za-z']+", " ", fh.read()).replace("'", " ")
        parts.append(text.lower())
    with gzip.open(out, "wt", encoding="utf-8") as fh:
        fh.write("\n".join(parts))


if __name__ == "__main__":
    main(*sys.argv[1:3])
