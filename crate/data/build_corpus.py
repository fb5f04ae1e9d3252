#!/usr/bin/env python3
"""Build the evaluation corpus and vocabulary from U.S. State of the Union addresses.

Source: the `@stdlib/datasets-sotu` npm package (addresses are works of the
U.S. Government and carry no copyright). Usage:

    npm pack @stdlib/datasets-sotu && tar xzf stdlib-datasets-sotu-*.tgz
    python3 data/build_corpus.py package/data data/

Each output line is one address: lowercase ASCII words separated by single
spaces. Bracketed stage notes such as "[Laughter]" are removed, apostrophes
are dropped ("don't" -> "dont") and every other non-letter is a separator.
"""
import pathlib
import re
import sys

FIRST_YEAR = 1934


def normalize(text: str) -> str:
    text = re.sub(r"\[[^\]]*\]", " ", text)
    text = text.lower().replace("’", "'").replace("'", "")
    return " ".join(re.sub(r"[^a-z]+", " ", text).split())


def main() -> None:
    src, out = pathlib.Path(sys.argv[1]), pathlib.Path(sys.argv[2])
    lines = []
    for path in sorted(src.glob("*.txt")):
        if int(path.name[:4]) < FIRST_YEAR:
            continue
        line = normalize(path.read_text(encoding="utf-8"))
        if line:
            lines.append(line)
    (out / "sotu.txt").write_text("\n".join(lines) + "\n", encoding="ascii")
    vocab = sorted({w for line in lines for w in line.split()})
    (out / "sotu.vocab").write_text("\n".join(vocab) + "\n", encoding="ascii")
    words = sum(len(line.split()) for line in lines)
    print(f"{len(lines)} addresses, {words} words, {len(vocab)} vocabulary entries")


if __name__ == "__main__":
    main()
