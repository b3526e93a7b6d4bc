#!/usr/bin/env python3
# Copyright 2026 The medzs Authors
# SPDX-License-Identifier: Apache-2.0
"""Writes randomized tokenizer reference cases (mixed scripts, HTML
references, contractions, control whitespace) for the C++ tokenizer tests."""

import json
import os
import random
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
import make_fixture_bundle as bundle  # noqa: E402

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

ALPHABET = list("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 \t\n.,;:!?'\"-()[]{}<>&#/|") + [
    "é", "ü", "ß", "Ω", "λ", "中", "文", "²", "½", "٣", " ", " ", "　", "İ", "ﬁ", "😀", "\x1c", "ǅ"]
FRAGMENTS = ["&amp;", "&lt;", "&gt;", "&quot;", "&#39;", "&#x41;", "&nbsp;", "&eacute;", "&amp", "&copy", "&ampx",
             "&#128;", "&#0;", "&#xD800;", "&apos;", "&mdash;", "&bogus;", "&#;", "&", "&#1114112;", "&amp;amp;",
             "<|endoftext|>", "'s", "'LL"]


def main():
    path = os.path.join(ROOT, "assets", "tiny-clip", "bpe_merges.txt")
    lines = open(path, encoding="utf-8").read().splitlines()[1:]
    tok = bundle.SimpleTokenizer([tuple(l.split()) for l in lines if l])
    rng = random.Random(7)
    cases = []
    for _ in range(600):
        parts = [rng.choice(FRAGMENTS) if rng.random() < 0.15 else rng.choice(ALPHABET)
                 for _ in range(rng.randint(0, 30))]
        text = "".join(parts)
        cases.append({"text": text, "ids": tok.tokenize(text)})
    out = os.path.join(ROOT, "tests", "fixtures", "golden", "tokenizer_cases.json")
    with open(out, "w", encoding="utf-8") as f:
        json.dump(cases, f, ensure_ascii=False, separators=(",", ":"))
    print(f"wrote {len(cases)} cases to {out}")


if __name__ == "__main__":
    main()
