#!/usr/bin/env python3
# Copyright 2026 The medzs Authors
# SPDX-License-Identifier: Apache-2.0
"""Write a medzs JSON manifest for a downloaded public dataset.

Layouts understood:
  montgomery  MontgomerySet/CXR_png/*_0.png (normal), *_1.png (tuberculosis)
  shenzhen    ChinaSet_AllFiles/CXR_png/*_0.png, *_1.png
  pneumonia   chest_xray/<split>/NORMAL/*.jpeg, chest_xray/<split>/PNEUMONIA/*.jpeg
  idrid       grading CSV ("Image name", "Retinopathy grade") plus an image folder

Image paths are stored relative to the manifest's image_root.
"""

import argparse
import csv
import json
import os
import sys
from pathlib import Path

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg"}


def find_dir(root: Path, *candidates: str) -> Path:
    for c in candidates:
        p = root / c
        if p.is_dir():
            return p
    return root


def suffix_labeled(root: Path, inner: tuple, dataset: str):
    image_dir = find_dir(root, *inner)
    entries = []
    for p in sorted(image_dir.iterdir()):
        if p.suffix.lower() not in IMAGE_SUFFIXES:
            continue
        if p.stem.endswith("_0"):
            entries.append({"path": p.name, "label": "normal"})
        elif p.stem.endswith("_1"):
            entries.append({"path": p.name, "label": "tuberculosis"})
    return dataset, ["normal", "tuberculosis"], image_dir, entries


def pneumonia(root: Path, split: str):
    base = find_dir(root, "chest_xray")
    image_dir = base / split
    entries = []
    for folder, label in (("NORMAL", "normal"), ("PNEUMONIA", "pneumonia")):
        d = image_dir / folder
        if not d.is_dir():
            sys.exit(f"missing folder {d}")
        for p in sorted(d.iterdir()):
            if p.suffix.lower() in IMAGE_SUFFIXES:
                entries.append({"path": f"{folder}/{p.name}", "label": label})
    return "pneumonia", ["normal", "pneumonia"], image_dir, entries


def idrid(labels_csv: Path, image_dir: Path):
    entries = []
    with open(labels_csv, newline="", encoding="utf-8-sig") as f:
        for row in csv.DictReader(f):
            name = (row.get("Image name") or "").strip()
            grade = (row.get("Retinopathy grade") or "").strip()
            if not name or not grade:
                continue
            candidates = [image_dir / (name + s) for s in (".jpg", ".JPG", ".png")]
            found = next((c for c in candidates if c.exists()), None)
            if found is None:
                sys.exit(f"no image for {name} in {image_dir}")
            entries.append({"path": found.name, "label": f"grade{int(grade)}"})
    return "idrid", [f"grade{i}" for i in range(5)], image_dir, entries


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("dataset", choices=["montgomery", "shenzhen", "pneumonia", "idrid"])
    ap.add_argument("root", type=Path, help="dataset root (or image folder for idrid)")
    ap.add_argument("-o", "--out", type=Path, required=True, help="manifest JSON to write")
    ap.add_argument("--split", default="train", help="pneumonia split (train, test, val)")
    ap.add_argument("--labels", type=Path, help="idrid grading CSV")
    args = ap.parse_args()

    root = args.root.resolve()
    if args.dataset == "montgomery":
        dataset, classes, image_dir, entries = suffix_labeled(root, ("MontgomerySet/CXR_png", "CXR_png"), "montgomery")
    elif args.dataset == "shenzhen":
        dataset, classes, image_dir, entries = suffix_labeled(root, ("ChinaSet_AllFiles/CXR_png", "CXR_png"), "shenzhen")
    elif args.dataset == "pneumonia":
        dataset, classes, image_dir, entries = pneumonia(root, args.split)
    else:
        if args.labels is None:
            ap.error("idrid needs --labels <grading csv>")
        dataset, classes, image_dir, entries = idrid(args.labels.resolve(), root)

    if not entries:
        sys.exit(f"no labeled images found under {image_dir}")
    out = args.out.resolve()
    out.parent.mkdir(parents=True, exist_ok=True)
    manifest = {
        "dataset_id": dataset,
        "classes": classes,
        "image_root": os.path.relpath(image_dir, out.parent),
        "entries": entries,
    }
    out.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    counts = {c: sum(e["label"] == c for e in entries) for c in classes}
    print(f"{out}: {len(entries)} images {counts}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
