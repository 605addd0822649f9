"""Corpus scanning, deterministic stratified splitting, image loading.

Corpus layout: one directory per family under the root, holding PNG/JPEG
files. The split rule per family with n images is

    train = floor(0.70 * n),  val = floor(0.15 * n),  test = the remainder

computed in integer arithmetic so no float rounding can disturb the
counts. Shuffling happens per family with a seeded generator, families
visited in sorted order, so (index, seed) fully determines the manifest.
"""

import csv
import logging
from dataclasses import dataclass, field

import numpy as np
from PIL import Image, UnidentifiedImageError

from . import backend as K
from .autodiff import get_default_dtype
from .errors import DataError, ImageDecodeError, ManifestError

log = logging.getLogger(__name__)

IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg"}
SPLIT_NAMES = ("train", "val", "test")
RATIOS = (0.70, 0.15, 0.15)


@dataclass(frozen=True)
class ImageRecord:
    path: str
    family: str


@dataclass(frozen=True)
class SplitRecord:
    path: str
    family: str
    split: str


@dataclass
class DatasetIndex:
    records: list
    families: list          # sorted unique family names, zero-count ones included
    counts: dict
    skipped: list = field(default_factory=list)

    @property
    def total(self) -> int:
        return len(self.records)


@dataclass
class SplitManifest:
    records: list
    seed: int
    ratios: tuple = RATIOS

    def paths(self, split: str):
        return [r.path for r in self.records if r.split == split]

    def counts_by_family(self) -> dict:
        out = {}
        for r in self.records:
            row = out.setdefault(r.family, {"train": 0, "val": 0, "test": 0})
            row[r.split] += 1
        return out

    def families(self):
        return sorted({r.family for r in self.records})


def scan_dataset(root) -> DatasetIndex:
    """Index every decodable image under root/<Family>/*.{png,jpg,jpeg}.

    Non-image and corrupt files are skipped with a logged warning and
    collected in index.skipped. Empty family directories stay in the
    family list with count 0.
    """
    from pathlib import Path

    root = Path(root)
    if not root.is_dir():
        raise DataError(f"dataset root {root} is not a directory")
    family_dirs = sorted(d for d in root.iterdir() if d.is_dir())
    if not family_dirs:
        raise DataError(f"dataset root {root} has no family subdirectories")
    records, skipped = [], []
    counts = {}
    for fam_dir in family_dirs:
        family = fam_dir.name
        counts[family] = 0
        for f in sorted(fam_dir.iterdir()):
            if not f.is_file():
                continue
            if f.suffix.lower() not in IMAGE_EXTENSIONS:
                log.warning("skipping non-image file %s", f)
                skipped.append(str(f))
                continue
            try:
                with Image.open(f) as img:
                    img.verify()
            except (UnidentifiedImageError, OSError, SyntaxError) as exc:
                log.warning("skipping undecodable image %s: %s", f, exc)
                skipped.append(str(f))
                continue
            records.append(ImageRecord(str(f), family))
            counts[family] += 1
    if not records:
        raise DataError(f"no decodable images found under {root}")
    return DatasetIndex(records, sorted(counts), counts, skipped)


def split_counts(n: int):
    """(train, val, test) sizes for one family of n images, integer-exact."""
    train = (7 * n) // 10
    val = (15 * n) // 100
    return train, val, n - train - val


def stratified_split(index: DatasetIndex, seed: int) -> SplitManifest:
    """Shuffle each family with a seeded RNG and assign by the floor rule.

    Families are processed in sorted-name order and records in sorted-path
    order before shuffling, so the result is independent of scan order.
    """
    rng = np.random.default_rng(seed)
    by_family = {}
    for r in index.records:
        by_family.setdefault(r.family, []).append(r.path)
    out = []
    for family in sorted(set(index.families) | set(by_family)):
        paths = sorted(by_family.get(family, []))
        n = len(paths)
        order = rng.permutation(n) if n else []
        n_train, n_val, _ = split_counts(n)
        for pos, j in enumerate(order):
            if pos < n_train:
                split = "train"
            elif pos < n_train + n_val:
                split = "val"
            else:
                split = "test"
            out.append(SplitRecord(paths[j], family, split))
    return SplitManifest(out, seed=seed)


def load_image(path, size: int, normalization: str = "unit") -> np.ndarray:
    """Decode an image to a 3 x size x size array with values in [0, 1].

    Bilinear resize with half-pixel-centered sampling, no aspect
    preservation. Grayscale sources are replicated to 3 channels; an
    already size x size image comes back as source / 255 exactly.
    """
    if normalization != "unit":
        raise DataError(f"unknown normalization mode {normalization!r}")
    try:
        with Image.open(path) as img:
            rgb = img.convert("RGB")
            arr = np.asarray(rgb, dtype=np.uint8)
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise ImageDecodeError(f"cannot decode image {path}: {exc}") from exc
    dtype = get_default_dtype()
    chw = np.ascontiguousarray(arr.transpose(2, 0, 1)).astype(dtype) / dtype.type(255)
    if chw.shape[1] == size and chw.shape[2] == size:
        return chw
    return K.resize_bilinear(chw, size, size)


def write_manifest(manifest: SplitManifest, path) -> None:
    """Persist a manifest as CSV with seed/ratios carried in comment lines."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        f.write(f"# seed={manifest.seed}\n")
        f.write("# ratios={:.2f},{:.2f},{:.2f}\n".format(*manifest.ratios))
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["path", "family", "split"])
        for r in manifest.records:
            writer.writerow([r.path, r.family, r.split])


def read_manifest(path) -> SplitManifest:
    """Read a manifest CSV written by write_manifest; exact round-trip."""
    seed = None
    ratios = RATIOS
    rows = []
    with open(path, newline="", encoding="utf-8") as f:
        lines = f.read().splitlines()
    body = []
    offsets = []
    for i, line in enumerate(lines, start=1):
        if line.startswith("#"):
            meta = line[1:].strip()
            if meta.startswith("seed="):
                seed = int(meta[5:])
            elif meta.startswith("ratios="):
                ratios = tuple(float(v) for v in meta[7:].split(","))
            continue
        body.append(line)
        offsets.append(i)
    if not body:
        raise ManifestError(f"{path}: missing header row")
    header = next(csv.reader([body[0]]))
    if header != ["path", "family", "split"]:
        raise ManifestError(f"{path}: line {offsets[0]}: bad header {header!r}")
    for line, lineno in zip(body[1:], offsets[1:]):
        if not line:
            continue
        fields = next(csv.reader([line]))
        if len(fields) != 3:
            raise ManifestError(f"{path}: line {lineno}: expected 3 fields, got {len(fields)}")
        p, fam, split = fields
        if split not in SPLIT_NAMES:
            raise ManifestError(f"{path}: line {lineno}: unknown split {split!r}")
        rows.append(SplitRecord(p, fam, split))
    if not rows:
        raise ManifestError(f"{path}: manifest has a header but no records")
    return SplitManifest(rows, seed=0 if seed is None else seed, ratios=ratios)
