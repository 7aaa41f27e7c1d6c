"""Ingestion of year-string images and isolated digit glyphs.

The on-disk layout follows the public ARDIS distribution convention:
one directory per class, labels recovered from directory names.

    <root>/train/<year>/*.png      real training strings
    <root>/test/<year>/*.png       real test strings
    <root>/synthetic/<year>/*.png  synthetic training strings (optional)

Glyph banks use one directory per digit, ``<root>/0 .. <root>/9``.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np
from PIL import Image

from .errors import CorpusError

logger = logging.getLogger(__name__)

YEAR_MIN = 1890
YEAR_MAX = 1920
NUM_CLASSES = YEAR_MAX - YEAR_MIN + 1  # 31 year classes

REAL = "real"
SYNTHETIC = "synthetic"
TRAIN = "train"
TEST = "test"

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"}

MANIFEST_HEADER = "label,synthetic,real,test"

# Published per-class training protocol for the ARDIS year strings:
# (year, synthetic, real, test).  Synthetic samples top each class up
# to 1000 training images; synthetic data is never used for testing.
ARDIS_PROTOCOL = (
    (1890, 1000, 0, 15),
    (1891, 1000, 0, 15),
    (1892, 1000, 0, 15),
    (1893, 1000, 0, 15),
    (1894, 1000, 0, 15),
    (1895, 875, 125, 100),
    (1896, 846, 154, 100),
    (1897, 846, 154, 100),
    (1898, 825, 175, 100),
    (1899, 833, 167, 100),
    (1900, 794, 206, 100),
    (1901, 761, 239, 100),
    (1902, 765, 235, 100),
    (1903, 764, 236, 100),
    (1904, 781, 219, 100),
    (1905, 809, 191, 100),
    (1906, 830, 170, 100),
    (1907, 824, 176, 100),
    (1908, 844, 156, 100),
    (1909, 863, 137, 100),
    (1910, 862, 138, 100),
    (1911, 883, 117, 100),
    (1912, 896, 104, 100),
    (1913, 910, 90, 100),
    (1914, 909, 91, 100),
    (1915, 925, 75, 100),
    (1916, 955, 45, 100),
    (1917, 962, 38, 100),
    (1918, 983, 17, 100),
    (1919, 981, 19, 100),
    (1920, 1000, 0, 76),
)


@dataclass(frozen=True, order=True)
class YearLabel:
    """A 4-character year string in the supported range."""

    text: str

    def __post_init__(self):
        if len(self.text) != 4 or not self.text.isdigit():
            raise CorpusError(f"year label must be a 4-digit string, got {self.text!r}")
        year = int(self.text)
        if not YEAR_MIN <= year <= YEAR_MAX:
            raise CorpusError(
                f"year {year} outside supported range [{YEAR_MIN}, {YEAR_MAX}]"
            )

    @property
    def year(self) -> int:
        return int(self.text)

    @property
    def index(self) -> int:
        """Class id in [0, 30]: year minus the range start."""
        return self.year - YEAR_MIN

    @property
    def digits(self) -> tuple[int, int, int, int]:
        return tuple(int(c) for c in self.text)

    @classmethod
    def from_year(cls, year: int) -> "YearLabel":
        return cls(f"{year:04d}")

    @classmethod
    def from_index(cls, index: int) -> "YearLabel":
        return cls.from_year(YEAR_MIN + index)


def all_year_labels() -> list[YearLabel]:
    return [YearLabel.from_year(y) for y in range(YEAR_MIN, YEAR_MAX + 1)]


@dataclass
class DigitGlyph:
    """A cleaned isolated-digit image, raw material for synthesis."""

    image: np.ndarray  # H x W x 3 uint8, RGB
    label: int
    source_id: str = ""

    def __post_init__(self):
        if self.image.ndim != 3 or self.image.shape[2] != 3:
            raise CorpusError(f"glyph image must be HxWx3, got {self.image.shape}")
        if self.image.shape[0] == 0 or self.image.shape[1] == 0:
            raise CorpusError("glyph image has zero height or width")
        if not 0 <= self.label <= 9:
            raise CorpusError(f"glyph label must be in [0, 9], got {self.label}")


@dataclass
class StringSample:
    """A 4-digit string image with year label, origin and split tags."""

    image: np.ndarray  # H x W x 3 uint8, RGB
    label: YearLabel
    origin: str  # "real" | "synthetic"
    split: str  # "train" | "test"
    source_id: str = ""

    def __post_init__(self):
        if self.origin not in (REAL, SYNTHETIC):
            raise CorpusError(f"unknown origin {self.origin!r}")
        if self.split not in (TRAIN, TEST):
            raise CorpusError(f"unknown split {self.split!r}")
        if self.split == TEST and self.origin != REAL:
            # Synthetic data is used only for training.
            raise CorpusError("test samples must have origin 'real'")


@dataclass(frozen=True)
class ManifestRow:
    label: YearLabel
    synthetic: int
    real: int
    test: int


@dataclass
class CorpusManifest:
    """Per-class ledger of synthetic / real-train / test counts."""

    rows: list[ManifestRow]
    totals: tuple[int, int, int]

    @classmethod
    def from_rows(cls, rows: Iterable[ManifestRow]) -> "CorpusManifest":
        rows = sorted(rows, key=lambda r: r.label)
        totals = (
            sum(r.synthetic for r in rows),
            sum(r.real for r in rows),
            sum(r.test for r in rows),
        )
        manifest = cls(rows=list(rows), totals=totals)
        manifest.validate()
        return manifest

    def validate(self):
        if not self.rows:
            raise CorpusError("manifest has no rows")
        years = [r.label.year for r in self.rows]
        if years != sorted(set(years)):
            raise CorpusError("manifest rows must be unique and ascending by year")
        for r in self.rows:
            if min(r.synthetic, r.real, r.test) < 0:
                raise CorpusError(f"negative count in manifest row {r.label.text}")
        sums = (
            sum(r.synthetic for r in self.rows),
            sum(r.real for r in self.rows),
            sum(r.test for r in self.rows),
        )
        if sums != tuple(self.totals):
            raise CorpusError(
                f"manifest totals {self.totals} do not match column sums {sums}"
            )
        # Once synthetic top-up happened, every class must reach the same
        # per-class training total; a purely real ledger is exempt.
        if any(r.synthetic > 0 for r in self.rows):
            class_sums = {r.synthetic + r.real for r in self.rows}
            if len(class_sums) != 1:
                raise CorpusError(
                    "per-class training totals differ across classes: "
                    f"{sorted(class_sums)}"
                )

    @property
    def per_class_total(self) -> int:
        """Training samples per class (synthetic + real) after top-up."""
        return max(r.synthetic + r.real for r in self.rows)

    def row_for(self, label: YearLabel) -> ManifestRow:
        for r in self.rows:
            if r.label == label:
                return r
        raise CorpusError(f"class {label.text} not in manifest")

    def labels(self) -> list[YearLabel]:
        return [r.label for r in self.rows]

    def restricted_to(self, labels: Sequence[YearLabel]) -> "CorpusManifest":
        keep = set(labels)
        rows = [r for r in self.rows if r.label in keep]
        if not rows:
            raise CorpusError("restriction removed every manifest row")
        return CorpusManifest.from_rows(rows)


def ardis_protocol_manifest() -> CorpusManifest:
    """The canonical 31-class training protocol (totals 27526/3474/2651)."""
    rows = [
        ManifestRow(YearLabel.from_year(y), s, r, t) for y, s, r, t in ARDIS_PROTOCOL
    ]
    return CorpusManifest.from_rows(rows)


def real_only_manifest(manifest: CorpusManifest) -> CorpusManifest:
    """Copy of ``manifest`` with the synthetic column zeroed."""
    return CorpusManifest.from_rows(
        ManifestRow(r.label, 0, r.real, r.test) for r in manifest.rows
    )


def write_manifest(manifest: CorpusManifest, path) -> None:
    """Write a manifest as line-oriented text; refuses invalid manifests.

    Output is byte-stable for identical input so golden files diff cleanly.
    """
    manifest.validate()
    path = Path(path)
    lines = [MANIFEST_HEADER]
    for r in manifest.rows:
        lines.append(f"{r.label.text},{r.synthetic},{r.real},{r.test}")
    lines.append("TOTAL,{},{},{}".format(*manifest.totals))
    path.write_text("\n".join(lines) + "\n", encoding="ascii", newline="\n")


def read_manifest(path) -> CorpusManifest:
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"manifest file not found: {path}")
    lines = [ln.strip() for ln in path.read_text(encoding="ascii").splitlines() if ln.strip()]
    if not lines or lines[0] != MANIFEST_HEADER:
        raise CorpusError(f"manifest {path} missing header {MANIFEST_HEADER!r}")
    rows = []
    totals = None
    for ln in lines[1:]:
        fields = ln.split(",")
        if len(fields) != 4:
            raise CorpusError(f"malformed manifest line: {ln!r}")
        if fields[0] == "TOTAL":
            totals = tuple(int(x) for x in fields[1:])
            continue
        rows.append(
            ManifestRow(YearLabel(fields[0]), int(fields[1]), int(fields[2]), int(fields[3]))
        )
    manifest = CorpusManifest.from_rows(rows)
    if totals is not None and tuple(totals) != manifest.totals:
        raise CorpusError(
            f"manifest TOTAL row {totals} does not match column sums {manifest.totals}"
        )
    return manifest


def manifest_from_samples(samples: Iterable[StringSample]) -> CorpusManifest:
    """Derive the per-class ledger from loaded or generated samples."""
    counts: dict[YearLabel, list[int]] = {}
    for s in samples:
        row = counts.setdefault(s.label, [0, 0, 0])
        if s.origin == SYNTHETIC:
            row[0] += 1
        elif s.split == TRAIN:
            row[1] += 1
        else:
            row[2] += 1
    if not counts:
        raise CorpusError("no samples to summarize")
    return CorpusManifest.from_rows(
        ManifestRow(label, c[0], c[1], c[2]) for label, c in counts.items()
    )


# ---------------------------------------------------------------------------
# Loaders
# ---------------------------------------------------------------------------


def _read_rgb(path: Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def _image_files(directory: Path) -> list[Path]:
    return sorted(
        p for p in directory.iterdir()
        if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
    )


@dataclass
class GlyphBank:
    """All loaded digit glyphs plus the load report for skipped files."""

    glyphs: list[DigitGlyph]
    skipped: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.glyphs)

    def __iter__(self) -> Iterator[DigitGlyph]:
        return iter(self.glyphs)

    def __getitem__(self, i):
        return self.glyphs[i]

    def by_digit(self, digit: int) -> list[DigitGlyph]:
        return [g for g in self.glyphs if g.label == digit]

    def digit_counts(self) -> dict[int, int]:
        counts = {d: 0 for d in range(10)}
        for g in self.glyphs:
            counts[g.label] += 1
        return counts


def load_glyph_bank(root_path) -> GlyphBank:
    """Load isolated digit glyphs from ``<root>/<digit>/`` directories.

    Undecodable images are skipped with a warning and recorded in the
    bank's load report; a missing root or an empty bank is fatal.
    """
    root = Path(root_path)
    if not root.is_dir():
        raise CorpusError(f"glyph bank directory not found: {root}")
    glyphs: list[DigitGlyph] = []
    skipped: list[str] = []
    for digit in range(10):
        digit_dir = root / str(digit)
        if not digit_dir.is_dir():
            continue
        for f in _image_files(digit_dir):
            try:
                image = _read_rgb(f)
            except Exception as exc:
                logger.warning("skipping unreadable glyph %s: %s", f, exc)
                skipped.append(str(f))
                continue
            glyphs.append(DigitGlyph(image=image, label=digit, source_id=str(f)))
    if not glyphs:
        raise CorpusError(f"no glyphs found under {root}")
    bank = GlyphBank(glyphs=glyphs, skipped=skipped)
    empty = [d for d, n in bank.digit_counts().items() if n == 0]
    if empty:
        logger.warning("glyph bank %s has no samples for digits %s", root, empty)
    return bank


def _load_split(root: Path, subdir: str, origin: str, split: str) -> list[StringSample]:
    split_dir = root / subdir
    samples: list[StringSample] = []
    if not split_dir.is_dir():
        return samples
    for class_dir in sorted(p for p in split_dir.iterdir() if p.is_dir()):
        name = class_dir.name
        if not (name.isdigit() and len(name) == 4):
            logger.warning("ignoring non-class directory %s", class_dir)
            continue
        if not YEAR_MIN <= int(name) <= YEAR_MAX:
            logger.warning("skipping out-of-range class %s", class_dir)
            continue
        label = YearLabel(name)
        for f in _image_files(class_dir):
            try:
                image = _read_rgb(f)
            except Exception as exc:
                logger.warning("skipping unreadable image %s: %s", f, exc)
                continue
            samples.append(
                StringSample(
                    image=image, label=label, origin=origin, split=split,
                    source_id=str(f.relative_to(root)),
                )
            )
    return samples


def load_string_corpus(
    root_path, manifest: CorpusManifest | None = None, synthetic_root=None
) -> list[StringSample]:
    """Load string samples from a corpus root, optionally validating counts.

    Reads ``train/`` and ``test/`` (real data) plus ``synthetic/`` when
    present.  With a manifest, per-class counts for every column must match
    exactly; mismatches are fatal and reported as a per-class diff.
    Ordering is deterministic: sorted by source path within each split.
    """
    root = Path(root_path)
    if not root.is_dir():
        raise CorpusError(f"corpus directory not found: {root}")
    samples = _load_split(root, TRAIN, REAL, TRAIN)
    samples += _load_split(root, TEST, REAL, TEST)
    synth_root = Path(synthetic_root) if synthetic_root is not None else root
    if (synth_root / SYNTHETIC).is_dir():
        samples += _load_split(synth_root, SYNTHETIC, SYNTHETIC, TRAIN)
    if not samples:
        raise CorpusError(f"no string samples found under {root}")
    if manifest is not None:
        _validate_counts(samples, manifest)
    return samples


def _validate_counts(samples: Sequence[StringSample], manifest: CorpusManifest):
    actual: dict[YearLabel, list[int]] = {
        r.label: [0, 0, 0] for r in manifest.rows
    }
    extra: set[str] = set()
    for s in samples:
        if s.label not in actual:
            extra.add(s.label.text)
            continue
        row = actual[s.label]
        if s.origin == SYNTHETIC:
            row[0] += 1
        elif s.split == TRAIN:
            row[1] += 1
        else:
            row[2] += 1
    diffs = []
    for r in manifest.rows:
        got = actual[r.label]
        want = (r.synthetic, r.real, r.test)
        if tuple(got) != want:
            diffs.append(
                f"  {r.label.text}: expected synthetic/real/test {want}, found {tuple(got)}"
            )
    if extra:
        diffs.append(f"  classes on disk but not in manifest: {sorted(extra)}")
    if diffs:
        raise CorpusError(
            "corpus counts do not match manifest:\n" + "\n".join(diffs)
        )


def corpus_hash(samples: Iterable[StringSample]) -> str:
    """Order-independent content hash of a sample collection."""
    digests = []
    for s in samples:
        h = hashlib.sha256()
        h.update(s.label.text.encode())
        h.update(s.origin.encode())
        h.update(s.split.encode())
        h.update(np.ascontiguousarray(s.image).tobytes())
        digests.append(h.hexdigest())
    outer = hashlib.sha256()
    for d in sorted(digests):
        outer.update(d.encode())
    return outer.hexdigest()
