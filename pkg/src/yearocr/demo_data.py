"""Fabricated stand-in data for demos and smoke tests.

The real year-string corpus must be downloaded separately, so this module
draws a look-alike: digit glyphs rendered from system fonts with rotation,
scale, and ink jitter, and whole 4-digit strings on parchment-toned
95x175 canvases.  The output trees use the same on-disk layout as the
real distribution, so every loader and pipeline stage runs unchanged.
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from .corpus import YEAR_MAX, YEAR_MIN, YearLabel

logger = logging.getLogger(__name__)

FONT_PATHS = [
    "/usr/share/fonts/truetype/dejavu/DejaVuSans.ttf",
    "/usr/share/fonts/truetype/dejavu/DejaVuSerif.ttf",
    "/usr/share/fonts/truetype/dejavu/DejaVuSans-Bold.ttf",
    "/usr/share/fonts/truetype/dejavu/DejaVuSerif-Bold.ttf",
]

PARCHMENT = np.array([233, 222, 197], dtype=np.float64)
INK = np.array([54, 48, 58], dtype=np.float64)


def _fonts(size: int) -> list[ImageFont.FreeTypeFont]:
    fonts = []
    for path in FONT_PATHS:
        try:
            fonts.append(ImageFont.truetype(path, size=size))
        except OSError:
            continue
    if not fonts:
        fonts.append(ImageFont.load_default())
    return fonts


def _render_digit(digit: int, rng: np.random.Generator) -> np.ndarray:
    """One digit on a tight parchment-toned crop, uint8 RGB."""
    size = int(rng.integers(34, 46))
    font = _fonts(size)[int(rng.integers(0, len(FONT_PATHS)))]
    pad = 10
    canvas = Image.new("RGB", (size + 2 * pad, size + 2 * pad), tuple(int(c) for c in PARCHMENT))
    draw = ImageDraw.Draw(canvas)
    ink = tuple(int(c) for c in np.clip(INK + rng.normal(0, 12, 3), 0, 255))
    draw.text((pad, pad // 2), str(digit), fill=ink, font=font)
    angle = float(rng.uniform(-8, 8))
    canvas = canvas.rotate(angle, resample=Image.BILINEAR,
                           fillcolor=tuple(int(c) for c in PARCHMENT))
    arr = np.asarray(canvas, dtype=np.uint8)
    gray = arr.mean(axis=2)
    rows = np.where(gray.min(axis=1) < 140)[0]
    cols = np.where(gray.min(axis=0) < 140)[0]
    if len(rows) and len(cols):
        m = 3
        arr = arr[
            max(rows[0] - m, 0) : rows[-1] + m + 1,
            max(cols[0] - m, 0) : cols[-1] + m + 1,
        ]
    noise = rng.normal(0, 4, arr.shape)
    return np.clip(arr.astype(np.float64) + noise, 0, 255).astype(np.uint8)


def _render_string(label: YearLabel, rng: np.random.Generator,
                   height: int = 95, width: int = 175) -> np.ndarray:
    """A whole 4-digit string drawn in one hand on a textured canvas."""
    bg = PARCHMENT + rng.normal(0, 6, 3)
    canvas = np.clip(
        bg + rng.normal(0, 5, (height, width, 3)), 0, 255
    ).astype(np.uint8)
    image = Image.fromarray(canvas)
    draw = ImageDraw.Draw(image)
    font = _fonts(int(rng.integers(52, 66)))[int(rng.integers(0, len(FONT_PATHS)))]
    ink = tuple(int(c) for c in np.clip(INK + rng.normal(0, 10, 3), 0, 255))
    x = int(rng.integers(6, 20))
    y = int(rng.integers(8, 26))
    for ch in label.text:
        draw.text((x, y + int(rng.integers(-3, 4))), ch, fill=ink, font=font)
        x += draw.textlength(ch, font=font) + int(rng.integers(-4, 4))
    image = image.rotate(
        float(rng.uniform(-3, 3)), resample=Image.BILINEAR,
        fillcolor=tuple(int(round(c)) for c in bg.clip(0, 255)),
    )
    return np.asarray(image, dtype=np.uint8)


def write_fake_glyph_bank(root, per_digit: int = 40, seed: int = 0) -> Path:
    """Write ``<root>/<digit>/*.png`` rendered glyphs; returns the root."""
    root = Path(root)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 10]))
    for digit in range(10):
        digit_dir = root / str(digit)
        digit_dir.mkdir(parents=True, exist_ok=True)
        for i in range(per_digit):
            Image.fromarray(_render_digit(digit, rng)).save(digit_dir / f"{i:04d}.png")
    logger.info("fake glyph bank at %s (%d per digit)", root, per_digit)
    return root


def write_fake_string_corpus(
    root,
    train_counts: dict[int, int],
    test_counts: dict[int, int],
    seed: int = 0,
) -> Path:
    """Write ``train/<year>/`` and ``test/<year>/`` rendered strings."""
    root = Path(root)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 11]))
    for split, counts in (("train", train_counts), ("test", test_counts)):
        for year, n in sorted(counts.items()):
            label = YearLabel.from_year(year)
            class_dir = root / split / label.text
            class_dir.mkdir(parents=True, exist_ok=True)
            for i in range(n):
                Image.fromarray(_render_string(label, rng)).save(
                    class_dir / f"{i:04d}.png"
                )
    return root


def write_fake_dataset(
    root,
    years: list[int] | None = None,
    train_per_class: int = 8,
    test_per_class: int = 4,
    glyphs_per_digit: int = 30,
    seed: int = 0,
) -> tuple[Path, Path]:
    """Small complete stand-in dataset: (strings_root, glyph_root)."""
    root = Path(root)
    years = years or list(range(YEAR_MIN, YEAR_MAX + 1))
    strings_root = write_fake_string_corpus(
        root / "strings",
        {y: train_per_class for y in years},
        {y: test_per_class for y in years},
        seed=seed,
    )
    glyph_root = write_fake_glyph_bank(
        root / "glyphs", per_digit=glyphs_per_digit, seed=seed
    )
    return strings_root, glyph_root
