"""Synthetic 4-digit string composition from isolated digit glyphs.

Each synthetic string is built by sampling one glyph per digit position,
height-normalizing the glyphs, and pasting them left to right onto a
background toned like the glyphs' own borders.  Per-class counts top the
training set up to a fixed target so all classes are balanced.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

from .corpus import (
    SYNTHETIC,
    TRAIN,
    CorpusManifest,
    DigitGlyph,
    GlyphBank,
    StringSample,
    YearLabel,
)
from .errors import SynthesisError

logger = logging.getLogger(__name__)

NUM_POSITIONS = 4

# Bounded retries for placements that would overlap more than the
# configured jitter allows; after that the gap is clamped.
_MAX_PLACEMENT_RETRIES = 3


@dataclass(frozen=True)
class SynthesisConfig:
    canvas_height: int = 95
    canvas_width: int = 175
    per_class_target: int = 1000
    rng_seed: int = 0
    # Horizontal gap between adjacent glyphs; negative values imitate
    # near-touching digits.
    spacing_jitter: tuple[int, int] = (-3, 6)
    # Per-glyph vertical offset from the centered baseline.
    vertical_jitter: tuple[int, int] = (-5, 5)
    # Each glyph is scaled to this fraction range of canvas height.
    glyph_height_frac: tuple[float, float] = (0.70, 0.90)
    background_noise_sigma: float = 3.0
    # Plain white background, no noise: the zero-jitter ablation mode.
    flat_background: bool = False

    def __post_init__(self):
        if self.canvas_height <= 0 or self.canvas_width <= 0:
            raise SynthesisError("canvas dimensions must be positive")
        if self.per_class_target <= 0:
            raise SynthesisError("per_class_target must be positive")
        if self.spacing_jitter[0] > self.spacing_jitter[1]:
            raise SynthesisError("spacing_jitter range is inverted")
        if self.vertical_jitter[0] > self.vertical_jitter[1]:
            raise SynthesisError("vertical_jitter range is inverted")

    def zero_jitter(self) -> "SynthesisConfig":
        """Faithful plain-concatenation variant: no jitter, flat background."""
        return replace(
            self,
            spacing_jitter=(0, 0),
            vertical_jitter=(0, 0),
            glyph_height_frac=(0.85, 0.85),
            background_noise_sigma=0.0,
            flat_background=True,
        )


def class_rng(config: SynthesisConfig, label: YearLabel) -> np.random.Generator:
    """Independent per-class generator so parallel and serial runs agree."""
    return np.random.default_rng(
        np.random.SeedSequence([config.rng_seed, label.index])
    )


def _resize_bilinear(image: np.ndarray, height: int, width: int) -> np.ndarray:
    return np.asarray(
        Image.fromarray(image).resize((width, height), Image.BILINEAR),
        dtype=np.uint8,
    )


def _border_color(image: np.ndarray) -> np.ndarray:
    border = np.concatenate(
        [image[0, :], image[-1, :], image[:, 0], image[:, -1]], axis=0
    )
    return np.median(border, axis=0)


def _make_canvas(glyphs, config, rng) -> np.ndarray:
    h, w = config.canvas_height, config.canvas_width
    if config.flat_background:
        return np.full((h, w, 3), 255, dtype=np.uint8)
    color = np.mean([_border_color(g.image) for g in glyphs], axis=0)
    canvas = np.broadcast_to(color, (h, w, 3)).astype(np.float32)
    if config.background_noise_sigma > 0:
        canvas = canvas + rng.normal(0.0, config.background_noise_sigma, (h, w, 3))
    return np.clip(canvas, 0, 255).astype(np.uint8)


def compose_string(
    glyphs: Sequence[DigitGlyph],
    config: SynthesisConfig,
    rng_state: np.random.Generator,
) -> StringSample:
    """Compose exactly four glyphs into one synthetic string sample.

    The output label is the concatenation of the glyph labels, the image
    has exactly the configured canvas size, and identical inputs with an
    identically seeded generator produce a byte-identical image.
    """
    if len(glyphs) != NUM_POSITIONS:
        raise SynthesisError(f"expected {NUM_POSITIONS} glyphs, got {len(glyphs)}")
    rng = rng_state
    h, w = config.canvas_height, config.canvas_width

    lo, hi = config.glyph_height_frac
    fracs = rng.uniform(lo, hi, size=NUM_POSITIONS)
    gaps = rng.integers(
        config.spacing_jitter[0], config.spacing_jitter[1] + 1, size=NUM_POSITIONS - 1
    )
    offsets = rng.integers(
        config.vertical_jitter[0], config.vertical_jitter[1] + 1, size=NUM_POSITIONS
    )

    heights = [max(1, round(h * f)) for f in fracs]
    widths = []
    for g, th in zip(glyphs, heights):
        gh, gw = g.image.shape[:2]
        widths.append(max(1, round(gw * th / gh)))

    # Glyphs taller than the canvas are rescaled, never rejected; a row
    # wider than the canvas is shrunk uniformly to fit.
    total = sum(widths) + int(gaps.sum())
    if total > w:
        shrink = (w - int(gaps.sum())) / sum(widths)
        if shrink <= 0:
            shrink = w / (sum(widths) + NUM_POSITIONS - 1)
            gaps = np.zeros_like(gaps)
        heights = [max(1, int(th * shrink)) for th in heights]
        widths = [max(1, int(tw * shrink)) for tw in widths]
        total = sum(widths) + int(gaps.sum())
    heights = [min(th, h) for th in heights]

    canvas = _make_canvas(glyphs, config, rng)
    x = max(0, (w - total) // 2)
    min_gap = config.spacing_jitter[0]
    prev_end = None
    for i, (g, th, tw) in enumerate(zip(glyphs, heights, widths)):
        patch = _resize_bilinear(g.image, th, tw)
        if i > 0:
            x = prev_end + int(gaps[i - 1])
            for _ in range(_MAX_PLACEMENT_RETRIES):
                if x >= prev_end + min_gap:
                    break
                x = prev_end + int(
                    rng.integers(config.spacing_jitter[0], config.spacing_jitter[1] + 1)
                )
            x = max(x, prev_end + min_gap)
        y = (h - th) // 2 + int(offsets[i])
        y = min(max(y, 0), h - th)
        x = min(max(x, 0), w - tw)
        region = canvas[y : y + th, x : x + tw]
        # Darken-composite: handwriting ink is darker than the background,
        # so overlapping strokes merge like touching digits do.
        canvas[y : y + th, x : x + tw] = np.minimum(region, patch)
        prev_end = x + tw

    text = "".join(str(g.label) for g in glyphs)
    return StringSample(
        image=canvas,
        label=YearLabel(text),
        origin=SYNTHETIC,
        split=TRAIN,
        source_id=f"synthetic/{text}",
    )


def build_training_set(
    glyph_bank: GlyphBank,
    real_samples: Sequence[StringSample],
    manifest: CorpusManifest,
    config: SynthesisConfig,
) -> list[StringSample]:
    """Top every manifest class up to ``per_class_target`` training samples.

    Returns the combined training set: the real training samples passed in,
    plus freshly composed synthetic strings.  Per-class synthetic counts are
    ``target - real`` exactly; classes draw from independent sub-seeds so
    generation may be parallelized per class without changing the corpus.
    """
    manifest.validate()
    real_train = [s for s in real_samples if s.split == TRAIN and s.origin == "real"]
    real_by_class: dict[YearLabel, list[StringSample]] = {}
    for s in real_train:
        real_by_class.setdefault(s.label, []).append(s)

    pools = {d: glyph_bank.by_digit(d) for d in range(10)}
    needed_digits = sorted({d for r in manifest.rows for d in r.label.digits})
    missing = [d for d in needed_digits if not pools[d]]
    if missing:
        raise SynthesisError(f"glyph bank has no samples for digits {missing}")

    out: list[StringSample] = []
    for row in manifest.rows:
        label = row.label
        real_here = sorted(
            real_by_class.get(label, []), key=lambda s: s.source_id
        )
        if len(real_here) != row.real:
            raise SynthesisError(
                f"class {label.text}: manifest lists {row.real} real training "
                f"samples but {len(real_here)} were provided"
            )
        n_synthetic = config.per_class_target - row.real
        if n_synthetic < 0:
            raise SynthesisError(
                f"class {label.text}: real count {row.real} exceeds "
                f"per-class target {config.per_class_target}"
            )
        if row.synthetic and row.synthetic != n_synthetic:
            raise SynthesisError(
                f"class {label.text}: manifest plans {row.synthetic} synthetic "
                f"samples but target {config.per_class_target} implies {n_synthetic}"
            )
        out.extend(real_here)
        rng = class_rng(config, label)
        digits = label.digits
        for i in range(n_synthetic):
            picked = [pools[d][rng.integers(len(pools[d]))] for d in digits]
            sample = compose_string(picked, config, rng)
            sample.source_id = f"synthetic/{label.text}/{i:05d}.png"
            out.append(sample)
    return out


def write_synthetic_images(samples: Sequence[StringSample], out_root) -> int:
    """Write synthetic samples as ``synthetic/<year>/<counter>.png`` PNGs."""
    out_root = Path(out_root)
    counters: dict[YearLabel, int] = {}
    written = 0
    for s in samples:
        if s.origin != SYNTHETIC:
            continue
        i = counters.get(s.label, 0)
        counters[s.label] = i + 1
        class_dir = out_root / SYNTHETIC / s.label.text
        class_dir.mkdir(parents=True, exist_ok=True)
        Image.fromarray(s.image).save(class_dir / f"{i:05d}.png")
        written += 1
    return written
