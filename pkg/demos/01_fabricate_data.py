"""Fabricate a small stand-in dataset so every other demo can run offline.

The real corpus of scanned year strings must be downloaded separately
(see README).  This script draws a font-rendered look-alike with the same
on-disk layout: train/<year>/*.png, test/<year>/*.png for strings, and
<digit>/*.png for the glyph bank.
"""

from pathlib import Path

from yearocr.corpus import load_glyph_bank, load_string_corpus, manifest_from_samples
from yearocr.demo_data import write_fake_dataset

workspace = Path(__file__).parent / "_workspace"
strings_root, glyph_root = write_fake_dataset(
    workspace,
    years=[1895, 1900, 1905, 1910],
    train_per_class=30,
    test_per_class=10,
    glyphs_per_digit=40,
    seed=1,
)
print(f"strings under {strings_root}")
print(f"glyphs under  {glyph_root}")

bank = load_glyph_bank(glyph_root)
print(f"\nglyph bank: {len(bank)} glyphs, per digit: {bank.digit_counts()}")

samples = load_string_corpus(strings_root)
manifest = manifest_from_samples(samples)
print("\nper-class ledger of the fabricated corpus:")
print("label,synthetic,real,test")
for row in manifest.rows:
    print(f"{row.label.text},{row.synthetic},{row.real},{row.test}")
print("TOTAL,{},{},{}".format(*manifest.totals))
