import numpy as np
import pytest

from yearocr import corpus as corpus_mod
from yearocr import demo_data


@pytest.fixture(scope="session")
def glyph_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("glyphs")
    demo_data.write_fake_glyph_bank(root, per_digit=12, seed=5)
    return root


@pytest.fixture(scope="session")
def glyph_bank(glyph_root):
    return corpus_mod.load_glyph_bank(glyph_root)


@pytest.fixture(scope="session")
def corpus_root(tmp_path_factory):
    """Tiny three-class corpus: train and test splits on disk."""
    root = tmp_path_factory.mktemp("strings")
    demo_data.write_fake_string_corpus(
        root,
        train_counts={1895: 4, 1900: 3, 1905: 5},
        test_counts={1895: 2, 1900: 2, 1905: 1},
        seed=6,
    )
    return root


@pytest.fixture(scope="session")
def real_samples(corpus_root):
    return corpus_mod.load_string_corpus(corpus_root)


def make_glyph(digit: int, seed: int = 0, size=(40, 28)) -> corpus_mod.DigitGlyph:
    """Cheap structured glyph: dark digit-dependent blob on light ground."""
    rng = np.random.default_rng(seed * 10 + digit)
    image = np.full((*size, 3), 235, dtype=np.uint8)
    h, w = size
    image[5 + digit : h - 5, 6 : w - 6] = 80 + 10 * digit
    image = np.clip(
        image.astype(np.int16) + rng.integers(-6, 7, image.shape), 0, 255
    ).astype(np.uint8)
    return corpus_mod.DigitGlyph(image=image, label=digit, source_id=f"fake/{digit}/{seed}")
