import numpy as np
import pytest

from yearocr.corpus import (
    SYNTHETIC,
    TEST,
    TRAIN,
    CorpusManifest,
    ManifestRow,
    YearLabel,
    corpus_hash,
    manifest_from_samples,
)
from yearocr.errors import SynthesisError
from yearocr.synthesis import (
    SynthesisConfig,
    build_training_set,
    class_rng,
    compose_string,
    write_synthetic_images,
)

from conftest import make_glyph


def glyphs_for(text: str, seed: int = 0):
    return [make_glyph(int(c), seed=seed + i) for i, c in enumerate(text)]


class TestComposeString:
    def test_canvas_size_and_label(self):
        config = SynthesisConfig(rng_seed=1)
        sample = compose_string(glyphs_for("1895"), config, np.random.default_rng(1))
        assert sample.image.shape == (95, 175, 3)
        assert sample.image.dtype == np.uint8
        assert sample.label.text == "1895"
        assert sample.origin == SYNTHETIC
        assert sample.split == TRAIN

    def test_label_is_concatenation(self):
        config = SynthesisConfig(rng_seed=2)
        sample = compose_string(glyphs_for("1900"), config, np.random.default_rng(2))
        assert sample.label.text == "1900"

    def test_distinct_zero_glyphs_render_differently(self):
        config = SynthesisConfig(rng_seed=3).zero_jitter()
        base = [make_glyph(1, 0), make_glyph(9, 1)]
        zeros = [make_glyph(0, seed=100), make_glyph(0, seed=200)]
        a = compose_string(base + [zeros[0], zeros[0]], config, np.random.default_rng(3))
        b = compose_string(base + [zeros[0], zeros[1]], config, np.random.default_rng(3))
        assert a.label.text == b.label.text == "1900"
        assert not np.array_equal(a.image, b.image)

    def test_seed_determinism_byte_identical(self):
        config = SynthesisConfig(rng_seed=7)
        g = glyphs_for("1912")
        a = compose_string(g, config, np.random.default_rng(7))
        b = compose_string(g, config, np.random.default_rng(7))
        assert np.array_equal(a.image, b.image)

    def test_wrong_glyph_count_rejected(self):
        config = SynthesisConfig()
        with pytest.raises(SynthesisError):
            compose_string(glyphs_for("189"), config, np.random.default_rng(0))

    def test_oversized_glyph_rescaled_not_failed(self):
        config = SynthesisConfig(rng_seed=4)
        huge = [
            make_glyph(d, seed=9, size=(400, 300)) for d in (1, 8, 9, 5)
        ]
        sample = compose_string(huge, config, np.random.default_rng(4))
        assert sample.image.shape == (95, 175, 3)

    def test_zero_jitter_mode_is_deterministic_layout(self):
        config = SynthesisConfig(rng_seed=5).zero_jitter()
        g = glyphs_for("1895")
        a = compose_string(g, config, np.random.default_rng(5))
        assert a.image.shape == (95, 175, 3)
        # flat background stays white outside the glyph band
        assert a.image[0, 0].tolist() == [255, 255, 255]

    def test_glyphs_actually_drawn(self):
        config = SynthesisConfig(rng_seed=6)
        sample = compose_string(glyphs_for("1895"), config, np.random.default_rng(6))
        background = compose_string(glyphs_for("1895"), config, np.random.default_rng(6))
        assert sample.image.min() < 150  # ink is dark


def two_class_manifest(real_1895: int, real_1905: int, target: int) -> CorpusManifest:
    return CorpusManifest.from_rows([
        ManifestRow(YearLabel("1895"), target - real_1895, real_1895, 2),
        ManifestRow(YearLabel("1905"), target - real_1905, real_1905, 1),
    ])


class TestBuildTrainingSet:
    def test_topup_counts(self, glyph_bank, real_samples):
        real_train = [s for s in real_samples
                      if s.split == TRAIN and s.label.text in ("1895", "1905")]
        manifest = two_class_manifest(4, 5, 20)
        config = SynthesisConfig(per_class_target=20, rng_seed=0)
        out = build_training_set(glyph_bank, real_train, manifest, config)
        assert len(out) == 40
        emitted = manifest_from_samples(out)
        assert emitted.row_for(YearLabel("1895")).synthetic == 16
        assert emitted.row_for(YearLabel("1905")).synthetic == 15

    def test_no_synthetic_when_target_met(self, glyph_bank, real_samples):
        # target equals the real count: nothing to generate
        real_train = [s for s in real_samples
                      if s.split == TRAIN and s.label.text in ("1895", "1905")]
        real_1905 = [s for s in real_train if s.label.text == "1905"]
        manifest = CorpusManifest.from_rows([ManifestRow(YearLabel("1905"), 0, 5, 1)])
        out = build_training_set(glyph_bank, real_1905, manifest,
                                 SynthesisConfig(per_class_target=5, rng_seed=0))
        assert all(s.origin != SYNTHETIC for s in out)
        assert len(out) == 5

    def test_planned_synthetic_counts_must_match_target(self, glyph_bank, real_samples):
        real_train = [s for s in real_samples
                      if s.split == TRAIN and s.label.text == "1895"]
        manifest = CorpusManifest.from_rows([ManifestRow(YearLabel("1895"), 16, 4, 2)])
        config = SynthesisConfig(per_class_target=10, rng_seed=0)  # implies 6, not 16
        with pytest.raises(SynthesisError, match="implies 6"):
            build_training_set(glyph_bank, real_train, manifest, config)

    def test_missing_digit_fatal(self, real_samples):
        from yearocr.corpus import GlyphBank

        bank = GlyphBank(glyphs=[make_glyph(d) for d in (1, 8, 9)])  # no 5
        real_train = [s for s in real_samples
                      if s.split == TRAIN and s.label.text == "1895"]
        manifest = CorpusManifest.from_rows([ManifestRow(YearLabel("1895"), 6, 4, 2)])
        with pytest.raises(SynthesisError, match=r"\[0?5\]|digits \[5\]"):
            build_training_set(bank, real_train, manifest, SynthesisConfig(per_class_target=10))

    def test_real_count_mismatch_fatal(self, glyph_bank):
        manifest = CorpusManifest.from_rows([ManifestRow(YearLabel("1895"), 6, 4, 2)])
        with pytest.raises(SynthesisError, match="4 real"):
            build_training_set(glyph_bank, [], manifest, SynthesisConfig(per_class_target=10))

    def test_no_leakage_to_test(self, glyph_bank):
        manifest = CorpusManifest.from_rows([ManifestRow(YearLabel("1900"), 8, 0, 0)])
        out = build_training_set(glyph_bank, [], manifest, SynthesisConfig(per_class_target=8))
        assert all(s.split != TEST for s in out)

    def test_seed_determinism_corpus_hash(self, glyph_bank):
        manifest = CorpusManifest.from_rows([
            ManifestRow(YearLabel("1895"), 10, 0, 0),
            ManifestRow(YearLabel("1905"), 10, 0, 0),
        ])
        config = SynthesisConfig(per_class_target=10, rng_seed=42)
        a = build_training_set(glyph_bank, [], manifest, config)
        b = build_training_set(glyph_bank, [], manifest, config)
        assert corpus_hash(a) == corpus_hash(b)
        other = build_training_set(
            glyph_bank, [], manifest, SynthesisConfig(per_class_target=10, rng_seed=43)
        )
        assert corpus_hash(a) != corpus_hash(other)

    def test_per_class_subseed_makes_classes_independent(self, glyph_bank):
        config = SynthesisConfig(per_class_target=6, rng_seed=9)
        full = build_training_set(
            glyph_bank, [],
            CorpusManifest.from_rows([
                ManifestRow(YearLabel("1895"), 6, 0, 0),
                ManifestRow(YearLabel("1905"), 6, 0, 0),
            ]),
            config,
        )
        only_1905 = build_training_set(
            glyph_bank, [],
            CorpusManifest.from_rows([ManifestRow(YearLabel("1905"), 6, 0, 0)]),
            config,
        )
        full_1905 = [s for s in full if s.label.text == "1905"]
        assert len(full_1905) == len(only_1905) == 6
        for a, b in zip(full_1905, only_1905):
            assert np.array_equal(a.image, b.image)

    def test_class_rng_differs_between_classes(self):
        config = SynthesisConfig(rng_seed=1)
        a = class_rng(config, YearLabel("1895"))
        b = class_rng(config, YearLabel("1905"))
        assert a.integers(0, 2**31) != b.integers(0, 2**31)


class TestWriteImages:
    def test_layout_and_counts(self, glyph_bank, tmp_path):
        manifest = CorpusManifest.from_rows([ManifestRow(YearLabel("1895"), 3, 0, 0)])
        out = build_training_set(glyph_bank, [], manifest, SynthesisConfig(per_class_target=3))
        written = write_synthetic_images(out, tmp_path)
        assert written == 3
        files = sorted((tmp_path / "synthetic" / "1895").glob("*.png"))
        assert [f.name for f in files] == ["00000.png", "00001.png", "00002.png"]
