"""Segmentation-free recognition of handwritten 4-digit year strings.

The pipeline ingests year-string crops and isolated digit glyphs,
composes balanced synthetic training data, trains three recognizers
(a four-head position classifier, a GRU CRNN with CTC transcription,
and a single-head whole-string baseline), and scores them with string
accuracy, macro-F1, and normalized edit distance.
"""

from .corpus import (
    ARDIS_PROTOCOL,
    CorpusManifest,
    DigitGlyph,
    GlyphBank,
    ManifestRow,
    StringSample,
    YearLabel,
    ardis_protocol_manifest,
    corpus_hash,
    load_glyph_bank,
    load_string_corpus,
    manifest_from_samples,
    read_manifest,
    write_manifest,
)
from .errors import (
    BundleError,
    CorpusError,
    MetricsError,
    SynthesisError,
    TrainingError,
    UserError,
    YearOcrError,
)
from .metrics import EvalReport, NLDRecord, anld, evaluate, levenshtein, nld
from .models import (
    ModelBundle,
    PreprocessContract,
    StringPrediction,
    build_crnn,
    build_specific_task,
    build_vgg16_native,
    ctc_greedy_decode,
    fuse_positions,
    load_bundle,
    predict,
    save_bundle,
)
from .synthesis import SynthesisConfig, build_training_set, compose_string
from .training import (
    EarlyStopper,
    TrainConfig,
    TrainRunRecord,
    default_config,
    targets_for,
    train,
)

__version__ = "0.1.0"
