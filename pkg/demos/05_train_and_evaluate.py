"""End-to-end loop at toy scale: synthesize, train, evaluate, compare.

Trains the sequence recognizer for two epochs on a two-class corpus, so
it finishes in a few minutes on a laptop CPU.  Accuracy will be poor at
this scale; the point is the moving parts, not the score.  The published
defaults (train up to 100 epochs with early stopping, patience 10) kick
in when you drop the overrides.  Run 01_fabricate_data.py first.
"""

from pathlib import Path

import dataclasses

from yearocr.corpus import (
    CorpusManifest,
    ManifestRow,
    load_glyph_bank,
    load_string_corpus,
    manifest_from_samples,
)
from yearocr.metrics import evaluate
from yearocr.models import build_crnn, load_bundle, predict, save_bundle
from yearocr.reporting import render_comparison_table
from yearocr.synthesis import SynthesisConfig, build_training_set
from yearocr.training import default_config, train

workspace = Path(__file__).parent / "_workspace"
bank = load_glyph_bank(workspace / "glyphs")
real = load_string_corpus(workspace / "strings")
wanted = {"1895", "1905"}
real = [s for s in real if s.label.text in wanted]
real_train = [s for s in real if s.split == "train"]
test = [s for s in real if s.split == "test"]

# Top both classes up to 60 training samples.
derived = manifest_from_samples(real)
manifest = CorpusManifest.from_rows(
    [ManifestRow(r.label, 60 - r.real, r.real, r.test) for r in derived.rows]
)
corpus = build_training_set(
    bank, real_train, manifest, SynthesisConfig(per_class_target=60, rng_seed=2)
)
print(f"training corpus: {len(corpus)} samples "
      f"({sum(s.origin == 'synthetic' for s in corpus)} synthetic)")

config = dataclasses.replace(default_config("crnn"),
                             batch_size=16, max_epochs=2, rng_seed=2)
bundle = build_crnn(seed=2)
bundle, record = train(
    bundle, corpus, config,
    log_fn=lambda e: print(
        f"epoch {e.epoch}: loss {e.train_loss:.3f} "
        f"val_loss {e.val_loss:.3f} val_acc {e.val_accuracy:.2f}"
    ),
)
print(f"stopped at epoch {record.stopped_epoch}, best epoch {record.best_epoch}")

bundle_dir = workspace / "bundle_crnn_demo"
save_bundle(bundle, bundle_dir, force=True)
reloaded = load_bundle(bundle_dir)
print(f"bundle round-trips from {bundle_dir}")

predictions = predict(reloaded, test)
report = evaluate(predictions, [s.label for s in test])
report.model_name = "crnn 2-epoch demo"
print(f"\n{report.summary_line()}  over T={report.T}")
print("a few predictions:", [(p.text, round(p.confidence, 3)) for p in predictions[:5]])

print()
print(render_comparison_table({"crnn 2-epoch demo": report,
                               "crnn 2-epoch demo (again)": report}))
print("\nthe CLI drives the same loop: yearocr synthesize / train / evaluate / compare")
