"""Command-line entry point orchestrating the full pipeline.

Subcommands: ``synthesize``, ``train``, ``evaluate``, ``compare``,
``report``.  Exit codes are stable for scripting: 0 success, 1 internal
error, 2 user/input error.  All randomness flows from a single ``--seed``
flag; configuration precedence is built-in defaults < config file < CLI
flags.  The dataset root may also come from ``YEAROCR_DATA_ROOT``.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import shutil
import sys
from pathlib import Path

from . import corpus as corpus_mod
from . import metrics as metrics_mod
from . import models as models_mod
from . import reporting
from . import synthesis as synthesis_mod
from . import training as training_mod
from .errors import UserError, YearOcrError

logger = logging.getLogger(__name__)

DATA_ROOT_ENV = "YEAROCR_DATA_ROOT"

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USER = 2


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.is_file():
        raise UserError(f"config file not found: {p}")
    try:
        config = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise UserError(f"config file {p} is not valid JSON: {exc}") from exc
    if not isinstance(config, dict):
        raise UserError(f"config file {p} must hold a JSON object")
    return config


def _data_root(args) -> Path:
    root = args.data or os.environ.get(DATA_ROOT_ENV)
    if not root:
        raise UserError(
            f"no dataset root given; pass --data or set {DATA_ROOT_ENV}"
        )
    return Path(root)


def _prepare_out(path: Path, force: bool, *sentinels: str) -> Path:
    """Create the output directory; refuse to overwrite without --force."""
    existing = [s for s in sentinels if (path / s).exists()]
    if existing and not force:
        raise UserError(
            f"output {path} already holds {existing}; pass --force to overwrite"
        )
    for s in existing:
        target = path / s
        if target.is_dir():
            shutil.rmtree(target)
        else:
            target.unlink()
    path.mkdir(parents=True, exist_ok=True)
    return path


def _build_synthesis_config(args, file_config: dict) -> synthesis_mod.SynthesisConfig:
    values = dict(file_config.get("synthesis", {}))
    for key in ("spacing_jitter", "vertical_jitter", "glyph_height_frac"):
        if key in values:
            values[key] = tuple(values[key])
    if args.per_class_target is not None:
        values["per_class_target"] = args.per_class_target
    if args.seed is not None:
        values["rng_seed"] = args.seed
    config = synthesis_mod.SynthesisConfig(**values)
    if args.zero_jitter:
        config = config.zero_jitter()
    return config


def _parse_classes(spec: str | None) -> list[corpus_mod.YearLabel] | None:
    if not spec:
        return None
    labels = []
    for part in spec.split(","):
        part = part.strip()
        if part:
            labels.append(corpus_mod.YearLabel(part))
    if not labels:
        raise UserError(f"no classes parsed from {spec!r}")
    return labels


def cmd_synthesize(args) -> int:
    root = _data_root(args)
    file_config = _load_config_file(args.config)
    config = _build_synthesis_config(args, file_config)

    bank = corpus_mod.load_glyph_bank(args.glyphs)
    real = corpus_mod.load_string_corpus(root)
    classes = _parse_classes(args.classes)
    if classes:
        real = [s for s in real if s.label in set(classes)]
        if not real:
            raise UserError(f"no real samples left after restricting to {args.classes}")

    derived = corpus_mod.manifest_from_samples(real)
    rows = []
    for r in derived.rows:
        synthetic = config.per_class_target - r.real
        if synthetic < 0:
            raise UserError(
                f"class {r.label.text} has {r.real} real training samples, "
                f"above the per-class target {config.per_class_target}"
            )
        rows.append(corpus_mod.ManifestRow(r.label, synthetic, r.real, r.test))
    target_manifest = corpus_mod.CorpusManifest.from_rows(rows)

    training_set = synthesis_mod.build_training_set(bank, real, target_manifest, config)

    out = _prepare_out(Path(args.out or root), args.force, "synthetic", "manifest.csv")
    written = synthesis_mod.write_synthetic_images(training_set, out)
    test_samples = [s for s in real if s.split == corpus_mod.TEST]
    emitted = corpus_mod.manifest_from_samples(training_set + test_samples)
    corpus_mod.write_manifest(emitted, out / "manifest.csv")

    print("label,synthetic,real,test")
    for r in emitted.rows:
        print(f"{r.label.text},{r.synthetic},{r.real},{r.test}")
    print("TOTAL,{},{},{}".format(*emitted.totals))
    print(f"wrote {written} synthetic images under {out / 'synthetic'}")
    print(f"corpus hash: {corpus_mod.corpus_hash(training_set)}")
    return EXIT_OK


def _build_train_config(args, file_config: dict) -> training_mod.TrainConfig:
    config = training_mod.default_config(args.arch)
    overrides = dict(file_config.get("training", {}))
    flag_map = {
        "batch_size": args.batch_size,
        "max_epochs": args.max_epochs,
        "patience": args.patience,
        "learning_rate": args.learning_rate,
        "validation_fraction": args.validation_fraction,
        "rng_seed": args.seed,
    }
    for key, value in flag_map.items():
        if value is not None:
            overrides[key] = value
    if overrides.get("patience", 1) is not None and overrides.get("patience") == 0:
        overrides["patience"] = None  # 0 disables early stopping
    known = {f.name for f in dataclasses.fields(training_mod.TrainConfig)}
    unknown = set(overrides) - known
    if unknown:
        raise UserError(f"unknown training config keys: {sorted(unknown)}")
    return dataclasses.replace(config, **overrides)


def cmd_train(args) -> int:
    if not args.arch:
        raise UserError("--arch is required for train")
    root = _data_root(args)
    file_config = _load_config_file(args.config)
    config = _build_train_config(args, file_config)

    manifest_path = root / "manifest.csv"
    manifest = corpus_mod.read_manifest(manifest_path) if manifest_path.is_file() else None
    samples = corpus_mod.load_string_corpus(root, manifest)
    train_split = [s for s in samples if s.split == corpus_mod.TRAIN]

    echo = dataclasses.asdict(config)
    print("training config: " + json.dumps(echo, sort_keys=True))

    bundle = models_mod.build(args.arch, seed=config.rng_seed, **(
        {"pretrained": True} if args.pretrained else {}
    ))

    def stream(log: training_mod.EpochLog) -> None:
        extras = "" if log.train_accuracy is None else f" train_acc={log.train_accuracy:.4f}"
        print(
            f"epoch {log.epoch:>3}  loss {log.train_loss:.4f}  "
            f"val_loss {log.val_loss:.4f}  val_acc {log.val_accuracy:.4f}{extras}",
            flush=True,
        )

    bundle, record = training_mod.train(bundle, train_split, config, log_fn=stream)

    out = _prepare_out(
        Path(args.out or f"bundle_{args.arch}"), args.force,
        models_mod.METADATA_FILE, models_mod.WEIGHTS_FILE, "epochs.log", "summary.json",
    )
    models_mod.save_bundle(bundle, out, force=True)
    record.save(out)
    print(f"best epoch {record.best_epoch} of {record.stopped_epoch}; bundle at {out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    if not args.bundle:
        raise UserError("--bundle is required for evaluate")
    root = _data_root(args)
    bundle = models_mod.load_bundle(args.bundle)
    samples = corpus_mod.load_string_corpus(root)
    test = [s for s in samples if s.split == corpus_mod.TEST]
    if not test:
        raise UserError(f"no test samples under {root}")

    predictions = models_mod.predict(bundle, test)
    report = metrics_mod.evaluate(predictions, [s.label for s in test])
    report.test_hash = corpus_mod.corpus_hash(test)
    report.model_name = args.name or bundle.arch_id

    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    report_path = out / f"report_{report.model_name}.json"
    if report_path.exists() and not args.force:
        raise UserError(f"{report_path} exists; pass --force to overwrite")
    metrics_mod.save_report(report, report_path)
    print(f"{report.model_name}: {report.summary_line()}  (T={report.T})")
    print(f"report written to {report_path}")
    return EXIT_OK


def cmd_compare(args) -> int:
    if len(args.reports) < 2:
        raise UserError("need at least two reports to compare")
    reports = {}
    for path in args.reports:
        r = metrics_mod.load_report(path)
        name = r.model_name or Path(path).stem
        reports[name] = r

    hashes = {r.test_hash for r in reports.values() if r.test_hash}
    banner = ""
    if len(hashes) > 1:
        banner = (
            "WARNING: reports were produced on different test sets; "
            "the comparison below is not apples-to-apples\n"
        )
    table = reporting.render_comparison_table(reports)
    output = banner + table
    print(output)

    out = Path(args.out or "comparison")
    out.mkdir(parents=True, exist_ok=True)
    (out / "comparison.txt").write_text(output + "\n")
    for name, r in reports.items():
        reporting.emit_report_assets(r, out / name)
    print(f"table and plots written under {out}")
    return EXIT_OK


def cmd_report(args) -> int:
    if len(args.reports) != 1:
        raise UserError("report takes exactly one report file")
    r = metrics_mod.load_report(args.reports[0])
    name = r.model_name or Path(args.reports[0]).stem
    print(f"{name}: {r.summary_line()}  (T={r.T})")
    print()
    print(reporting.render_per_class_listing(r))
    pairs = reporting.confusion_pairs(r)
    if pairs:
        print()
        print("most confused digit positions:")
        for desc, count in pairs:
            print(f"  {desc}  x{count}")
    out = Path(args.out or f"report_{name}")
    written = reporting.emit_report_assets(r, out)
    print()
    print("plots: " + ", ".join(str(p) for p in written))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="yearocr",
        description="Synthesize, train, and evaluate 4-digit year-string recognizers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, arch: bool = False):
        p.add_argument("--seed", type=int, default=None, help="master RNG seed")
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--force", action="store_true", help="overwrite existing outputs")
        if arch:
            p.add_argument(
                "--arch",
                choices=list(models_mod.ARCHITECTURES),
                default=None,
                help="recognizer architecture",
            )

    p = sub.add_parser("synthesize", help="compose synthetic training strings")
    common(p)
    p.add_argument("--data", default=None, help="corpus root (train/ and test/)")
    p.add_argument("--glyphs", required=True, help="digit glyph bank root")
    p.add_argument("--classes", default=None, help="comma-separated year subset")
    p.add_argument("--per-class-target", type=int, default=None)
    p.add_argument("--zero-jitter", action="store_true",
                   help="plain concatenation on a flat background")
    p.set_defaults(fn=cmd_synthesize)

    p = sub.add_parser("train", help="train one recognizer")
    common(p, arch=True)
    p.add_argument("--data", default=None, help="corpus root")
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--max-epochs", type=int, default=None)
    p.add_argument("--patience", type=int, default=None, help="0 disables early stopping")
    p.add_argument("--learning-rate", type=float, default=None)
    p.add_argument("--validation-fraction", type=float, default=None)
    p.add_argument("--pretrained", action="store_true",
                   help="initialize the trunk from pretrained weights")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("evaluate", help="score a trained bundle on the test split")
    common(p)
    p.add_argument("--data", default=None, help="corpus root")
    p.add_argument("--bundle", required=True, help="trained bundle directory")
    p.add_argument("--name", default=None, help="model name for the report")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("compare", help="tabulate two or more evaluation reports")
    common(p)
    p.add_argument("reports", nargs="*", help="report JSON files")
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("report", help="render one evaluation report")
    common(p)
    p.add_argument("reports", nargs="*", help="report JSON file")
    p.set_defaults(fn=cmd_report)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except UserError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER
    except YearOcrError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except KeyboardInterrupt:
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
