"""String-level evaluation: Levenshtein distance, NLD, ANLD, accuracy, F1.

All operations are pure functions.  NLD divides the edit distance by the
ground-truth length, so a zero value means a correct prediction; ANLD is
the mean NLD over an evaluated set.  Tables render percentages to one
decimal place, with ANLD scaled by 100 to match.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .corpus import YearLabel
from .errors import MetricsError

REPORT_SCHEMA_VERSION = 1


def levenshtein(a: str, b: str) -> int:
    """Minimum number of single-character inserts, deletes, substitutions."""
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i] + [0] * len(b)
        for j, cb in enumerate(b, start=1):
            cost = 0 if ca == cb else 1
            current[j] = min(
                previous[j] + 1,       # delete from a
                current[j - 1] + 1,    # insert into a
                previous[j - 1] + cost # substitute
            )
        previous = current
    return previous[-1]


def nld(ground_truth: str, prediction: str) -> float:
    """Levenshtein distance normalized by the ground-truth length."""
    if not ground_truth:
        raise MetricsError("NLD is undefined for an empty ground truth")
    return levenshtein(ground_truth, prediction) / len(ground_truth)


@dataclass(frozen=True)
class NLDRecord:
    ground_truth: str
    prediction: str
    ld: int
    nld: float

    @classmethod
    def from_pair(cls, ground_truth: str, prediction: str) -> "NLDRecord":
        d = levenshtein(ground_truth, prediction)
        if not ground_truth:
            raise MetricsError("NLD is undefined for an empty ground truth")
        return cls(ground_truth, prediction, d, d / len(ground_truth))


def anld(records: Sequence[NLDRecord]) -> float:
    """Arithmetic mean of the records' NLD values; lower is better."""
    if not records:
        raise MetricsError("ANLD is undefined for an empty record list")
    return sum(r.nld for r in records) / len(records)


@dataclass
class ClassTally:
    label: YearLabel
    support: int
    correct: int


@dataclass
class EvalReport:
    """Evaluation of one model on one split.

    ``accuracy``, ``macro_f1`` and ``anld`` are fractions in [0, 1];
    rendering multiplies by 100.  ``f1_scores`` also carries the micro and
    weighted averaging variants since published comparisons rarely state
    which one they used.
    """

    accuracy: float
    macro_f1: float
    anld: float
    per_class: list[ClassTally]
    records: list[NLDRecord]
    T: int
    f1_scores: dict[str, float] = field(default_factory=dict)
    test_hash: str = ""
    model_name: str = ""

    def summary_line(self) -> str:
        return (
            f"accuracy {100 * self.accuracy:.1f} / "
            f"F1 {100 * self.macro_f1:.1f} / "
            f"ANLD {100 * self.anld:.1f}"
        )


def _f1(tp: int, fp: int, fn: int) -> float:
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def evaluate(predictions: Sequence, ground_truth: Sequence[YearLabel]) -> EvalReport:
    """Score predictions against year labels.

    ``predictions`` may be decoded strings or objects with a ``text``
    attribute.  Accuracy is the exact-string-match fraction.  F1 is
    averaged over the year classes that occur in the truth or in the
    predictions; a prediction outside the class set counts as a false
    negative for its true class and as a positive for no class.
    """
    if len(predictions) != len(ground_truth):
        raise MetricsError(
            f"{len(predictions)} predictions vs {len(ground_truth)} labels"
        )
    if not ground_truth:
        raise MetricsError("cannot evaluate an empty set")

    texts = [getattr(p, "text", p) for p in predictions]
    truths = [t.text for t in ground_truth]

    records = [NLDRecord.from_pair(t, p) for t, p in zip(truths, texts)]
    correct = sum(1 for t, p in zip(truths, texts) if t == p)
    accuracy = correct / len(truths)

    valid_years = set()
    for p in texts:
        try:
            valid_years.add(YearLabel(p).text)
        except Exception:
            pass
    classes = sorted(set(truths) | valid_years)

    tp: dict[str, int] = {c: 0 for c in classes}
    fp: dict[str, int] = {c: 0 for c in classes}
    fn: dict[str, int] = {c: 0 for c in classes}
    support: dict[str, int] = {c: 0 for c in classes}
    hits: dict[str, int] = {c: 0 for c in classes}
    for t, p in zip(truths, texts):
        support[t] += 1
        if p == t:
            tp[t] += 1
            hits[t] += 1
        else:
            fn[t] += 1
            if p in fp:
                fp[p] += 1

    per_class_f1 = {c: _f1(tp[c], fp[c], fn[c]) for c in classes}
    macro = sum(per_class_f1.values()) / len(classes)
    total_tp = sum(tp.values())
    micro = _f1(total_tp, sum(fp.values()), sum(fn.values()))
    weighted = (
        sum(per_class_f1[c] * support[c] for c in classes) / len(truths)
    )

    per_class = [
        ClassTally(YearLabel(c), support[c], hits[c])
        for c in classes
        if support[c] > 0
    ]
    return EvalReport(
        accuracy=accuracy,
        macro_f1=macro,
        anld=anld(records),
        per_class=per_class,
        records=records,
        T=len(truths),
        f1_scores={"macro": macro, "micro": micro, "weighted": weighted},
    )


# ---------------------------------------------------------------------------
# Report serialization
# ---------------------------------------------------------------------------


def save_report(report: EvalReport, path) -> None:
    payload = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "model_name": report.model_name,
        "accuracy": report.accuracy,
        "macro_f1": report.macro_f1,
        "anld": report.anld,
        "T": report.T,
        "f1_scores": report.f1_scores,
        "test_hash": report.test_hash,
        "per_class": [
            {"label": c.label.text, "support": c.support, "correct": c.correct}
            for c in report.per_class
        ],
        "records": [
            {"truth": r.ground_truth, "prediction": r.prediction, "ld": r.ld, "nld": r.nld}
            for r in report.records
        ],
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_report(path) -> EvalReport:
    path = Path(path)
    if not path.is_file():
        raise MetricsError(f"report file not found: {path}")
    payload = json.loads(path.read_text())
    version = payload.get("schema_version")
    if version != REPORT_SCHEMA_VERSION:
        raise MetricsError(
            f"report schema {version} unsupported (expected {REPORT_SCHEMA_VERSION})"
        )
    return EvalReport(
        accuracy=payload["accuracy"],
        macro_f1=payload["macro_f1"],
        anld=payload["anld"],
        per_class=[
            ClassTally(YearLabel(c["label"]), c["support"], c["correct"])
            for c in payload["per_class"]
        ],
        records=[
            NLDRecord(r["truth"], r["prediction"], r["ld"], r["nld"])
            for r in payload["records"]
        ],
        T=payload["T"],
        f1_scores=payload.get("f1_scores", {}),
        test_hash=payload.get("test_hash", ""),
        model_name=payload.get("model_name", ""),
    )
