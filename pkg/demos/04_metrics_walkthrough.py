"""String metrics: edit distance, normalized variants, and a full report.

NLD divides the Levenshtein distance by the ground-truth length, so 0
means correct and 1 means everything had to change; ANLD averages it over
an evaluated set.  Accuracy is exact string match; F1 is averaged over
year classes.
"""

from yearocr.corpus import YearLabel
from yearocr.metrics import NLDRecord, anld, evaluate, levenshtein, nld

pairs = [
    ("1890", "1890"),  # identical
    ("1895", "1985"),  # two substitutions
    ("1890", "189"),   # one deletion
    ("1890", ""),      # the recognizer gave up
    ("1900", "19000"), # one insertion, a typical CTC over-emission
]
print("truth   prediction  LD   NLD")
for truth, predicted in pairs:
    print(f"{truth:<7} {predicted!r:<11} {levenshtein(truth, predicted):<4} "
          f"{nld(truth, predicted):.2f}")

records = [NLDRecord.from_pair(t, p) for t, p in pairs]
print(f"\nANLD over the table: {anld(records):.3f} "
      f"({100 * anld(records):.1f} percent-scaled)")

# A small evaluation: two mistakes out of five, one of them a non-year.
truths = [YearLabel(t) for t in ("1895", "1895", "1905", "1910", "1920")]
predictions = ["1895", "1985", "1905", "190", "1920"]
report = evaluate(predictions, truths)
print(f"\n{report.summary_line()}  over T={report.T}")
print("F1 averaging variants:",
      {k: round(v, 3) for k, v in report.f1_scores.items()})
print("per class (label, support, correct):",
      [(c.label.text, c.support, c.correct) for c in report.per_class])
