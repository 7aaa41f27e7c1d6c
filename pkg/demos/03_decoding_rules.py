"""The two decoding rules, worked by hand.

The four-head recognizer fuses per-position digit distributions: each
position contributes its argmax and the string confidence is the product
of the four maxima.  The sequence recognizer emits per-frame distributions
over ten digits plus a blank; decoding collapses repeated adjacent symbols
and deletes blanks.
"""

import numpy as np

from yearocr.models import BLANK_INDEX, ctc_greedy_decode, fuse_positions


def peaked(digit, peak):
    row = np.full(10, (1.0 - peak) / 9.0)
    row[digit] = peak
    return row


# Fusion: maxima 0.9 * 0.8 * 0.7 * 0.6 = 0.3024
per_position = np.stack([
    peaked(1, 0.9), peaked(8, 0.8), peaked(9, 0.7), peaked(5, 0.6)
])
pred = fuse_positions(per_position)
print(f"fused text: {pred.text}   confidence: {pred.confidence:.4f}")

# Uniform rows. Ties break toward the lower digit and confidence is 0.1^4.
uniform = fuse_positions(np.full((4, 10), 0.1))
print(f"uniform rows -> text {uniform.text}, confidence {uniform.confidence:.0e}")


def frames_from_path(path):
    frames = np.zeros((len(path), 11))
    frames[np.arange(len(path)), path] = 1.0
    return frames


B = BLANK_INDEX  # rendered as '-'
examples = [
    ([1, 1, B, 8, B, 9, 9, B, 0], "repeats collapse, blanks vanish"),
    ([1, B, 9, B, 0, B, 0], "a blank keeps the repeated 0 of 1900 alive"),
    ([B, B, B, B], "all blanks decode to the empty string"),
    ([1, 9, 0, 5, 5], "without a separating blank the two 5s merge"),
]
print("\nCTC greedy decoding:")
for path, why in examples:
    rendered = "".join("-" if s == B else str(s) for s in path)
    print(f"  path {rendered:<12} -> {ctc_greedy_decode(frames_from_path(path))!r:<8} ({why})")
