"""The three year-string recognizers and their decoding rules.

* ``specific_task`` — a VGG-16 convolutional trunk (batch-normalized)
  shared by four parallel 10-way dense heads, one per digit position.
  The decoded string takes each head's argmax; the confidence is the
  product of the four per-position maxima.
* ``crnn`` — a 5-block convolutional stack that keeps 44 horizontal
  frames, two bidirectional GRU stages (first merged by element-wise
  addition, second concatenated), and a per-frame 11-way softmax over
  ten digits plus the CTC blank ``'-'``.  Decoding collapses repeated
  adjacent symbols and deletes blanks.
* ``vgg16_native`` — the unmodified single-classifier baseline: the same
  VGG-16 trunk with one 31-way head over the year classes.

Inference is read-only over a loaded bundle; concurrent ``predict`` calls
on one bundle are safe.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
import torch.nn as nn
from PIL import Image
from torchvision.models import vgg16, vgg16_bn

from .corpus import StringSample, YearLabel, all_year_labels
from .errors import BundleError

logger = logging.getLogger(__name__)

ARCH_SPECIFIC_TASK = "specific_task"
ARCH_CRNN = "crnn"
ARCH_VGG16_NATIVE = "vgg16_native"
ARCHITECTURES = (ARCH_SPECIFIC_TASK, ARCH_CRNN, ARCH_VGG16_NATIVE)

NUM_POSITIONS = 4
NUM_DIGITS = 10
BLANK_INDEX = 10
BLANK_CHAR = "-"
FRAME_CLASSES = NUM_DIGITS + 1  # ten digits + blank
NUM_YEAR_CLASSES = 31
CRNN_FRAMES = 44  # 176-wide input, width halved twice by the conv stack

PROB_SUM_TOL = 1e-6

BUNDLE_SCHEMA_VERSION = 1
METADATA_FILE = "metadata.json"
WEIGHTS_FILE = "weights.pt"

# Trunk feature map for a 96x176 input after five halving pool stages.
_TRUNK_CHANNELS = 512
_TRUNK_H, _TRUNK_W = 3, 5
_TRUNK_FLAT = _TRUNK_CHANNELS * _TRUNK_H * _TRUNK_W


@dataclass(frozen=True)
class PreprocessContract:
    """Fixed input contract every model consumes images through.

    Images are resized to ``target`` size if needed, reflect-padded by one
    row and one column so the five pooling stages divide cleanly, scaled
    to [0, 1], then standardized per channel.
    """

    target_height: int = 95
    target_width: int = 175
    pad_height: int = 96
    pad_width: int = 176
    channel_mean: tuple[float, float, float] = (0.0, 0.0, 0.0)
    channel_std: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def apply(self, image: np.ndarray) -> torch.Tensor:
        """Map one HxWx3 uint8 RGB image to a standardized CHW tensor."""
        if image.ndim != 3 or image.shape[2] != 3:
            raise ValueError(f"expected HxWx3 RGB image, got shape {image.shape}")
        if image.shape[:2] != (self.target_height, self.target_width):
            image = np.asarray(
                Image.fromarray(np.asarray(image, dtype=np.uint8)).resize(
                    (self.target_width, self.target_height), Image.BILINEAR
                )
            )
        x = image.astype(np.float32) / 255.0
        pad_h = self.pad_height - self.target_height
        pad_w = self.pad_width - self.target_width
        x = np.pad(x, ((0, pad_h), (0, pad_w), (0, 0)), mode="reflect")
        mean = np.asarray(self.channel_mean, dtype=np.float32)
        std = np.asarray(self.channel_std, dtype=np.float32)
        x = (x - mean) / std
        return torch.from_numpy(np.ascontiguousarray(x.transpose(2, 0, 1)))

    def apply_batch(self, images: Sequence[np.ndarray]) -> torch.Tensor:
        return torch.stack([self.apply(im) for im in images])

    def to_dict(self) -> dict:
        return {
            "target_height": self.target_height,
            "target_width": self.target_width,
            "pad_height": self.pad_height,
            "pad_width": self.pad_width,
            "channel_mean": list(self.channel_mean),
            "channel_std": list(self.channel_std),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PreprocessContract":
        return cls(
            target_height=d["target_height"],
            target_width=d["target_width"],
            pad_height=d["pad_height"],
            pad_width=d["pad_width"],
            channel_mean=tuple(d["channel_mean"]),
            channel_std=tuple(d["channel_std"]),
        )


@dataclass
class StringPrediction:
    """One decoded string with its per-architecture evidence."""

    text: str
    confidence: float
    per_position: np.ndarray | None = None  # 4 x 10, specific-task only
    frame_probs: np.ndarray | None = None  # T x 11, CRNN only
    error: str | None = None


# ---------------------------------------------------------------------------
# Networks
# ---------------------------------------------------------------------------


class SpecificTaskNet(nn.Module):
    """VGG-16 (BN) trunk, shared 512-unit bottleneck, four 10-way heads."""

    def __init__(self, dropout: float = 0.25):
        super().__init__()
        self.trunk = vgg16_bn(weights=None).features
        self.neck = nn.Sequential(
            nn.Flatten(),
            nn.Linear(_TRUNK_FLAT, 512),
            nn.ReLU(inplace=True),
            nn.Dropout(dropout),
        )
        self.heads = nn.ModuleList(
            nn.Linear(512, NUM_DIGITS) for _ in range(NUM_POSITIONS)
        )

    def forward(self, x):
        """Logits of shape (B, 4, 10)."""
        z = self.neck(self.trunk(x))
        return torch.stack([head(z) for head in self.heads], dim=1)


class CrnnNet(nn.Module):
    """Conv stack to 44 frames, two bidirectional GRU stages, 11-way head.

    Pooling halves the height five times but the width only twice, so the
    96x176 input becomes a 44-long sequence of feature columns.  The first
    GRU pair's directions are merged by element-wise addition; the second
    pair's outputs are concatenated.
    """

    def __init__(self, dropout: float = 0.25, gru_units: int = 128):
        super().__init__()

        def block(cin, cout, pool):
            return [
                nn.Conv2d(cin, cout, 3, padding=1),
                nn.ReLU(inplace=True),
                nn.MaxPool2d(pool),
            ]

        self.conv = nn.Sequential(
            *block(3, 64, (2, 2)),
            *block(64, 128, (2, 2)),
            *block(128, 256, (2, 1)),
            *block(256, 256, (2, 1)),
            *block(256, 512, (2, 1)),
        )
        self.dropout = nn.Dropout(dropout)
        feat = _TRUNK_CHANNELS * _TRUNK_H  # height folded into the descriptor
        self.gru1 = nn.GRU(feat, gru_units, bidirectional=True, batch_first=True)
        self.gru2 = nn.GRU(gru_units, gru_units, bidirectional=True, batch_first=True)
        self.head = nn.Linear(2 * gru_units, FRAME_CLASSES)
        self.gru_units = gru_units

    def forward(self, x):
        """Logits of shape (B, T, 11) with T = 44 for the standard input."""
        z = self.conv(x)  # (B, 512, 3, 44)
        b, c, h, w = z.shape
        z = z.permute(0, 3, 1, 2).reshape(b, w, c * h)
        z = self.dropout(z)
        z, _ = self.gru1(z)
        z = z[:, :, : self.gru_units] + z[:, :, self.gru_units :]
        z = self.dropout(z)
        z, _ = self.gru2(z)
        return self.head(z)


class NativeVggNet(nn.Module):
    """Unmodified single-classifier baseline: one 31-way dense stack."""

    def __init__(self, num_classes: int = NUM_YEAR_CLASSES):
        super().__init__()
        self.trunk = vgg16(weights=None).features
        self.classifier = nn.Sequential(
            nn.Flatten(),
            nn.Linear(_TRUNK_FLAT, 4096),
            nn.ReLU(inplace=True),
            nn.Linear(4096, 4096),
            nn.ReLU(inplace=True),
            nn.Linear(4096, num_classes),
        )

    def forward(self, x):
        """Logits of shape (B, 31)."""
        return self.classifier(self.trunk(x))


# ---------------------------------------------------------------------------
# Bundles
# ---------------------------------------------------------------------------


@dataclass
class ModelBundle:
    """A recognizer: architecture id, weights, input contract, label map."""

    arch_id: str
    network: nn.Module
    preprocess: PreprocessContract
    label_map: list[str]
    train_config_hash: str = ""
    extra: dict = field(default_factory=dict)


def _digit_label_map() -> list[str]:
    return [str(d) for d in range(10)]


def _load_pretrained_trunk(net: nn.Module, batch_norm: bool) -> None:
    from torchvision.models import VGG16_BN_Weights, VGG16_Weights

    try:
        if batch_norm:
            source = vgg16_bn(weights=VGG16_BN_Weights.IMAGENET1K_V1)
        else:
            source = vgg16(weights=VGG16_Weights.IMAGENET1K_V1)
    except Exception as exc:
        raise BundleError(
            "could not fetch pretrained trunk weights (offline?); "
            "rerun with pretrained=False to train from scratch"
        ) from exc
    net.trunk.load_state_dict(source.features.state_dict())


def build_specific_task(
    seed: int | None = None, pretrained: bool = False, dropout: float = 0.25
) -> ModelBundle:
    """Four-head recognizer over a shared batch-normalized VGG-16 trunk."""
    if seed is not None:
        torch.manual_seed(seed)
    net = SpecificTaskNet(dropout=dropout)
    if pretrained:
        _load_pretrained_trunk(net, batch_norm=True)
    return ModelBundle(
        arch_id=ARCH_SPECIFIC_TASK,
        network=net,
        preprocess=PreprocessContract(),
        label_map=_digit_label_map(),
    )


def build_crnn(seed: int | None = None, dropout: float = 0.25) -> ModelBundle:
    """Sequence recognizer emitting 44 frames of digit-plus-blank scores."""
    if seed is not None:
        torch.manual_seed(seed)
    net = CrnnNet(dropout=dropout)
    return ModelBundle(
        arch_id=ARCH_CRNN,
        network=net,
        preprocess=PreprocessContract(),
        label_map=_digit_label_map() + [BLANK_CHAR],
    )


def build_vgg16_native(seed: int | None = None, pretrained: bool = False) -> ModelBundle:
    """Whole-string 31-way baseline without the multi-head modification."""
    if seed is not None:
        torch.manual_seed(seed)
    net = NativeVggNet()
    if pretrained:
        _load_pretrained_trunk(net, batch_norm=False)
    return ModelBundle(
        arch_id=ARCH_VGG16_NATIVE,
        network=net,
        preprocess=PreprocessContract(),
        label_map=[l.text for l in all_year_labels()],
    )


_BUILDERS = {
    ARCH_SPECIFIC_TASK: build_specific_task,
    ARCH_CRNN: build_crnn,
    ARCH_VGG16_NATIVE: build_vgg16_native,
}


def build(arch_id: str, **kwargs) -> ModelBundle:
    if arch_id not in _BUILDERS:
        raise BundleError(f"unknown architecture {arch_id!r}; choose from {ARCHITECTURES}")
    return _BUILDERS[arch_id](**kwargs)


# ---------------------------------------------------------------------------
# Decoding rules
# ---------------------------------------------------------------------------


def _check_rows_normalized(probs: np.ndarray, what: str) -> None:
    sums = probs.sum(axis=-1)
    if not np.allclose(sums, 1.0, atol=PROB_SUM_TOL):
        worst = float(np.max(np.abs(sums - 1.0)))
        raise ValueError(f"{what} not normalized (max |sum-1| = {worst:.2e})")


def fuse_positions(per_position: np.ndarray) -> StringPrediction:
    """Combine four per-digit distributions into one string prediction.

    Each position contributes its argmax digit (ties break toward the
    lower digit); the confidence is the product of the four maxima.
    """
    per_position = np.asarray(per_position, dtype=np.float64)
    if per_position.shape != (NUM_POSITIONS, NUM_DIGITS):
        raise ValueError(
            f"expected ({NUM_POSITIONS}, {NUM_DIGITS}) distributions, "
            f"got {per_position.shape}"
        )
    _check_rows_normalized(per_position, "per-position distributions")
    digits = per_position.argmax(axis=1)
    maxima = per_position.max(axis=1)
    return StringPrediction(
        text="".join(str(int(d)) for d in digits),
        confidence=float(np.prod(maxima)),
        per_position=per_position,
    )


def ctc_greedy_decode(frame_probs: np.ndarray) -> str:
    """Best-path decode: collapse repeated adjacent labels, delete blanks."""
    frame_probs = np.asarray(frame_probs, dtype=np.float64)
    if frame_probs.ndim != 2 or frame_probs.shape[1] != FRAME_CLASSES:
        raise ValueError(f"expected (T, {FRAME_CLASSES}) frames, got {frame_probs.shape}")
    _check_rows_normalized(frame_probs, "frame distributions")
    path = frame_probs.argmax(axis=1)
    out = []
    prev = None
    for symbol in path:
        if symbol != prev and symbol != BLANK_INDEX:
            out.append(str(int(symbol)))
        prev = symbol
    return "".join(out)


# ---------------------------------------------------------------------------
# Inference
# ---------------------------------------------------------------------------


def _softmax(logits: torch.Tensor) -> np.ndarray:
    return torch.softmax(logits, dim=-1).cpu().numpy().astype(np.float64)


def forward_probs(bundle: ModelBundle, images: Sequence[np.ndarray]) -> np.ndarray:
    """Run preprocessed images through the network; returns probabilities.

    Shapes: (B, 4, 10) for specific_task, (B, 44, 11) for crnn,
    (B, 31) for vgg16_native.  Every probability vector sums to 1.
    """
    batch = bundle.preprocess.apply_batch(images)
    net = bundle.network
    was_training = net.training
    net.eval()
    try:
        with torch.inference_mode():
            logits = net(batch.to(memory_format=torch.channels_last))
    finally:
        net.train(was_training)
    return _softmax(logits)


def decode_probs(arch_id: str, probs: np.ndarray, label_map: list[str]) -> StringPrediction:
    """Apply the architecture's decoding rule to one probability block."""
    if arch_id == ARCH_SPECIFIC_TASK:
        return fuse_positions(probs)
    if arch_id == ARCH_CRNN:
        text = ctc_greedy_decode(probs)
        maxima = probs.max(axis=1)
        # Geometric mean of framewise maxima keeps confidence in [0, 1]
        # without penalizing longer frame sequences.
        confidence = float(np.exp(np.mean(np.log(np.maximum(maxima, 1e-30)))))
        return StringPrediction(text=text, confidence=confidence, frame_probs=probs)
    if arch_id == ARCH_VGG16_NATIVE:
        probs = np.asarray(probs, dtype=np.float64)
        _check_rows_normalized(probs[None, :], "class distribution")
        idx = int(probs.argmax())
        return StringPrediction(text=label_map[idx], confidence=float(probs[idx]))
    raise BundleError(f"unknown architecture {arch_id!r}")


def predict(
    bundle: ModelBundle,
    images: Sequence[StringSample],
    batch_size: int = 32,
) -> list[StringPrediction]:
    """Decode a batch of samples; one prediction per input, in order.

    A sample whose image fails preprocessing yields an empty prediction
    carrying the error message; the rest of the batch continues.
    """
    results: list[StringPrediction | None] = [None] * len(images)
    tensors: list[torch.Tensor] = []
    index_of: list[int] = []
    for i, sample in enumerate(images):
        image = sample.image if isinstance(sample, StringSample) else sample
        try:
            tensors.append(bundle.preprocess.apply(image))
            index_of.append(i)
        except Exception as exc:
            logger.warning("sample %d failed preprocessing: %s", i, exc)
            results[i] = StringPrediction(text="", confidence=0.0, error=str(exc))

    net = bundle.network
    was_training = net.training
    net.eval()
    try:
        with torch.inference_mode():
            for start in range(0, len(tensors), batch_size):
                chunk = torch.stack(tensors[start : start + batch_size])
                logits = net(chunk.to(memory_format=torch.channels_last))
                probs = _softmax(logits)
                for row, i in enumerate(index_of[start : start + batch_size]):
                    results[i] = decode_probs(bundle.arch_id, probs[row], bundle.label_map)
    finally:
        net.train(was_training)
    assert all(r is not None for r in results)
    return results  # type: ignore[return-value]


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def save_bundle(bundle: ModelBundle, directory, force: bool = False) -> None:
    """Persist a bundle as ``metadata.json`` plus the native weight blob."""
    directory = Path(directory)
    if directory.exists() and any(directory.iterdir()) and not force:
        raise BundleError(f"bundle directory {directory} is not empty (use force)")
    directory.mkdir(parents=True, exist_ok=True)
    metadata = {
        "schema_version": BUNDLE_SCHEMA_VERSION,
        "arch_id": bundle.arch_id,
        "preprocess": bundle.preprocess.to_dict(),
        "label_map": bundle.label_map,
        "train_config_hash": bundle.train_config_hash,
        "extra": bundle.extra,
    }
    (directory / METADATA_FILE).write_text(
        json.dumps(metadata, indent=2, sort_keys=True) + "\n"
    )
    torch.save(bundle.network.state_dict(), directory / WEIGHTS_FILE)


def load_bundle(directory) -> ModelBundle:
    directory = Path(directory)
    meta_path = directory / METADATA_FILE
    if not meta_path.is_file():
        raise BundleError(f"no bundle metadata at {meta_path}")
    metadata = json.loads(meta_path.read_text())
    version = metadata.get("schema_version")
    if version != BUNDLE_SCHEMA_VERSION:
        raise BundleError(
            f"bundle schema {version} unsupported (expected {BUNDLE_SCHEMA_VERSION})"
        )
    arch_id = metadata["arch_id"]
    bundle = build(arch_id)
    state = torch.load(directory / WEIGHTS_FILE, map_location="cpu", weights_only=True)
    bundle.network.load_state_dict(state)
    bundle.preprocess = PreprocessContract.from_dict(metadata["preprocess"])
    bundle.label_map = metadata["label_map"]
    bundle.train_config_hash = metadata.get("train_config_hash", "")
    bundle.extra = metadata.get("extra", {})
    return bundle


def weights_hash(bundle: ModelBundle) -> str:
    h = hashlib.sha256()
    for name, tensor in sorted(bundle.network.state_dict().items()):
        h.update(name.encode())
        h.update(tensor.cpu().numpy().tobytes())
    return h.hexdigest()
