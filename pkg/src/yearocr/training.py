"""Training harness: per-architecture defaults, early stopping, run logs.

Each architecture trains with its published defaults (batch size, loss,
regularizer, optimizer, learning rate, batch norm), up to 100 epochs with
early stopping once the validation loss stops improving for ten epochs.
The weights returned are those of the best validation epoch.
"""

from __future__ import annotations

import copy
import hashlib
import json
import logging
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
import torch.nn.functional as F

from .corpus import StringSample, YearLabel, corpus_hash
from .errors import TrainingError
from .models import (
    ARCH_CRNN,
    ARCH_SPECIFIC_TASK,
    ARCH_VGG16_NATIVE,
    ARCHITECTURES,
    BLANK_INDEX,
    CRNN_FRAMES,
    ModelBundle,
    PreprocessContract,
    decode_probs,
)

logger = logging.getLogger(__name__)

LOSS_CROSSENTROPY = "categorical_crossentropy"
LOSS_CTC = "ctc"
REG_DROPOUT = "dropout"
REG_L2 = "l2"
OPT_ADAM = "adam"
OPT_ADADELTA = "adadelta"


@dataclass(frozen=True)
class TrainConfig:
    arch_id: str
    batch_size: int
    loss: str
    regularizer: str
    regularizer_value: float
    optimizer: str
    learning_rate: float
    batch_norm: bool
    max_epochs: int = 100
    patience: int | None = 10  # None disables early stopping
    validation_fraction: float = 0.1
    rng_seed: int = 0
    # Freeze the first N trunk layers before fine-tuning (0 = train all).
    freeze_trunk_layers: int = 0
    # Optional early exit once training accuracy reaches this level;
    # used by overfit smoke checks, never by the published defaults.
    target_train_accuracy: float | None = None

    def __post_init__(self):
        if self.arch_id not in ARCHITECTURES:
            raise TrainingError(f"unknown architecture {self.arch_id!r}")
        if not 0 < self.validation_fraction < 0.5:
            raise TrainingError("validation_fraction must be in (0, 0.5)")
        if self.batch_size <= 0 or self.max_epochs <= 0:
            raise TrainingError("batch_size and max_epochs must be positive")

    def config_hash(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


_DEFAULTS = {
    ARCH_SPECIFIC_TASK: dict(
        batch_size=32,
        loss=LOSS_CROSSENTROPY,
        regularizer=REG_DROPOUT,
        regularizer_value=0.25,
        optimizer=OPT_ADAM,
        learning_rate=1e-3,
        batch_norm=True,
    ),
    ARCH_CRNN: dict(
        batch_size=128,
        loss=LOSS_CTC,
        regularizer=REG_DROPOUT,
        regularizer_value=0.25,
        optimizer=OPT_ADADELTA,
        learning_rate=1e-3,
        batch_norm=False,
    ),
    ARCH_VGG16_NATIVE: dict(
        batch_size=32,
        loss=LOSS_CROSSENTROPY,
        regularizer=REG_L2,
        regularizer_value=5e-4,
        optimizer=OPT_ADAM,
        learning_rate=1e-5,
        batch_norm=False,
    ),
}


def default_config(arch_id: str) -> TrainConfig:
    """The published per-architecture training defaults."""
    if arch_id not in _DEFAULTS:
        raise TrainingError(f"unknown architecture {arch_id!r}")
    return TrainConfig(arch_id=arch_id, **_DEFAULTS[arch_id])


def targets_for(arch_id: str, label: YearLabel):
    """Training target encoding for one label under one architecture."""
    if arch_id == ARCH_SPECIFIC_TASK:
        onehots = np.zeros((4, 10), dtype=np.float32)
        for i, d in enumerate(label.digits):
            onehots[i, d] = 1.0
        return onehots
    if arch_id == ARCH_CRNN:
        return list(label.digits)
    if arch_id == ARCH_VGG16_NATIVE:
        onehot = np.zeros(31, dtype=np.float32)
        onehot[label.index] = 1.0
        return onehot
    raise TrainingError(f"unknown architecture {arch_id!r}")


class EarlyStopper:
    """Halts exactly ``patience`` epochs after the last improvement."""

    def __init__(self, patience: int | None):
        self.patience = patience
        self.best_loss = float("inf")
        self.best_epoch = 0
        self._since_improvement = 0

    def update(self, epoch: int, loss: float) -> bool:
        """Record one epoch's monitored loss; True means stop now."""
        if loss < self.best_loss:
            self.best_loss = loss
            self.best_epoch = epoch
            self._since_improvement = 0
            return False
        self._since_improvement += 1
        if self.patience is None:
            return False
        return self._since_improvement >= self.patience


@dataclass
class EpochLog:
    epoch: int
    train_loss: float
    val_loss: float
    val_accuracy: float
    train_accuracy: float | None = None


@dataclass
class TrainRunRecord:
    epochs: list[EpochLog] = field(default_factory=list)
    stopped_epoch: int = 0
    best_epoch: int = 0
    wall_time_s: float = 0.0
    config_hash: str = ""
    corpus_hash: str = ""
    diverged: bool = False

    def save(self, directory) -> None:
        """One epoch per line plus a summary file."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        lines = []
        for e in self.epochs:
            extras = "" if e.train_accuracy is None else f" train_acc={e.train_accuracy:.4f}"
            lines.append(
                f"epoch={e.epoch} train_loss={e.train_loss:.6f} "
                f"val_loss={e.val_loss:.6f} val_acc={e.val_accuracy:.4f}{extras}"
            )
        (directory / "epochs.log").write_text("\n".join(lines) + "\n")
        summary = {
            "stopped_epoch": self.stopped_epoch,
            "best_epoch": self.best_epoch,
            "wall_time_s": round(self.wall_time_s, 3),
            "config_hash": self.config_hash,
            "corpus_hash": self.corpus_hash,
            "diverged": self.diverged,
        }
        (directory / "summary.json").write_text(
            json.dumps(summary, indent=2, sort_keys=True) + "\n"
        )


def stratified_validation_split(
    samples: Sequence[StringSample], fraction: float, seed: int
) -> tuple[list[int], list[int]]:
    """Per-class validation carve-out; returns (train_idx, val_idx)."""
    by_class: dict[str, list[int]] = {}
    for i, s in enumerate(samples):
        by_class.setdefault(s.label.text, []).append(i)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
    train_idx: list[int] = []
    val_idx: list[int] = []
    for label in sorted(by_class):
        idx = np.array(by_class[label])
        rng.shuffle(idx)
        n_val = int(round(fraction * len(idx)))
        if len(idx) >= 2:
            n_val = min(max(n_val, 1), len(idx) - 1)
        else:
            n_val = 0
        val_idx.extend(idx[:n_val].tolist())
        train_idx.extend(idx[n_val:].tolist())
    return sorted(train_idx), sorted(val_idx)


def fit_channel_stats(samples: Sequence[StringSample], limit: int = 2000) -> tuple:
    """Per-channel mean/std of the training images scaled to [0, 1]."""
    step = max(1, len(samples) // limit)
    acc = np.zeros(3)
    acc2 = np.zeros(3)
    n = 0
    for s in samples[::step]:
        x = s.image.astype(np.float64) / 255.0
        acc += x.mean(axis=(0, 1))
        acc2 += (x ** 2).mean(axis=(0, 1))
        n += 1
    mean = acc / n
    std = np.sqrt(np.maximum(acc2 / n - mean ** 2, 1e-8))
    return tuple(float(m) for m in mean), tuple(float(s) for s in std)


def _set_dropout(net: torch.nn.Module, p: float) -> None:
    for module in net.modules():
        if isinstance(module, torch.nn.Dropout):
            module.p = p


def _freeze_trunk(net: torch.nn.Module, layers: int) -> None:
    if layers <= 0 or not hasattr(net, "trunk"):
        return
    for i, module in enumerate(net.trunk):
        if i >= layers:
            break
        for p in module.parameters():
            p.requires_grad_(False)


def _make_optimizer(net: torch.nn.Module, config: TrainConfig):
    params = [p for p in net.parameters() if p.requires_grad]
    weight_decay = config.regularizer_value if config.regularizer == REG_L2 else 0.0
    if config.optimizer == OPT_ADAM:
        return torch.optim.Adam(params, lr=config.learning_rate, weight_decay=weight_decay)
    if config.optimizer == OPT_ADADELTA:
        return torch.optim.Adadelta(params, lr=config.learning_rate, weight_decay=weight_decay)
    raise TrainingError(f"unknown optimizer {config.optimizer!r}")


def _check_ctc_feasible(samples: Sequence[StringSample], frames: int) -> None:
    for s in samples:
        digits = s.label.digits
        required = len(digits) + sum(
            1 for a, b in zip(digits, digits[1:]) if a == b
        )
        if required > frames:
            raise TrainingError(
                f"label {s.label.text} of sample {s.source_id!r} needs "
                f"{required} frames but the model emits only {frames}"
            )


def _batch_loss(arch_id: str, logits: torch.Tensor, labels: list[YearLabel]):
    if arch_id == ARCH_SPECIFIC_TASK:
        digit_targets = torch.tensor([l.digits for l in labels], dtype=torch.long)
        # Equal-weight sum of the four per-head crossentropies.
        return sum(
            F.cross_entropy(logits[:, i, :], digit_targets[:, i]) for i in range(4)
        )
    if arch_id == ARCH_CRNN:
        log_probs = F.log_softmax(logits, dim=-1).permute(1, 0, 2)
        targets = torch.tensor([d for l in labels for d in l.digits], dtype=torch.long)
        t, b, _ = log_probs.shape
        input_lengths = torch.full((b,), t, dtype=torch.long)
        target_lengths = torch.full((b,), 4, dtype=torch.long)
        return F.ctc_loss(
            log_probs, targets, input_lengths, target_lengths,
            blank=BLANK_INDEX, reduction="mean",
        )
    if arch_id == ARCH_VGG16_NATIVE:
        class_targets = torch.tensor([l.index for l in labels], dtype=torch.long)
        return F.cross_entropy(logits, class_targets)
    raise TrainingError(f"unknown architecture {arch_id!r}")


def _forward(net, batch: torch.Tensor) -> torch.Tensor:
    return net(batch.to(memory_format=torch.channels_last))


def _evaluate_pass(bundle, samples, config) -> tuple[float, float]:
    """(loss, string accuracy) over a sample set, eval mode."""
    net = bundle.network
    net.eval()
    total_loss = 0.0
    correct = 0
    n = len(samples)
    with torch.inference_mode():
        for start in range(0, n, config.batch_size):
            chunk = samples[start : start + config.batch_size]
            batch = bundle.preprocess.apply_batch([s.image for s in chunk])
            batch_labels = [s.label for s in chunk]
            logits = _forward(net, batch)
            loss = _batch_loss(config.arch_id, logits, batch_labels)
            total_loss += float(loss) * len(batch_labels)
            probs = torch.softmax(logits, dim=-1).cpu().numpy().astype(np.float64)
            for row, label in enumerate(batch_labels):
                decoded = decode_probs(config.arch_id, probs[row], bundle.label_map)
                if decoded.text == label.text:
                    correct += 1
    net.train()
    return total_loss / n, correct / n


def train(
    bundle: ModelBundle,
    corpus: Sequence[StringSample],
    config: TrainConfig,
    log_fn=None,
) -> tuple[ModelBundle, TrainRunRecord]:
    """Train a bundle in place and return it with the run record.

    The corpus is split into a stratified validation part and a training
    part; batches reshuffle every epoch from the run seed.  Training stops
    at ``max_epochs`` or once validation loss has not improved for
    ``patience`` consecutive epochs, and the best-validation weights are
    restored before returning.  Non-finite losses abort with the partial
    record attached to the raised error.
    """
    if config.arch_id != bundle.arch_id:
        raise TrainingError(
            f"config is for {config.arch_id!r} but bundle is {bundle.arch_id!r}"
        )
    corpus = list(corpus)
    if not corpus:
        raise TrainingError("training corpus is empty")
    if config.arch_id == ARCH_CRNN:
        _check_ctc_feasible(corpus, CRNN_FRAMES)

    record = TrainRunRecord(
        config_hash=config.config_hash(), corpus_hash=corpus_hash(corpus)
    )
    start_time = time.time()

    torch.manual_seed(config.rng_seed)
    mean, std = fit_channel_stats(corpus)
    bundle.preprocess = replace(bundle.preprocess, channel_mean=mean, channel_std=std)
    bundle.train_config_hash = config.config_hash()

    if config.regularizer == REG_DROPOUT:
        _set_dropout(bundle.network, config.regularizer_value)
    else:
        _set_dropout(bundle.network, 0.0)
    _freeze_trunk(bundle.network, config.freeze_trunk_layers)

    train_idx, val_idx = stratified_validation_split(
        corpus, config.validation_fraction, config.rng_seed
    )
    if not train_idx or not val_idx:
        raise TrainingError(
            f"corpus of {len(corpus)} samples is too small to carve a "
            f"{config.validation_fraction:.0%} validation split"
        )
    train_samples = [corpus[i] for i in train_idx]
    val_samples = [corpus[i] for i in val_idx]

    net = bundle.network.to(memory_format=torch.channels_last)
    net.train()
    optimizer = _make_optimizer(net, config)
    stopper = EarlyStopper(config.patience)
    best_state = copy.deepcopy(net.state_dict())
    epoch_rng = np.random.default_rng(np.random.SeedSequence([config.rng_seed, 1]))

    for epoch in range(1, config.max_epochs + 1):
        order = epoch_rng.permutation(len(train_samples))
        epoch_loss = 0.0
        for start in range(0, len(order), config.batch_size):
            chosen = [train_samples[i] for i in order[start : start + config.batch_size]]
            batch = bundle.preprocess.apply_batch([s.image for s in chosen])
            batch_labels = [s.label for s in chosen]
            optimizer.zero_grad()
            logits = _forward(net, batch)
            loss = _batch_loss(config.arch_id, logits, batch_labels)
            if not torch.isfinite(loss):
                record.diverged = True
                record.stopped_epoch = epoch
                record.wall_time_s = time.time() - start_time
                err = TrainingError(f"non-finite loss at epoch {epoch}; aborting")
                err.record = record  # type: ignore[attr-defined]
                raise err
            loss.backward()
            optimizer.step()
            epoch_loss += float(loss.detach()) * len(chosen)
        train_loss = epoch_loss / len(train_samples)

        val_loss, val_acc = _evaluate_pass(bundle, val_samples, config)
        train_acc = None
        if config.target_train_accuracy is not None:
            _, train_acc = _evaluate_pass(bundle, train_samples, config)
        log = EpochLog(epoch, train_loss, val_loss, val_acc, train_acc)
        record.epochs.append(log)
        if log_fn is not None:
            log_fn(log)

        improved = val_loss < stopper.best_loss
        should_stop = stopper.update(epoch, val_loss)
        if improved:
            best_state = copy.deepcopy(net.state_dict())
        record.stopped_epoch = epoch
        if train_acc is not None and train_acc >= config.target_train_accuracy:
            # The overfit target was reached: keep the weights that did it.
            best_state = copy.deepcopy(net.state_dict())
            stopper.best_epoch = epoch
            break
        if should_stop:
            break

    record.best_epoch = stopper.best_epoch
    record.wall_time_s = time.time() - start_time
    net.load_state_dict(best_state)
    return bundle, record
