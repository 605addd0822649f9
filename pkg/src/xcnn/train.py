"""Mini-batch SGD training loop with epoch-level diagnostics.

Each epoch logs mean train batch loss, validation loss, top-1 and top-k
(k = min(5, C)) accuracy, appended to a CSV. Everything downstream of the
(seed, manifest, hyperparams) triple is deterministic, including the log
bytes. Image decoding happens once up front; the desk-scale corpus fits
in memory.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import data as datamod
from .autodiff import Tape, Tensor
from .errors import ShapeError, TrainingError
from .model import Model, save_checkpoint

LOG_HEADER = ["epoch", "train_loss", "val_loss", "top1", "top5"]


@dataclass
class Hyperparams:
    epochs: int = 150
    batch_size: int = 32
    learning_rate: float = 0.05
    momentum: float = 0.9
    weight_decay: float = 5e-4
    seed: int = 0
    checkpoint_every: int = 0          # 0 disables periodic checkpoints
    lr_schedule: str = "constant"      # "constant" or "cosine"

    def validate(self):
        if self.epochs < 1:
            raise TrainingError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise TrainingError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate < 0:
            raise TrainingError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if not 0.0 <= self.momentum < 1.0:
            raise TrainingError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.weight_decay < 0:
            raise TrainingError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.checkpoint_every < 0:
            raise TrainingError(f"checkpoint_every must be >= 0, got {self.checkpoint_every}")
        if self.lr_schedule not in ("constant", "cosine"):
            raise TrainingError(f"unknown lr_schedule {self.lr_schedule!r}")


@dataclass
class EpochLog:
    epoch: int
    train_loss: float
    val_loss: float
    top1: float
    top5: float


class SGD:
    """SGD with classical momentum and L2 weight decay.

    With momentum 0 and weight decay 0 a step is exactly p -= lr * grad.
    """

    def __init__(self, params, lr, momentum=0.0, weight_decay=0.0):
        self.params = list(params)
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.buffers = {name: np.zeros_like(p.data) for name, p in self.params}

    def step(self):
        for name, p in self.params:
            if p.grad is None:
                continue
            g = p.grad
            if self.weight_decay:
                g = g + self.weight_decay * p.data
            if self.momentum:
                buf = self.buffers[name]
                buf *= self.momentum
                buf += g
                g = buf
            p.data -= self.lr * g

    def zero_grad(self):
        for _, p in self.params:
            p.zero_grad()


def topk_accuracy(logits: np.ndarray, labels, k: int) -> float:
    """Fraction of rows whose label is among the k largest logits.

    Ties rank the lower class index first (stable sort on descending
    score). k larger than the class count saturates at k = C, so asking
    for top-5 of a 4-class model is well defined and returns 1.0.
    """
    logits = np.asarray(logits)
    labels = np.asarray(labels)
    if logits.ndim != 2:
        raise ShapeError(f"logits must be N x C, got shape {logits.shape}")
    n, c = logits.shape
    if k < 1:
        raise ShapeError(f"k must be >= 1, got {k}")
    k = min(k, c)
    if labels.shape != (n,):
        raise ShapeError(f"labels shape {labels.shape} does not match batch {n}")
    if n == 0:
        return 0.0
    order = np.argsort(-logits, axis=1, kind="stable")
    hits = (order[:, :k] == labels[:, None]).any(axis=1)
    return float(hits.mean())


def batched_logits(model: Model, images: np.ndarray, batch_size: int) -> np.ndarray:
    """Tape-less forward over a fixed-order NCHW stack."""
    outs = []
    for i in range(0, len(images), batch_size):
        logits, _ = model.forward(Tensor(images[i:i + batch_size]))
        outs.append(logits.data)
    return np.concatenate(outs, axis=0)


def _mean_batch_loss(model, images, labels, batch_size):
    losses = []
    for i in range(0, len(images), batch_size):
        logits, _ = model.forward(Tensor(images[i:i + batch_size]))
        loss, _ = ad.softmax_cross_entropy(logits, labels[i:i + batch_size])
        losses.append(loss.item())
    return float(np.mean(losses))


def _load_split(manifest, split, size, labels):
    recs = [r for r in manifest.records if r.split == split]
    label_of = {name: i for i, name in enumerate(labels)}
    unknown = sorted({r.family for r in recs} - set(label_of))
    if unknown:
        raise TrainingError(f"families {unknown} missing from the model label map {labels}")
    images = np.stack([datamod.load_image(r.path, size) for r in recs]) if recs else \
        np.zeros((0, 3, size, size), dtype=ad.get_default_dtype())
    y = np.asarray([label_of[r.family] for r in recs], dtype=np.int64)
    return images, y


def _lr_at(hp: Hyperparams, epoch_in_run: int) -> float:
    if hp.lr_schedule == "constant" or hp.epochs == 1:
        return hp.learning_rate
    t = (epoch_in_run - 1) / (hp.epochs - 1)
    return hp.learning_rate * 0.5 * (1.0 + math.cos(math.pi * t))


def train(model: Model, manifest, hp: Hyperparams, out_dir, start_epoch: int = 0):
    """Run the loop; returns the EpochLog list and writes artifacts to out_dir.

    Artifacts: train_log.csv (appended when start_epoch > 0), model.ckpt at
    the end, model_ep<N>.ckpt every checkpoint_every epochs. Training
    aborts with a diagnostic naming the batch if the loss stops being
    finite.
    """
    from pathlib import Path

    hp.validate()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    size = model.config.input_size
    # emptiness is checked per split before decoding any image, so a
    # malformed manifest fails fast instead of at the first missing file
    train_x, train_y = _load_split(manifest, "train", size, model.labels)
    if len(train_x) == 0:
        raise TrainingError("manifest has an empty train split")
    val_x, val_y = _load_split(manifest, "val", size, model.labels)
    if len(val_x) == 0:
        raise TrainingError("manifest has an empty val split")

    opt = SGD(model.parameters(), hp.learning_rate, hp.momentum, hp.weight_decay)
    rng = np.random.default_rng(hp.seed)
    k5 = min(5, model.config.num_classes)
    log_path = out_dir / "train_log.csv"
    mode = "a" if start_epoch > 0 and log_path.exists() else "w"
    logs = []
    with open(log_path, mode, newline="", encoding="utf-8") as logf:
        writer = csv.writer(logf, lineterminator="\n")
        if mode == "w":
            writer.writerow(LOG_HEADER)
        for e in range(1, hp.epochs + 1):
            epoch = start_epoch + e
            opt.lr = _lr_at(hp, e)
            perm = rng.permutation(len(train_x))
            batch_losses = []
            for bi, s in enumerate(range(0, len(perm), hp.batch_size)):
                idx = perm[s:s + hp.batch_size]
                tape = Tape()
                x = tape.leaf(train_x[idx])
                logits, _ = model.forward(x)
                loss, _ = ad.softmax_cross_entropy(logits, train_y[idx])
                lv = loss.item()
                if not math.isfinite(lv):
                    raise TrainingError(
                        f"non-finite loss {lv} at epoch {epoch}, batch {bi}"
                    )
                tape.backward(loss)
                opt.step()
                opt.zero_grad()
                tape.release()
                batch_losses.append(lv)
            val_logits = batched_logits(model, val_x, hp.batch_size)
            entry = EpochLog(
                epoch=epoch,
                train_loss=float(np.mean(batch_losses)),
                val_loss=_mean_batch_loss(model, val_x, val_y, hp.batch_size),
                top1=topk_accuracy(val_logits, val_y, 1),
                top5=topk_accuracy(val_logits, val_y, k5),
            )
            logs.append(entry)
            writer.writerow([entry.epoch, repr(entry.train_loss), repr(entry.val_loss),
                             repr(entry.top1), repr(entry.top5)])
            logf.flush()
            if hp.checkpoint_every and epoch % hp.checkpoint_every == 0:
                save_checkpoint(model, out_dir / f"model_ep{epoch}.ckpt", {"epoch": epoch})
    save_checkpoint(model, out_dir / "model.ckpt", {"epoch": start_epoch + hp.epochs})
    return logs


def read_epoch_log(path):
    """Parse a train_log.csv back into EpochLog entries."""
    out = []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader)
        if header != LOG_HEADER:
            raise TrainingError(f"{path}: unexpected log header {header!r}")
        for row in reader:
            out.append(EpochLog(int(row[0]), float(row[1]), float(row[2]),
                                float(row[3]), float(row[4])))
    return out
