"""CTC training, best-on-dev model selection and beam-search inference."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import ctc, scoring
from .corpus import UtteranceRecord
from .model import USES_LINGUISTIC, AplConfig, AplModel, Batch, make_batch
from .numcore import OptimConfig, Optimizer, load_arrays, save_arrays
from .phoneset import PhoneInventory

log = logging.getLogger(__name__)


class NumericError(ArithmeticError):
    pass


def make_optimizer(cfg: AplConfig) -> Optimizer:
    return Optimizer(OptimConfig(lr=cfg.lr, mode=cfg.optimizer, clip_norm=cfg.clip_norm))


def records_batch(cfg: AplConfig, records: Sequence[UtteranceRecord], inv: PhoneInventory,
                  with_targets: bool = True) -> Batch:
    canon = [inv.encode(r.canonical) for r in records]
    if USES_LINGUISTIC[cfg.variant] and any(not c for c in canon):
        empty = [r.id for r, c in zip(records, canon) if not c]
        raise ValueError(f"utterances with empty canonical sequences: {empty}")
    targets = [inv.encode(r.perceived) for r in records] if with_targets else None
    feats = [r.features for r in records]
    embs = [r.embedding for r in records]
    return make_batch(cfg, feats, embs, canon, targets, [r.id for r in records])


def batch_loss(model: AplModel, batch: Batch, train: bool = True):
    """Mean CTC loss over feasible utterances and its gradient w.r.t. params.

    Returns ``(loss, grads, n_used, n_skipped)``; infeasible utterances (too
    few output frames for their targets) contribute nothing.
    """
    blank = model.cfg.n_classes - 1
    y, L, _, cache = model.forward(batch, train=train)
    dy = np.zeros_like(y)
    losses = []
    feasible = [b for b, tgt in enumerate(batch.targets) if ctc.required_frames(tgt) <= L[b]]
    skipped = len(batch.targets) - len(feasible)
    for b in feasible:
        loss, g = ctc.ctc_loss(y[b, :L[b]], batch.targets[b], blank)
        losses.append(loss)
        dy[b, :L[b]] = g / len(feasible)
    if not feasible:
        return 0.0, {}, 0, skipped
    loss = float(np.mean(losses))
    if not np.isfinite(loss):
        raise NumericError(f"non-finite CTC loss (max |log-prob| {np.max(np.abs(y)):.3g})")
    grads = model.backward(dy.astype(y.dtype), cache)
    return loss, grads, len(feasible), skipped


@dataclass
class StepResult:
    loss: float
    used: int
    skipped: int
    grad_norm: float


def train_step(model: AplModel, opt: Optimizer, batch: Batch) -> StepResult:
    loss, grads, used, skipped = batch_loss(model, batch, train=True)
    if not used:
        return StepResult(loss, used, skipped, 0.0)
    norm = opt.update(model.params, grads)
    if not np.isfinite(norm):
        raise NumericError(f"non-finite gradient norm (loss {loss:.4g})")
    return StepResult(loss, used, skipped, norm)


def predict_batch(model: AplModel, batch: Batch, beam_width: int | None = None) -> list[list[int]]:
    """Eval-mode forward then CTC prefix beam search per utterance."""
    width = beam_width or model.cfg.beam_width
    y, L, _, _ = model.forward(batch, train=False)
    blank = model.cfg.n_classes - 1
    return [ctc.beam_search(y[b, :L[b]], blank, width) for b in range(len(L))]


def predict(model: AplModel, records: Sequence[UtteranceRecord], inv: PhoneInventory,
            beam_width: int | None = None, chunk: int = 64) -> list[list[str]]:
    out = []
    for i in range(0, len(records), chunk):
        batch = records_batch(model.cfg, records[i:i + chunk], inv, with_targets=False)
        out += [inv.decode(ids) for ids in predict_batch(model, batch, beam_width)]
    return out


def phone_accuracy(model, records, inv, beam_width=None) -> float:
    hyps = predict(model, records, inv, beam_width)
    total = scoring.EditCounts()
    for rec, hyp in zip(records, hyps):
        total += scoring.align(list(rec.perceived), hyp)[1]
    return scoring.accuracy(total)


def fit(model: AplModel, train: Sequence[UtteranceRecord], dev: Sequence[UtteranceRecord],
        inv: PhoneInventory, opt: Optimizer | None = None,
        on_epoch: Callable[[AplModel, dict], bool | None] | None = None):
    """Seeded epoch loop; returns the best-on-dev model and the epoch history.

    Without a dev set the final model is kept. ``on_epoch`` sees the current
    (not best) model after every epoch; returning True ends training.
    """
    cfg = model.cfg
    if not train:
        raise ValueError("fit needs a non-empty training set")
    opt = opt or make_optimizer(cfg)
    rng = np.random.default_rng([cfg.seed, 1])
    history: list[dict] = []
    best, best_acc, stale = None, -np.inf, 0
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(len(train))
        losses, weights, skipped = [], [], 0
        for i in range(0, len(order), cfg.batch_size):
            batch = records_batch(cfg, [train[k] for k in order[i:i + cfg.batch_size]], inv)
            res = train_step(model, opt, batch)
            skipped += res.skipped
            if res.used:
                losses.append(res.loss)
                weights.append(res.used)
        train_loss = float(np.average(losses, weights=weights)) if losses else float("nan")
        dev_acc = phone_accuracy(model, dev, inv) if dev else None
        entry = {"epoch": epoch, "train_loss": train_loss, "dev_accuracy": dev_acc, "lr": opt.cfg.lr}
        if skipped:
            entry["skipped"] = skipped
        history.append(entry)
        log.info("epoch %d loss %.4f dev_acc %s", epoch, train_loss,
                 "n/a" if dev_acc is None else f"{dev_acc:.4f}")
        if dev_acc is not None:
            if dev_acc > best_acc:
                best, best_acc, stale = model.copy_state(), dev_acc, 0
            else:
                stale += 1
                if cfg.patience and stale >= cfg.patience:
                    break
        if on_epoch is not None and on_epoch(model, entry):
            break
    if best is not None:
        model.restore_state(best)
    return model, history


# --- checkpoints -------------------------------------------------------------------------------

def save_checkpoint(path, model: AplModel, opt: Optimizer | None = None) -> None:
    arrays = model.state_arrays()
    if opt is not None:
        arrays.update(opt.state_arrays())
    save_arrays(path, arrays)


def load_checkpoint(path, cfg: AplConfig, opt: Optimizer | None = None) -> AplModel:
    arrays = load_arrays(path)
    model = AplModel(cfg)
    model.load_state_arrays(arrays)
    if opt is not None:
        opt.load_state_arrays(arrays, model.dtype)
    return model
