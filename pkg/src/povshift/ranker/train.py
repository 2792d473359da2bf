"""Training loop: Adam on the margin ranking loss with early stopping."""

from __future__ import annotations

import copy
import hashlib
import json
import logging
from typing import Callable, Sequence

import numpy as np
import torch

from ..candidates import narrow_strings
from ..context import RankingExample
from .model import EncodedExample, ModelConfig, TrainedRanker, batch_loss
from .provider import EmbeddingProvider

log = logging.getLogger(__name__)


def corpus_hash(examples: Sequence[RankingExample]) -> str:
    h = hashlib.sha256()
    for ex in examples:
        h.update(json.dumps(ex.to_dict(), sort_keys=True, ensure_ascii=False).encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()


def pick(scores: np.ndarray, allowed: Sequence[int]) -> int:
    """Index of the best allowed candidate; ties go to the earliest index."""
    best = allowed[0]
    for i in allowed[1:]:
        if scores[i] > scores[best]:
            best = i
    return best


def allowed_indices(ex: RankingExample, narrow: bool = True) -> list[int]:
    if not narrow or not ex.candidate_set:
        return list(range(len(ex.candidate_set)))
    return narrow_strings(ex.candidate_set, ex.slot, ex.original)


def _accuracy(model: TrainedRanker, encoded: Sequence[EncodedExample], examples: Sequence[RankingExample],
              allowed: Sequence[Sequence[int]], batch_size: int = 256) -> float:
    correct = total = 0
    for i in range(0, len(encoded), batch_size):
        scores = model.score_encoded(encoded[i:i + batch_size])
        for s, enc, ok in zip(scores, encoded[i:i + batch_size], allowed[i:i + batch_size]):
            if enc.gold < 0:
                continue
            total += 1
            correct += int(pick(s, ok) == enc.gold)
    return correct / total if total else 0.0


def training_accuracy(model: TrainedRanker, examples: Sequence[RankingExample], narrow: bool = True) -> float:
    """Teacher-forced mention-selection accuracy (case narrowing applied)."""
    encoded = [model.encode(ex) for ex in examples]
    return _accuracy(model, encoded, examples, [allowed_indices(ex, narrow) for ex in examples])


def train(examples: Sequence[RankingExample], config: ModelConfig, provider: EmbeddingProvider,
          dev_examples: Sequence[RankingExample] | None = None,
          on_epoch: Callable[[int, float, float], None] | None = None) -> TrainedRanker:
    """Fit a ranker; early stopping keeps the checkpoint with the best dev
    accuracy (training accuracy when no dev set is given)."""
    if not examples:
        raise ValueError("no training examples")
    model = TrainedRanker(config, provider)
    net = model.net
    encoded = [model.encode(ex) for ex in examples]
    trainable = [e for e in encoded if e.gold >= 0 and len(e.candidates) >= 2]
    if not trainable:
        raise ValueError("no example has a gold string and two or more candidates")
    dev = list(dev_examples) if dev_examples else list(examples)
    dev_encoded = [model.encode(ex) for ex in dev] if dev_examples else encoded
    dev_allowed = [allowed_indices(ex) for ex in dev]
    _ = model.frozen  # vocabulary of train and dev is fixed from here on

    torch.manual_seed(config.seed)
    gen = torch.Generator().manual_seed(config.seed)
    opt = torch.optim.Adam(net.parameters(), lr=config.learning_rate)
    best_acc, best_state, best_epoch, stale, epochs = -1.0, None, 0, 0, 0
    for epoch in range(1, config.max_epochs + 1):
        epochs = epoch
        net.train()
        order = torch.randperm(len(trainable), generator=gen).tolist()
        total = 0.0
        for i in range(0, len(order), config.batch_size):
            batch = [trainable[j] for j in order[i:i + config.batch_size]]
            opt.zero_grad()
            loss = batch_loss(net(batch, model.frozen), batch, config.margin)
            loss.backward()
            opt.step()
            total += float(loss.detach()) * len(batch)
        acc = _accuracy(model, dev_encoded, dev, dev_allowed)
        if on_epoch is not None:
            on_epoch(epoch, total / len(trainable), acc)
        log.debug("epoch %d loss %.4f dev %.4f", epoch, total / len(trainable), acc)
        if acc > best_acc:
            best_acc, best_state, best_epoch, stale = acc, copy.deepcopy(net.state_dict()), epoch, 0
        else:
            stale += 1
        if stale >= config.patience or best_acc >= 1.0:
            break
    net.load_state_dict(best_state)
    net.eval()
    model.metadata.update({
        "corpus_hash": corpus_hash(examples), "epochs": epochs, "best_epoch": best_epoch,
        "early_stop_metric": "dev_accuracy" if dev_examples else "train_accuracy",
        "best_metric": round(best_acc, 6), "train_examples": len(examples),
    })
    return model
