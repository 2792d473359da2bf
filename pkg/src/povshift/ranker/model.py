"""Scorer network: four LSTM encoders feeding a one-hidden-layer tanh MLP.

score(s | C) = v^T tanh(W [h_T | h_M | phi_b] + b)

h_T concatenates the final states of a left token LSTM (left window, then
the candidate's tokens) and a right token LSTM (right window read from the
far end towards the slot).  h_M does the same over mention windows, where
each token vector is extended with the 7 binary features of its mention.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace
from typing import Sequence

import numpy as np
import torch
from torch import nn
from torch.nn.utils.rnn import pack_padded_sequence

from ..context import PAD, SEP, SPECIAL_TOKENS, UNK, RankingExample, capitalize_first, tokenize_string
from .features import (
    N_CANDIDATE_FEATURES,
    N_MENTION_FEATURES,
    candidate_binary_features,
    mention_binary_features,
)
from .provider import EmbeddingProvider

SPECIAL_ID = {tok: i for i, tok in enumerate(SPECIAL_TOKENS)}
_CANDIDATE_PHI = mention_binary_features(True, 0)
_ZERO_PHI = np.zeros(N_MENTION_FEATURES, dtype=np.float32)


class ModelError(RuntimeError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    n_tokens: int = 50
    k_mentions: int = 10
    lstm_hidden: int = 50
    mlp_hidden: int = 100
    margin: float = 0.2
    learning_rate: float = 1e-3
    dropout: float = 0.2
    seed: int = 0
    max_epochs: int = 200
    patience: int = 10
    batch_size: int = 32
    use_token_lstm: bool = True
    use_mention_lstm: bool = True
    use_phi_t: bool = True
    use_phi_b: bool = True

    def __post_init__(self):
        for name in ("n_tokens", "k_mentions", "lstm_hidden", "mlp_hidden", "max_epochs", "patience", "batch_size"):
            if int(getattr(self, name)) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.margin <= 0 or self.learning_rate <= 0:
            raise ValueError("margin and learning_rate must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if not (self.use_token_lstm or self.use_mention_lstm):
            raise ValueError("at least one of the token and mention encoders must be enabled")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name: f.type for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})

    def label(self) -> str:
        parts = [name for name, on in (("token", self.use_token_lstm), ("mention", self.use_mention_lstm),
                                       ("phi_t", self.use_phi_t), ("phi_b", self.use_phi_b)) if on]
        return "+".join(parts)


def ranking_loss(gold_score, other_scores, margin: float):
    """sum_j max(0, margin - gold + other_j); works on floats or tensors."""
    if margin <= 0:
        raise ValueError("margin must be positive")
    if isinstance(gold_score, torch.Tensor) or isinstance(other_scores, torch.Tensor):
        others = torch.as_tensor(other_scores)
        return torch.clamp(margin - gold_score + others, min=0).sum()
    others = np.asarray(list(other_scores), dtype=np.float64)
    return float(np.maximum(0.0, margin - float(gold_score) + others).sum())


@dataclass
class EncodedExample:
    tok_left: np.ndarray  # (N,)
    tok_right: np.ndarray  # (N,) far end first
    men_left: np.ndarray  # (L,)
    men_left_phi: np.ndarray  # (L, 7)
    men_right: np.ndarray  # (R,) far end first
    men_right_phi: np.ndarray
    candidates: list  # list of id arrays
    phi_b: np.ndarray  # (C, 10)
    gold: int  # index into candidates, -1 if unknown


class RankerNet(nn.Module):
    def __init__(self, config: ModelConfig, dim: int):
        super().__init__()
        self.config = config
        self.dim = dim
        h = config.lstm_hidden
        self.special = nn.Parameter(torch.randn(len(SPECIAL_TOKENS), dim) / np.sqrt(dim))
        self.tok_left = nn.LSTM(dim, h, batch_first=True)
        self.tok_right = nn.LSTM(dim, h, batch_first=True)
        men_in = dim + (N_MENTION_FEATURES if config.use_phi_t else 0)
        self.men_left = nn.LSTM(men_in, h, batch_first=True)
        self.men_right = nn.LSTM(men_in, h, batch_first=True)
        feat = 2 * h * (int(config.use_token_lstm) + int(config.use_mention_lstm))
        feat += N_CANDIDATE_FEATURES if config.use_phi_b else 0
        self.feature_dim = feat
        self.hidden = nn.Linear(feat, config.mlp_hidden)
        self.v = nn.Linear(config.mlp_hidden, 1, bias=False)
        self.drop = nn.Dropout(config.dropout)

    # -- helpers -----------------------------------------------------------

    def _table(self, frozen: torch.Tensor) -> torch.Tensor:
        return torch.cat([self.special, frozen.to(self.special.dtype)], dim=0)

    @staticmethod
    def _pad(seqs: Sequence[np.ndarray]) -> tuple[torch.Tensor, torch.Tensor]:
        lengths = torch.tensor([len(s) for s in seqs], dtype=torch.long)
        out = np.zeros((len(seqs), int(lengths.max())), dtype=np.int64)
        for i, s in enumerate(seqs):
            out[i, :len(s)] = s
        return torch.from_numpy(out), lengths

    @staticmethod
    def _pad_phi(seqs: Sequence[np.ndarray], width: int) -> torch.Tensor:
        out = np.zeros((len(seqs), width, N_MENTION_FEATURES), dtype=np.float32)
        for i, s in enumerate(seqs):
            out[i, :len(s)] = s
        return torch.from_numpy(out)

    @staticmethod
    def _run(lstm: nn.LSTM, x: torch.Tensor, lengths: torch.Tensor, state=None):
        packed = pack_padded_sequence(x, lengths, batch_first=True, enforce_sorted=False)
        _, (h, c) = lstm(packed, state)
        return h, c

    def _mention_input(self, table, ids, phi):
        x = table[ids]
        if self.config.use_phi_t:
            x = torch.cat([x, phi.to(x.dtype)], dim=-1)
        return x

    # -- forward -----------------------------------------------------------

    def forward(self, batch: Sequence[EncodedExample], frozen: torch.Tensor) -> torch.Tensor:
        """Scores of every (example, candidate) pair, concatenated in order."""
        table = self._table(frozen)
        owner = torch.tensor([b for b, ex in enumerate(batch) for _ in ex.candidates], dtype=torch.long)
        cand_ids, cand_len = self._pad([c for ex in batch for c in ex.candidates])
        parts = []
        if self.config.use_token_lstm:
            left = torch.from_numpy(np.stack([ex.tok_left for ex in batch]))
            right = torch.from_numpy(np.stack([ex.tok_right for ex in batch]))
            _, (hl, cl) = self.tok_left(table[left])
            _, (hr, _) = self.tok_right(table[right])
            h, _ = self._run(self.tok_left, table[cand_ids], cand_len, (hl[:, owner], cl[:, owner]))
            parts += [h[-1], hr[-1][owner]]
        if self.config.use_mention_lstm:
            ml_ids, ml_len = self._pad([ex.men_left for ex in batch])
            ml_phi = self._pad_phi([ex.men_left_phi for ex in batch], ml_ids.shape[1])
            hl, cl = self._run(self.men_left, self._mention_input(table, ml_ids, ml_phi), ml_len)
            cand_phi = torch.from_numpy(np.broadcast_to(_CANDIDATE_PHI, (*cand_ids.shape, N_MENTION_FEATURES)).copy())
            h, _ = self._run(self.men_left, self._mention_input(table, cand_ids, cand_phi), cand_len,
                             (hl[:, owner], cl[:, owner]))
            mr_ids, mr_len = self._pad([ex.men_right for ex in batch])
            mr_phi = self._pad_phi([ex.men_right_phi for ex in batch], mr_ids.shape[1])
            hr, _ = self._run(self.men_right, self._mention_input(table, mr_ids, mr_phi), mr_len)
            parts += [h[-1], hr[-1][owner]]
        if self.config.use_phi_b:
            phib = torch.from_numpy(np.concatenate([ex.phi_b for ex in batch]))
            parts.append(phib.to(table.dtype))
        phi = torch.cat(parts, dim=-1)
        return self.v(torch.tanh(self.hidden(self.drop(phi)))).squeeze(-1)


def batch_loss(scores: torch.Tensor, batch: Sequence[EncodedExample], margin: float) -> torch.Tensor:
    """Mean over examples of the summed hinge terms against the gold candidate."""
    total = scores.new_zeros(())
    n = 0
    offset = 0
    for ex in batch:
        c = len(ex.candidates)
        if ex.gold >= 0 and c >= 2:
            s = scores[offset:offset + c]
            others = torch.cat([s[:ex.gold], s[ex.gold + 1:]])
            total = total + ranking_loss(s[ex.gold], others, margin)
            n += 1
        offset += c
    return total / max(n, 1)


class TrainedRanker:
    """A scorer network together with its provider vocabulary and metadata."""

    def __init__(self, config: ModelConfig, provider: EmbeddingProvider, net: RankerNet | None = None,
                 metadata: dict | None = None):
        self.config = config
        self.provider = provider
        if net is None:
            torch.manual_seed(config.seed)
            net = RankerNet(config, provider.dim)
        self.net = net
        self.metadata = dict(metadata or {})
        self.vocab: dict[str, int] = {}
        self._frozen_rows: list[np.ndarray] = []
        self._frozen: torch.Tensor | None = None

    # -- vocabulary ----------------------------------------------------------

    def ids(self, tokens: Sequence[str]) -> np.ndarray:
        out = np.empty(len(tokens), dtype=np.int64)
        for i, t in enumerate(tokens):
            sid = SPECIAL_ID.get(t)
            if sid is not None:
                out[i] = sid
                continue
            row = self.vocab.get(t)
            if row is None:
                row = len(self.vocab)
                self.vocab[t] = row
                self._frozen_rows.append(self.provider.embed([t])[0])
                self._frozen = None
            out[i] = row + len(SPECIAL_TOKENS)
        return out

    @property
    def frozen(self) -> torch.Tensor:
        if self._frozen is None or self._frozen.shape[0] != len(self._frozen_rows):
            rows = self._frozen_rows or [np.zeros(self.provider.dim, dtype=np.float32)]
            self._frozen = torch.from_numpy(np.stack(rows).astype(np.float32))
        return self._frozen

    # -- encoding ------------------------------------------------------------

    def _mention_sequence(self, mentions, k: int, before: bool):
        units = [(list(m.tokens) or [UNK], mention_binary_features(m.same_entity, m.distance)) for m in mentions]
        pads = [([PAD], _ZERO_PHI)] * (k - len(units))
        units = pads + units if before else units + pads
        toks, phis = [], []
        for i, (ts, phi) in enumerate(units):
            if i:
                toks.append(SEP)
                phis.append(_ZERO_PHI)
            toks.extend(ts)
            phis.extend([_ZERO_PHI if t == PAD else phi for t in ts])
        return toks, phis

    def encode(self, ex: RankingExample) -> EncodedExample:
        n, k = self.config.n_tokens, self.config.k_mentions
        left = list(ex.left_tokens[-n:])
        right = list(ex.right_tokens[:n])
        left = [PAD] * (n - len(left)) + left
        right = right + [PAD] * (n - len(right))
        if len(left) != n or len(right) != n:
            raise ModelError("token window length differs from N after padding")
        ml_toks, ml_phi = self._mention_sequence(ex.left_mentions[-k:], k, before=True)
        ml_toks.append(SEP)
        ml_phi.append(_ZERO_PHI)
        mr_toks, mr_phi = self._mention_sequence(ex.right_mentions[:k], k, before=False)
        cands = []
        for c in ex.candidate_set:
            text = capitalize_first(c) if ex.sentence_initial else c
            cands.append(self.ids(tokenize_string(text) or [UNK]))
        phi_b = np.stack([candidate_binary_features(c, ex.mention_index, ex.prior_strings, ex.role)
                          for c in ex.candidate_set]) if ex.candidate_set else np.zeros((0, N_CANDIDATE_FEATURES))
        gold = ex.candidate_set.index(ex.gold_string) if ex.gold_string in ex.candidate_set else -1
        return EncodedExample(
            tok_left=self.ids(left), tok_right=self.ids(right[::-1]),
            men_left=self.ids(ml_toks), men_left_phi=np.stack(ml_phi),
            men_right=self.ids(mr_toks[::-1]), men_right_phi=np.stack(mr_phi[::-1]),
            candidates=cands, phi_b=phi_b.astype(np.float32), gold=gold,
        )

    # -- scoring -------------------------------------------------------------

    def score_encoded(self, batch: Sequence[EncodedExample]) -> list[np.ndarray]:
        self.net.eval()
        with torch.no_grad():
            flat = self.net(batch, self.frozen).double().numpy()
        out, offset = [], 0
        for ex in batch:
            out.append(flat[offset:offset + len(ex.candidates)])
            offset += len(ex.candidates)
        return out

    def score_example(self, ex: RankingExample) -> np.ndarray:
        if not ex.candidate_set:
            raise ModelError("example has no candidates")
        return self.score_encoded([self.encode(ex)])[0]

    def score(self, candidate: str, ex: RankingExample) -> float:
        """Score of one candidate string in the context of ``ex``."""
        single = replace(ex, candidate_set=(candidate,))
        return float(self.score_example(single)[0])

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {k: v.detach().cpu().numpy() for k, v in self.net.state_dict().items()}
