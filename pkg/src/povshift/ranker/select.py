"""Autoregressive mention selection with a trained ranker."""

from __future__ import annotations

from typing import Sequence

from ..candidates import Candidate
from ..context import RankingExample
from ..conversion import ConversionPlan, ConversionResult, run_selection
from ..core import Mention
from .model import ModelError, TrainedRanker
from .train import pick


def ranker_chooser(model: TrainedRanker):
    """Chooser scoring the narrowed candidates; ties go to canonical order."""

    def choose(ex: RankingExample, candidates: Sequence[Candidate], mention: Mention) -> str:
        scores = model.score_example(ex)
        return ex.candidate_set[pick(scores, list(range(len(scores))))]

    return choose


def select_mentions(doc, plan: ConversionPlan, model: TrainedRanker) -> ConversionResult:
    """Step 4 of the pipeline for ``plan`` (built over ``doc``)."""
    if plan.doc is not doc and plan.doc.doc_id != doc.doc_id:
        raise ModelError("plan was built for a different document")
    cfg = model.config
    return run_selection(plan, ranker_chooser(model), cfg.n_tokens, cfg.k_mentions)
