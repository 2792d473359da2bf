"""Neural mention-selection model: features, encoders, scorer, training and
autoregressive selection."""

from .features import (
    candidate_binary_features,
    distance_bucket,
    mention_binary_features,
)
from .provider import EmbeddingProvider, HashEmbeddingProvider, get_provider
from .model import ModelConfig, ModelError, RankerNet, TrainedRanker, ranking_loss
from .train import train, training_accuracy
from .select import ranker_chooser, select_mentions
from .serialize import load_model, save_model

__all__ = [
    "EmbeddingProvider", "HashEmbeddingProvider", "ModelConfig", "ModelError", "RankerNet",
    "TrainedRanker", "candidate_binary_features", "distance_bucket", "get_provider", "load_model",
    "mention_binary_features", "ranker_chooser", "ranking_loss", "save_model", "select_mentions",
    "train", "training_accuracy",
]
