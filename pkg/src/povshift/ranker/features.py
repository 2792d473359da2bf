"""Binary features of context mentions and of candidate strings."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..core import Role

DISTANCE_EDGES = (5, 10, 15, 20, 25)
N_MENTION_FEATURES = 7
N_CANDIDATE_FEATURES = 10


def distance_bucket(d: int) -> int:
    """0: d <= 5, 1: (5, 10], ..., 4: (20, 25], 5: d > 25."""
    for i, edge in enumerate(DISTANCE_EDGES):
        if d <= edge:
            return i
    return len(DISTANCE_EDGES)


def mention_binary_features(same_entity: bool, distance: int) -> np.ndarray:
    """[same-entity flag, six one-hot distance buckets]."""
    v = np.zeros(N_MENTION_FEATURES, dtype=np.float32)
    v[0] = float(same_entity)
    v[1 + distance_bucket(distance)] = 1.0
    return v


def length_bucket(n_words: int) -> int:
    """Index 0..4 for lengths 1..5, 5 for longer strings."""
    return min(max(n_words, 1), 6) - 1


def candidate_binary_features(candidate: str, mention_index: int, prior_strings: Sequence[str],
                              role: Role | str) -> np.ndarray:
    """[first-or-second mention, length one-hot (1..5, >5), used before,
    used for the previous mention, subject or object]."""
    v = np.zeros(N_CANDIDATE_FEATURES, dtype=np.float32)
    v[0] = float(mention_index <= 1)
    v[1 + length_bucket(len(candidate.split()))] = 1.0
    v[7] = float(candidate in prior_strings)
    v[8] = float(bool(prior_strings) and prior_strings[-1] == candidate)
    v[9] = float(Role(role) in (Role.SUBJECT, Role.OBJECT))
    return v
