"""Shared artifact space: the one common metric space every node exports into.

Artifacts are the only objects that cross node boundaries. Each one is the
clipped, noised concatenation of a strategy vector (pattern part) and a
task-outcome encoding (task-type one-hot plus the achieved-loss scalar).
Network-level measures (dispersion, learning activity) live here too.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from .errors import ConfigurationError, DispersionUndefinedError
from .kernels import pairwise_sq_sum


def _frozen_vector(v, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise ConfigurationError(f"{name} must be a 1-d vector")
    if not np.all(np.isfinite(arr)):
        raise ConfigurationError(f"{name} contains non-finite entries")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class SharedSpaceConfig:
    """Dimensions and metric of the common artifact space."""

    d_pattern: int
    d_outcome: int
    clip_radius: float
    dp_sigma: float = 0.0
    metric: str = "euclidean"

    def __post_init__(self):
        if self.d_pattern < 1 or self.d_outcome < 1:
            raise ConfigurationError("space dimensions must be positive")
        if self.clip_radius <= 0:
            raise ConfigurationError("clip_radius must be positive")
        if self.dp_sigma < 0:
            raise ConfigurationError("dp_sigma must be non-negative")
        if self.metric != "euclidean":
            raise ConfigurationError(f"unsupported metric {self.metric!r}")

    @property
    def dim(self) -> int:
        return self.d_pattern + self.d_outcome


@dataclass(frozen=True)
class Artifact:
    """One exported learning signal: a point in the shared space.

    pattern_part carries the strategy row that was used; outcome_part is
    the task-type one-hot followed by the achieved-loss scalar. node_tag
    is a round-scoped pseudonym, not a stable identity.
    """

    pattern_part: np.ndarray
    outcome_part: np.ndarray
    node_tag: str
    round: int
    confidence: float

    def __post_init__(self):
        object.__setattr__(self, "pattern_part",
                           _frozen_vector(self.pattern_part, "pattern_part"))
        object.__setattr__(self, "outcome_part",
                           _frozen_vector(self.outcome_part, "outcome_part"))
        if self.round < 0:
            raise ConfigurationError("round must be non-negative")
        if not (0.0 <= self.confidence <= 1.0):
            raise ConfigurationError("confidence must be in [0, 1]")

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.pattern_part, self.outcome_part])

    def task_type(self) -> int:
        """Decode the task type from the (possibly noised) one-hot block."""
        return int(np.argmax(self.outcome_part[:-1]))

    def to_json_dict(self) -> dict:
        # Field order is part of the wire format (transcript hashing).
        return {
            "round": self.round,
            "node_tag": self.node_tag,
            "pattern": [float(x) for x in self.pattern_part],
            "outcome": [float(x) for x in self.outcome_part],
            "confidence": float(self.confidence),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), separators=(",", ":"))

    @classmethod
    def from_json_dict(cls, d: dict) -> "Artifact":
        return cls(pattern_part=d["pattern"], outcome_part=d["outcome"],
                   node_tag=d["node_tag"], round=d["round"],
                   confidence=d["confidence"])

    @classmethod
    def from_json(cls, s: str) -> "Artifact":
        return cls.from_json_dict(json.loads(s))


@dataclass(frozen=True)
class CcfSnapshot:
    """The collective context field at one round: the tuple of artifacts."""

    round: int
    artifacts: tuple
    participant_set: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "artifacts", tuple(self.artifacts))
        object.__setattr__(self, "participant_set",
                           frozenset(self.participant_set))
        if len(self.artifacts) != len(self.participant_set):
            raise ConfigurationError(
                "participant set size must match artifact count")
        for a in self.artifacts:
            if a.round != self.round:
                raise ConfigurationError(
                    f"artifact from round {a.round} in round-{self.round} field")

    def __len__(self) -> int:
        return len(self.artifacts)


def distance(a: Artifact, b: Artifact) -> float:
    """Euclidean distance between two artifacts in the shared space."""
    va, vb = a.vector, b.vector
    if va.shape != vb.shape:
        raise ConfigurationError(
            f"artifact dimensions differ: {va.shape[0]} vs {vb.shape[0]}")
    return float(np.linalg.norm(va - vb))


def dispersion(snapshot: CcfSnapshot) -> float:
    """Average squared pairwise distance over ordered artifact pairs.

    Sum runs over ordered pairs i != j, normalised by n(n-1); each
    unordered pair is therefore counted twice, which cancels in the
    normaliser.
    """
    n = len(snapshot)
    if n < 2:
        raise DispersionUndefinedError(
            f"dispersion needs at least 2 artifacts, got {n}")
    dims = {a.vector.shape[0] for a in snapshot.artifacts}
    if len(dims) != 1:
        raise ConfigurationError("artifacts of mixed dimension in one field")
    x = np.stack([a.vector for a in snapshot.artifacts])
    return pairwise_sq_sum(x) / (n * (n - 1))


def learning_activity(snapshot: CcfSnapshot,
                      weight_fn: Optional[Callable[[Artifact], float]] = None
                      ) -> float:
    """Total signal volume this round: sum of per-artifact weights.

    Defaults to the artifact count (unit weight); pass e.g.
    ``lambda a: a.confidence`` for confidence-weighted activity.
    """
    if weight_fn is None:
        return float(len(snapshot.artifacts))
    total = 0.0
    for a in snapshot.artifacts:
        w = float(weight_fn(a))
        if w < 0:
            raise ConfigurationError("learning-activity weights must be >= 0")
        total += w
    return total
