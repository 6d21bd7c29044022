"""Per-node state machine.

A node owns private state (interaction history, randomness), a pattern
object (per-task-type strategy rows), and the operations of one protocol
round: solve a task, validate the raw signal by deterministic replay,
project the collective field into an own view (excluding itself), and
update the pattern by blending toward collective centroids plus a local
gradient step.

Raw signals never leave the node; only the privacy projection of an
accepted signal is exported.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigurationError
from .spaces import CcfSnapshot
from .tasks import Outcome, Task, gradient_step, quadratic_loss, solve

REJECT_INCONSISTENT = "inconsistent_outcome"
REJECT_NO_IMPROVEMENT = "no_improvement"


@dataclass(frozen=True)
class PatternObject:
    """Per-type strategy rows plus the node's update parameters."""

    per_type_strategies: np.ndarray   # (k_types, d_pattern)
    local_step_size: float
    blend_rate: float                 # weight of the collective term

    def __post_init__(self):
        s = np.asarray(self.per_type_strategies, dtype=np.float64).copy()
        if s.ndim != 2:
            raise ConfigurationError("strategies must be a (k_types, d) matrix")
        if not np.all(np.isfinite(s)):
            raise ConfigurationError("strategy entries must be finite")
        s.flags.writeable = False
        object.__setattr__(self, "per_type_strategies", s)
        if self.local_step_size < 0:
            raise ConfigurationError("local_step_size must be >= 0")
        if not (0.0 <= self.blend_rate <= 1.0):
            raise ConfigurationError("blend_rate must be in [0, 1]")

    @property
    def k_types(self) -> int:
        return self.per_type_strategies.shape[0]

    @property
    def d_pattern(self) -> int:
        return self.per_type_strategies.shape[1]


@dataclass(frozen=True)
class CollectiveView:
    """A node's self-excluding projection of the field: per-type centroids."""

    per_type_centroids: np.ndarray    # (k_types, d_pattern)
    support_counts: np.ndarray        # (k_types,) ints; 0 marks absent rows
    source_round: int

    def __post_init__(self):
        c = np.asarray(self.per_type_centroids, dtype=np.float64).copy()
        n = np.asarray(self.support_counts, dtype=np.int64).copy()
        if c.shape[0] != n.shape[0]:
            raise ConfigurationError("centroid/support length mismatch")
        c.flags.writeable = False
        n.flags.writeable = False
        object.__setattr__(self, "per_type_centroids", c)
        object.__setattr__(self, "support_counts", n)


class PrivateState:
    """Node-private data: never serialized into any artifact or message."""

    def __init__(self, node_id: int, replay_budget: int,
                 rng_stream: np.random.Generator):
        if replay_budget < 1:
            raise ConfigurationError("replay_budget must be positive")
        self.node_id = node_id
        self.replay_budget = replay_budget
        self.interaction_log: deque = deque(maxlen=replay_budget)
        self.rng_stream = rng_stream

    def record(self, task: Task, outcome: Outcome) -> None:
        self.interaction_log.append((task, outcome))

    def latest_task_of_type(self, task_type: int) -> Optional[Task]:
        for task, _ in reversed(self.interaction_log):
            if task.task_type == task_type:
                return task
        return None


@dataclass(frozen=True)
class RawSignal:
    """The unprojected triple a round of local solving produces.

    Stays inside the node: only its privacy projection may be exported.
    """

    node_id: int
    round: int
    task: Task
    outcome: Outcome
    pattern_row: np.ndarray   # per-type strategy row snapshot, pre-step

    def __post_init__(self):
        r = np.asarray(self.pattern_row, dtype=np.float64).copy()
        r.flags.writeable = False
        object.__setattr__(self, "pattern_row", r)


@dataclass(frozen=True)
class ValidationResult:
    accepted: bool
    confidence: float
    reason: Optional[str] = None


class Node:
    """One participant: private state + pattern + the round operations."""

    def __init__(self, node_id: int, pattern: PatternObject,
                 private_state: PrivateState, tau_val: float = 0.1):
        if tau_val <= 0:
            raise ConfigurationError("tau_val must be positive")
        self.node_id = node_id
        self.pattern = pattern
        self.private = private_state
        self.tau_val = tau_val
        self.round = 0
        self.round_tag = ""   # round-scoped pseudonym, assigned by the engine

    def generate_signal(self, task: Task,
                        rng: Optional[np.random.Generator] = None
                        ) -> RawSignal:
        """Solve the task, log the interaction, emit the raw triple."""
        outcome = solve(task, self.pattern, self.private,
                        rng if rng is not None else self.private.rng_stream)
        self.private.record(task, outcome)
        row = self.pattern.per_type_strategies[task.task_type]
        return RawSignal(node_id=self.node_id, round=self.round, task=task,
                         outcome=outcome, pattern_row=row)

    def validate_signal(self, raw: RawSignal) -> ValidationResult:
        """Replay the outcome noise-free and score the agreement.

        Accepts iff the replayed step improves the loss and the reported
        achieved loss sits within tau_val of the replayed one; confidence
        decays exponentially with the deviation.
        """
        p = raw.outcome.strategy_used
        if p.shape != raw.pattern_row.shape or not np.array_equal(
                p, raw.pattern_row):
            return ValidationResult(False, 0.0, REJECT_INCONSISTENT)
        target = raw.task.target
        loss_before = quadratic_loss(p, target)
        stepped = gradient_step(p, target, self.pattern.local_step_size)
        replayed = quadratic_loss(stepped, target)
        if loss_before < replayed:
            return ValidationResult(False, 0.0, REJECT_NO_IMPROVEMENT)
        deviation = abs(raw.outcome.achieved_loss - replayed)
        if deviation > self.tau_val:
            return ValidationResult(False, 0.0, REJECT_INCONSISTENT)
        return ValidationResult(True, math.exp(-deviation / self.tau_val))

    def project_ccf(self, snapshot: CcfSnapshot,
                    weights: Sequence[float]) -> CollectiveView:
        """Self-excluding per-type weighted centroids of foreign artifacts."""
        if len(weights) != len(snapshot.artifacts):
            raise ConfigurationError("weights not aligned with snapshot")
        k = self.pattern.k_types
        d = self.pattern.d_pattern
        sums = np.zeros((k, d))
        wsum = np.zeros(k)
        counts = np.zeros(k, dtype=np.int64)
        for artifact, w in zip(snapshot.artifacts, weights):
            if artifact.node_tag == self.round_tag or w <= 0:
                continue
            t = artifact.task_type()
            if t >= k or artifact.pattern_part.shape[0] != d:
                raise ConfigurationError("artifact incompatible with pattern")
            sums[t] += w * artifact.pattern_part
            wsum[t] += w
            counts[t] += 1
        centroids = np.zeros((k, d))
        present = wsum > 0
        centroids[present] = sums[present] / wsum[present, None]
        return CollectiveView(per_type_centroids=centroids,
                              support_counts=counts,
                              source_round=snapshot.round)

    def update_pattern(self, view: Optional[CollectiveView]) -> PatternObject:
        """Blend supported rows toward collective centroids, then take one
        local gradient step per type on the most recent logged task of that
        type. Pass ``None`` for a purely local update."""
        if view is not None and view.source_round != self.round:
            raise ConfigurationError(
                f"stale view: round {view.source_round} != {self.round}")
        eta = self.pattern.blend_rate
        rows = self.pattern.per_type_strategies.copy()
        for t in range(self.pattern.k_types):
            if view is not None and view.support_counts[t] > 0 and eta > 0:
                rows[t] = (1.0 - eta) * rows[t] \
                    + eta * view.per_type_centroids[t]
            task = self.private.latest_task_of_type(t)
            if task is not None:
                rows[t] = gradient_step(rows[t], task.target,
                                        self.pattern.local_step_size)
        return PatternObject(per_type_strategies=rows,
                             local_step_size=self.pattern.local_step_size,
                             blend_rate=eta)
