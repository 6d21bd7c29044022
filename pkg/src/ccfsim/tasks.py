"""Synthetic quadratic task family.

Tasks are hidden optima of quadratic objectives, drawn from per-type
Gaussian clusters whose centers are fixed by the run seed. Solving a task
means one gradient step of the node's per-type strategy row on
``loss(p) = ||p - target||**2``; the reported loss carries additive
Gaussian observation noise (self-evaluation is unreliable), which is what
the validation gate later has to catch.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class Task:
    task_type: int
    target: np.ndarray
    noise_std: float
    task_id: int

    def __post_init__(self):
        t = np.asarray(self.target, dtype=np.float64).copy()
        t.flags.writeable = False
        object.__setattr__(self, "target", t)
        if self.noise_std < 0:
            raise ConfigurationError("noise_std must be non-negative")
        if self.task_type < 0:
            raise ConfigurationError("task_type must be non-negative")


@dataclass(frozen=True)
class Outcome:
    task_id: int
    achieved_loss: float
    loss_before: float
    strategy_used: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.strategy_used, dtype=np.float64).copy()
        s.flags.writeable = False
        object.__setattr__(self, "strategy_used", s)
        if not np.isfinite(self.achieved_loss):
            raise ConfigurationError("achieved_loss must be finite")
        if self.loss_before < 0:
            raise ConfigurationError("loss_before must be non-negative")


@dataclass(frozen=True)
class TaskFamily:
    """Per-type cluster centers plus sampling parameters, fixed per run."""

    centers: np.ndarray            # (k_types, d_pattern)
    cluster_std: float
    noise_std: float

    def __post_init__(self):
        c = np.asarray(self.centers, dtype=np.float64).copy()
        if c.ndim != 2:
            raise ConfigurationError("centers must be a (k_types, d) matrix")
        c.flags.writeable = False
        object.__setattr__(self, "centers", c)
        if self.cluster_std < 0 or self.noise_std < 0:
            raise ConfigurationError("stds must be non-negative")

    @property
    def k_types(self) -> int:
        return self.centers.shape[0]

    @property
    def d_pattern(self) -> int:
        return self.centers.shape[1]

    @classmethod
    def from_seed(cls, seed: int, k_types: int, d_pattern: int,
                  center_scale: float = 0.6, cluster_std: float = 0.3,
                  noise_std: float = 0.02) -> "TaskFamily":
        rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence((seed, 0xFA, k_types, d_pattern))))
        centers = rng.normal(0.0, center_scale, size=(k_types, d_pattern))
        return cls(centers=centers, cluster_std=cluster_std,
                   noise_std=noise_std)


def _check_type_mix(type_mix: Sequence[float], k_types: int) -> np.ndarray:
    mix = np.asarray(type_mix, dtype=np.float64)
    if mix.ndim != 1 or mix.shape[0] != k_types:
        raise ConfigurationError(
            f"type_mix must have {k_types} entries, got shape {mix.shape}")
    if np.any(mix < 0) or abs(float(mix.sum()) - 1.0) > 1e-9:
        raise ConfigurationError("type_mix must be a probability vector")
    return mix


def sample_task(family: TaskFamily, rng: np.random.Generator,
                type_mix: Optional[Sequence[float]] = None,
                task_id: int = 0) -> Task:
    """Draw a task: type from type_mix, target from the type's cluster."""
    if type_mix is None:
        mix = np.full(family.k_types, 1.0 / family.k_types)
    else:
        mix = _check_type_mix(type_mix, family.k_types)
    task_type = int(rng.choice(family.k_types, p=mix))
    target = family.centers[task_type] + rng.normal(
        0.0, family.cluster_std, size=family.d_pattern)
    return Task(task_type=task_type, target=target,
                noise_std=family.noise_std, task_id=task_id)


def quadratic_loss(p: np.ndarray, target: np.ndarray) -> float:
    d = np.asarray(p, dtype=np.float64) - np.asarray(target, dtype=np.float64)
    return float(d @ d)


def gradient_step(p: np.ndarray, target: np.ndarray, step_size: float
                  ) -> np.ndarray:
    """One exact descent step: p - step * 2 (p - target)."""
    p = np.asarray(p, dtype=np.float64)
    return p - step_size * 2.0 * (p - np.asarray(target, dtype=np.float64))


def solve(task: Task, pattern, private_state=None,
          rng: Optional[np.random.Generator] = None) -> Outcome:
    """One noisy-gradient step of the per-type strategy row on the task.

    Pure: neither the pattern nor the task is mutated; the stepped row is
    reported through the outcome only. The private state carries nothing
    the quadratic family needs beyond the explicit rng, but stays in the
    signature because callers hold one.
    """
    row = np.asarray(pattern.per_type_strategies[task.task_type],
                     dtype=np.float64)
    if row.shape != task.target.shape:
        raise ConfigurationError(
            f"strategy dim {row.shape[0]} != target dim {task.target.shape[0]}")
    loss_before = quadratic_loss(row, task.target)
    stepped = gradient_step(row, task.target, pattern.local_step_size)
    loss_after = quadratic_loss(stepped, task.target)
    noise = 0.0
    if task.noise_std > 0:
        if rng is None:
            raise ConfigurationError("rng required when noise_std > 0")
        noise = float(rng.normal(0.0, task.noise_std))
    achieved = max(0.0, loss_after + noise)
    return Outcome(task_id=task.task_id, achieved_loss=achieved,
                   loss_before=loss_before, strategy_used=row.copy())


def task_distance(a: Task, b: Task) -> float:
    """Metric on the task space: euclidean distance between targets."""
    if a.target.shape != b.target.shape:
        raise ConfigurationError("task dimension mismatch")
    return float(np.linalg.norm(a.target - b.target))
