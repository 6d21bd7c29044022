"""Carbon-adaptive activity scheduling.

A trace of per-slot carbon intensity drives a threshold policy: clean
slots admit synchronization (and consolidation), moderately clean slots
admit local learning, dirty slots are inference-only. Deferrable jobs
are then placed greedily, each on the cleanest eligible slot at or
before its deadline. Jobs are independent (no slot capacity), so the
greedy choice is per-job optimal and the plan's carbon never exceeds
the earliest-eligible baseline.

Scheduling decides when protocol rounds run, never what they compute:
round semantics are fixed by the round index, so any violation-free
plan leaves the learning trajectory untouched.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import ConfigurationError

TRACE_HEADER = ("timestamp_h", "carbon_gco2_per_kwh", "renewable_fraction")


class Mode(IntEnum):
    """Activity levels, ordered by how clean a slot they demand."""

    INFER_ONLY = 0
    LEARN = 1
    SYNC = 2
    CONSOLIDATE = 3


# kWh per node per slot of activity; inference is treated as free load.
DEFAULT_ENERGY_COST: Dict[Mode, float] = {
    Mode.INFER_ONLY: 0.0,
    Mode.LEARN: 0.6,
    Mode.SYNC: 1.0,
    Mode.CONSOLIDATE: 1.2,
}


@dataclass(frozen=True)
class Thresholds:
    """Carbon-intensity cutoffs; heavier work needs the stricter bound."""

    intensity_sync: float
    intensity_learn: float

    def __post_init__(self):
        if self.intensity_sync < 0 or self.intensity_learn < 0:
            raise ConfigurationError("thresholds must be non-negative")
        if self.intensity_learn < self.intensity_sync:
            raise ConfigurationError(
                "intensity_learn must be >= intensity_sync")


@dataclass(frozen=True)
class EnergyTrace:
    """Uniformly spaced carbon/renewable readings, one row per slot."""

    timestamps_h: Tuple[int, ...]
    carbon: Tuple[float, ...]
    renewable: Tuple[float, ...]

    def __post_init__(self):
        n = len(self.timestamps_h)
        if n == 0:
            raise ConfigurationError("trace must contain at least one slot")
        if not (len(self.carbon) == len(self.renewable) == n):
            raise ConfigurationError("trace column lengths differ")
        diffs = {self.timestamps_h[i + 1] - self.timestamps_h[i]
                 for i in range(n - 1)}
        if any(d <= 0 for d in diffs):
            raise ConfigurationError("timestamps must strictly increase")
        if len(diffs) > 1:
            raise ConfigurationError("timestamps must be uniformly spaced")
        if any(c < 0 for c in self.carbon):
            raise ConfigurationError("carbon intensity must be >= 0")
        if any(not (0.0 <= r <= 1.0) for r in self.renewable):
            raise ConfigurationError("renewable_fraction must be in [0, 1]")

    @property
    def n_slots(self) -> int:
        return len(self.timestamps_h)

    @property
    def resolution_h(self) -> int:
        if self.n_slots < 2:
            return 1
        return self.timestamps_h[1] - self.timestamps_h[0]

    @classmethod
    def flat(cls, n_slots: int, carbon: float = 0.0,
             renewable: float = 1.0) -> "EnergyTrace":
        return cls(timestamps_h=tuple(range(n_slots)),
                   carbon=(carbon,) * n_slots,
                   renewable=(renewable,) * n_slots)

    @classmethod
    def from_csv(cls, path) -> "EnergyTrace":
        path = Path(path)
        try:
            rows = list(csv.reader(path.open(newline="")))
        except OSError as e:
            raise ConfigurationError(f"cannot read trace {path}: {e}") from e
        if not rows or tuple(h.strip() for h in rows[0]) != TRACE_HEADER:
            raise ConfigurationError(
                f"trace {path}: header must be {','.join(TRACE_HEADER)}")
        ts, ci, rf = [], [], []
        for lineno, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ConfigurationError(
                    f"trace {path}:{lineno}: expected 3 columns")
            try:
                ts.append(int(row[0]))
                ci.append(float(row[1]))
                rf.append(float(row[2]))
            except ValueError as e:
                raise ConfigurationError(
                    f"trace {path}:{lineno}: {e}") from e
        return cls(timestamps_h=tuple(ts), carbon=tuple(ci),
                   renewable=tuple(rf))

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as f:
            w = csv.writer(f)
            w.writerow(TRACE_HEADER)
            for t, c, r in zip(self.timestamps_h, self.carbon,
                               self.renewable):
                w.writerow([t, repr(c), repr(r)])


def classify_slot(carbon_intensity: float, thresholds: Thresholds) -> Mode:
    """Highest activity level a slot admits. Monotone in intensity."""
    if carbon_intensity <= thresholds.intensity_sync:
        return Mode.SYNC
    if carbon_intensity <= thresholds.intensity_learn:
        return Mode.LEARN
    return Mode.INFER_ONLY


def _required_capability(mode: Mode) -> Mode:
    # Consolidation rides on a sync round, so it needs a SYNC-grade slot.
    return Mode.SYNC if mode == Mode.CONSOLIDATE else mode


@dataclass(frozen=True)
class Job:
    """One deferrable unit of protocol work with a latest allowed slot."""

    job_id: str
    mode: Mode
    deadline_slot: int


@dataclass(frozen=True)
class DeadlineViolation:
    job_id: str
    deadline_slot: int
    reason: str


@dataclass
class ActivityPlan:
    """Slot modes plus the job placement that produced them.

    assignments maps job_id to a slot index, or None when the job had no
    eligible slot by its deadline (then a violation is recorded; the
    protocol still runs the job, the plan just cannot place it cleanly).
    """

    slot_modes: List[Mode]
    jobs: List[Job]
    assignments: Dict[str, Optional[int]]
    violations: List[DeadlineViolation]
    energy_cost: Dict[Mode, float]
    n_nodes: int

    @property
    def n_slots(self) -> int:
        return len(self.slot_modes)


def _eligible_slots(trace: EnergyTrace, thresholds: Thresholds, job: Job
                    ) -> List[int]:
    need = _required_capability(job.mode)
    return [s for s in range(job.deadline_slot + 1)
            if classify_slot(trace.carbon[s], thresholds) >= need]


def _build_plan(trace: EnergyTrace, jobs: Sequence[Job],
                thresholds: Thresholds, energy_cost: Dict[Mode, float],
                n_nodes: int, pick) -> ActivityPlan:
    for job in jobs:
        if not (0 <= job.deadline_slot < trace.n_slots):
            raise ConfigurationError(
                f"job {job.job_id}: deadline outside trace horizon")
    assignments: Dict[str, Optional[int]] = {}
    violations: List[DeadlineViolation] = []
    modes = [Mode.INFER_ONLY] * trace.n_slots
    for job in jobs:
        eligible = _eligible_slots(trace, thresholds, job)
        if not eligible:
            assignments[job.job_id] = None
            violations.append(DeadlineViolation(
                job_id=job.job_id, deadline_slot=job.deadline_slot,
                reason="no eligible slot at or before deadline"))
            continue
        slot = pick(eligible, trace)
        assignments[job.job_id] = slot
        if job.mode > modes[slot]:
            modes[slot] = job.mode
    return ActivityPlan(slot_modes=modes, jobs=list(jobs),
                        assignments=assignments, violations=violations,
                        energy_cost=dict(energy_cost), n_nodes=n_nodes)


def schedule(trace: EnergyTrace, jobs: Sequence[Job],
             thresholds: Thresholds,
             energy_cost: Optional[Dict[Mode, float]] = None,
             n_nodes: int = 1) -> ActivityPlan:
    """Greedy-by-cleanest placement; ties go to the earlier timestamp."""
    cost = dict(DEFAULT_ENERGY_COST if energy_cost is None else energy_cost)

    def cleanest(eligible: List[int], tr: EnergyTrace) -> int:
        return min(eligible, key=lambda s: (tr.carbon[s], tr.timestamps_h[s]))

    return _build_plan(trace, jobs, thresholds, cost, n_nodes, cleanest)


def baseline_earliest(trace: EnergyTrace, jobs: Sequence[Job],
                      thresholds: Thresholds,
                      energy_cost: Optional[Dict[Mode, float]] = None,
                      n_nodes: int = 1) -> ActivityPlan:
    """Naive reference: every job at its earliest eligible slot."""
    cost = dict(DEFAULT_ENERGY_COST if energy_cost is None else energy_cost)

    def earliest(eligible: List[int], tr: EnergyTrace) -> int:
        return eligible[0]

    return _build_plan(trace, jobs, thresholds, cost, n_nodes, earliest)


def plan_carbon(plan: ActivityPlan, trace: EnergyTrace) -> float:
    """Total grams CO2: per-job activity plus baseline inference load.

    Job terms add independently (several jobs may share a slot); every
    slot additionally carries the inference cost, which defaults to 0.
    """
    if plan.n_slots != trace.n_slots:
        raise ConfigurationError("plan and trace horizons differ")
    total = 0.0
    infer_kwh = plan.energy_cost.get(Mode.INFER_ONLY, 0.0)
    for s in range(trace.n_slots):
        total += infer_kwh * trace.carbon[s] * plan.n_nodes
    by_id = {j.job_id: j for j in plan.jobs}
    for job_id, slot in plan.assignments.items():
        if slot is None:
            continue
        job = by_id[job_id]
        total += plan.energy_cost[job.mode] * trace.carbon[slot] \
            * plan.n_nodes
    return total
