"""Run configuration: nested sections, JSON files, dotted overrides.

A RunConfig collects every tunable named by the other modules, grouped
into sections. Loading is strict: unknown sections or keys fail with a
diagnostic naming the offending key, and cross-field constraints are
checked before any simulation state is built. load -> serialize -> load
is the identity on effective parameters.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from .errors import ConfigurationError
from .privacy import DpParams
from .scheduler import Mode, Thresholds

ADVERSARY_BEHAVIORS = ("NOISE_INJECTOR", "LOSS_LIAR", "COLLUDING_BOOSTER")
CHURN_OPS = ("join", "leave")
GRANULARITIES = ("per-round", "summary")


@dataclass
class SpaceSection:
    d_pattern: int = 8
    clip_radius: float = 5.0


@dataclass
class TaskSection:
    k_types: int = 4
    center_scale: float = 0.6
    cluster_std: float = 0.3
    noise_std: float = 0.02
    type_mix: Optional[List[float]] = None


@dataclass
class NodeSection:
    step_size: float = 0.05
    blend_eta: float = 0.2
    tau_val: float = 0.1
    replay_budget: int = 16


@dataclass
class CcfSection:
    theta_conf: float = 0.3
    beta: float = 0.5
    alpha: float = 0.1
    r0: float = 0.5
    rho: float = 1.25
    k_mad: float = 5.0
    warmup: int = 5
    gamma_cons: float = 0.3


@dataclass
class DpSection:
    epsilon: float = 160.0
    delta: float = 1e-5
    rounds_budget: int = 100000
    sigma: Optional[float] = None   # derived from (epsilon, delta) if None


@dataclass
class SchedulerSection:
    enabled: bool = False
    trace_path: Optional[str] = None   # None selects the bundled trace
    intensity_sync: float = 200.0
    intensity_learn: float = 400.0
    cost_infer: float = 0.0
    cost_learn: float = 0.6
    cost_sync: float = 1.0
    cost_consolidate: float = 1.2


@dataclass
class ScenarioSection:
    n_nodes: int = 10
    rounds: int = 60
    participation_prob: float = 1.0
    sync_every: int = 1
    consolidate_every: int = 25
    seed: int = 12345
    # [node_id, behavior, onset_round]
    adversaries: List[List[Any]] = field(default_factory=list)
    # [round, "join"|"leave", node_id]
    churn: List[List[Any]] = field(default_factory=list)
    # [node_id, task_type]
    experts: List[List[int]] = field(default_factory=list)


@dataclass
class EngineSection:
    broadcast_u: bool = True
    node_views: bool = True
    metrics_granularity: str = "per-round"
    output_path: Optional[str] = None


_SECTIONS = {
    "space": SpaceSection,
    "tasks": TaskSection,
    "node": NodeSection,
    "ccf": CcfSection,
    "dp": DpSection,
    "scheduler": SchedulerSection,
    "scenario": ScenarioSection,
    "engine": EngineSection,
}


@dataclass
class RunConfig:
    space: SpaceSection = field(default_factory=SpaceSection)
    tasks: TaskSection = field(default_factory=TaskSection)
    node: NodeSection = field(default_factory=NodeSection)
    ccf: CcfSection = field(default_factory=CcfSection)
    dp: DpSection = field(default_factory=DpSection)
    scheduler: SchedulerSection = field(default_factory=SchedulerSection)
    scenario: ScenarioSection = field(default_factory=ScenarioSection)
    engine: EngineSection = field(default_factory=EngineSection)

    @property
    def d_outcome(self) -> int:
        # task-type one-hot plus the achieved-loss scalar
        return self.tasks.k_types + 1

    @property
    def artifact_dim(self) -> int:
        return self.space.d_pattern + self.d_outcome

    def dp_params(self) -> DpParams:
        sigma = -1.0 if self.dp.sigma is None else self.dp.sigma
        return DpParams(epsilon=self.dp.epsilon, delta=self.dp.delta,
                        clip_radius=self.space.clip_radius,
                        rounds_budget=self.dp.rounds_budget, sigma=sigma)

    def thresholds(self) -> Thresholds:
        return Thresholds(intensity_sync=self.scheduler.intensity_sync,
                          intensity_learn=self.scheduler.intensity_learn)

    def energy_cost(self) -> Dict[Mode, float]:
        s = self.scheduler
        return {Mode.INFER_ONLY: s.cost_infer, Mode.LEARN: s.cost_learn,
                Mode.SYNC: s.cost_sync, Mode.CONSOLIDATE: s.cost_consolidate}

    def validate(self) -> "RunConfig":
        sc = self.scenario
        if self.space.d_pattern < 1:
            raise ConfigurationError("space.d_pattern must be positive")
        if self.space.clip_radius <= 0:
            raise ConfigurationError("space.clip_radius must be positive")
        if self.tasks.k_types < 1:
            raise ConfigurationError("tasks.k_types must be positive")
        if self.tasks.cluster_std < 0 or self.tasks.noise_std < 0:
            raise ConfigurationError("tasks stds must be non-negative")
        if self.node.step_size < 0:
            raise ConfigurationError("node.step_size must be >= 0")
        if not (0.0 <= self.node.blend_eta <= 1.0):
            raise ConfigurationError("node.blend_eta must be in [0, 1]")
        if self.node.tau_val <= 0:
            raise ConfigurationError("node.tau_val must be positive")
        if not (0.0 <= self.ccf.theta_conf <= 1.0):
            raise ConfigurationError("ccf.theta_conf must be in [0, 1]")
        if not (0.0 <= self.ccf.beta <= 1.0):
            raise ConfigurationError("ccf.beta must be in [0, 1]")
        if self.ccf.k_mad < 0:
            raise ConfigurationError("ccf.k_mad must be non-negative")
        if self.ccf.warmup < 0:
            raise ConfigurationError("ccf.warmup must be non-negative")
        if not (0.0 <= self.ccf.gamma_cons <= 1.0):
            raise ConfigurationError("ccf.gamma_cons must be in [0, 1]")
        if sc.n_nodes < 1:
            raise ConfigurationError("scenario.n_nodes must be positive")
        if sc.rounds < 0:
            raise ConfigurationError("scenario.rounds must be >= 0")
        if not (0.0 < sc.participation_prob <= 1.0):
            raise ConfigurationError(
                "scenario.participation_prob must be in (0, 1]")
        if sc.sync_every < 1:
            raise ConfigurationError("scenario.sync_every must be positive")
        if sc.consolidate_every < 1:
            raise ConfigurationError(
                "scenario.consolidate_every must be positive")
        for entry in sc.adversaries:
            if len(entry) != 3:
                raise ConfigurationError(
                    "scenario.adversaries entries are [id, behavior, onset]")
            nid, behavior, onset = entry
            if not (0 <= int(nid) < sc.n_nodes):
                raise ConfigurationError(f"adversary id {nid} out of range")
            if behavior not in ADVERSARY_BEHAVIORS:
                raise ConfigurationError(
                    f"unknown adversary behavior {behavior!r}")
            if int(onset) < 0:
                raise ConfigurationError("adversary onset must be >= 0")
        for entry in sc.churn:
            if len(entry) != 3 or entry[1] not in CHURN_OPS:
                raise ConfigurationError(
                    "scenario.churn entries are [round, 'join'|'leave', id]")
            if not (0 <= int(entry[2]) < sc.n_nodes):
                raise ConfigurationError(
                    f"churn node id {entry[2]} out of range")
        for entry in sc.experts:
            if len(entry) != 2:
                raise ConfigurationError(
                    "scenario.experts entries are [node_id, task_type]")
            if not (0 <= int(entry[0]) < sc.n_nodes):
                raise ConfigurationError(
                    f"expert id {entry[0]} out of range")
            if not (0 <= int(entry[1]) < self.tasks.k_types):
                raise ConfigurationError(
                    f"expert task type {entry[1]} out of range")
        if self.engine.metrics_granularity not in GRANULARITIES:
            raise ConfigurationError(
                "engine.metrics_granularity must be per-round or summary")
        if self.tasks.type_mix is not None \
                and len(self.tasks.type_mix) != self.tasks.k_types:
            raise ConfigurationError(
                "tasks.type_mix length must equal tasks.k_types")
        # constructor-enforced constraints surface here, before round 0
        self.dp_params()
        self.thresholds()
        return self

    def to_dict(self) -> Dict[str, Any]:
        return {name: dataclasses.asdict(getattr(self, name))
                for name in _SECTIONS}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigurationError("config root must be an object")
        cfg = cls()
        for section_name, payload in data.items():
            if section_name not in _SECTIONS:
                raise ConfigurationError(
                    f"unknown config section {section_name!r}")
            if not isinstance(payload, dict):
                raise ConfigurationError(
                    f"section {section_name!r} must be an object")
            section = getattr(cfg, section_name)
            known = {f.name for f in dataclasses.fields(section)}
            for key, value in payload.items():
                if key not in known:
                    raise ConfigurationError(
                        f"unknown config key {section_name}.{key}")
                setattr(section, key, value)
        return cfg

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except OSError as e:
            raise ConfigurationError(f"cannot read config {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"config {path} is not valid JSON: {e}"
                                     ) from e
        return cls.from_dict(data)

    def to_file(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    def apply_overrides(self, overrides: List[str]) -> "RunConfig":
        """Dotted-path assignments, e.g. ccf.beta=0 or scenario.seed=7.

        Values parse as JSON literals, falling back to plain strings.
        """
        for item in overrides:
            if "=" not in item:
                raise ConfigurationError(
                    f"override {item!r} must be section.key=value")
            dotted, raw = item.split("=", 1)
            parts = dotted.strip().split(".")
            if len(parts) != 2:
                raise ConfigurationError(
                    f"override path {dotted!r} must be section.key")
            section_name, key = parts
            if section_name not in _SECTIONS:
                raise ConfigurationError(
                    f"unknown config section {section_name!r}")
            section = getattr(self, section_name)
            if key not in {f.name for f in dataclasses.fields(section)}:
                raise ConfigurationError(
                    f"unknown config key {section_name}.{key}")
            try:
                value = json.loads(raw)
            except json.JSONDecodeError:
                value = raw
            setattr(section, key, value)
        return self
