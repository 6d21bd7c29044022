"""Deterministic round-based simulation engine.

One logical aggregator, n nodes, synchronous rounds. Each executed round
has a fixed semantic determined by its index: every sync_every-th round
is a sync round (full artifact exchange through the masked channel and
the field pipeline), every consolidate_every-th sync round additionally
consolidates, and the rounds in between are local learning only. The
carbon scheduler assigns rounds to trace slots but never changes what a
round computes, so the learning trajectory depends only on the seed and
the round sequence.

All randomness flows from per-purpose streams keyed by
(seed, domain, node_id, executed round index), which makes transcripts
bitwise reproducible and independent of slot timing.

The transcript is a list of JSON-lines records closed by a content hash;
it doubles as the substrate for the privacy audit: every private float
(task targets, raw strategy rows, raw losses) is recorded in non-message
"private" lines, and the audit asserts that none of their string forms
ever appears inside a message.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from .config import RunConfig
from .errors import (CcfSimError, ConfigurationError, IntegrityError,
                     PrivacyBudgetExhausted, RoundAborted)
from .field import (ImprovementSignal, ReputationLedger, detect_anomalies,
                    filter_and_weight, form_field, improve, update_reputation)
from .node import CollectiveView, Node, PatternObject, PrivateState, RawSignal
from .privacy import (DpParams, aggregate_masked, derive_pairwise_seeds,
                      make_masks, mask_share, proj, quantize)
from .scheduler import (EnergyTrace, Job, Mode, baseline_earliest,
                        plan_carbon, schedule)
from .spaces import CcfSnapshot, dispersion
from .tasks import Outcome, Task, TaskFamily, quadratic_loss, sample_task

NOISE_INJECTOR = "NOISE_INJECTOR"
LOSS_LIAR = "LOSS_LIAR"
COLLUDING_BOOSTER = "COLLUDING_BOOSTER"

# stream domains: one per purpose, never shared
_D_PART = 1    # participation draws
_D_TASK = 2    # task sampling
_D_SOLVE = 3   # observation noise in solve
_D_DP = 4      # privacy projection noise
_D_ADV = 5     # adversary fabrication


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(
        np.random.SeedSequence((seed,) + key)))


def node_tag(seed: int, node_id: int, round_no: int) -> str:
    """Round-scoped pseudonym: stable within a round, unlinkable across."""
    return hashlib.sha256(
        f"tag|{seed}|{node_id}|{round_no}".encode()).hexdigest()[:16]


def apply_adversary(behavior: Optional[str], raw: RawSignal,
                    rng: np.random.Generator, clip_radius: float,
                    shared_vector: Optional[np.ndarray] = None) -> RawSignal:
    """Tamper a raw signal according to the assigned behavior.

    NOISE_INJECTOR and COLLUDING_BOOSTER fabricate the whole reasoning
    event around a bogus strategy row, claiming a task whose target is
    that row: local replay validation only checks internal consistency,
    so the artifact reaches the field at full clip radius and the
    outlier rules must catch it there. LOSS_LIAR keeps the honest task
    and row but reports a zero loss, which replay exposes.
    """
    if behavior is None:
        return raw
    task = raw.task
    if behavior == LOSS_LIAR:
        fake_outcome = Outcome(task_id=raw.outcome.task_id,
                               achieved_loss=0.0,
                               loss_before=raw.outcome.loss_before,
                               strategy_used=raw.outcome.strategy_used)
        return RawSignal(node_id=raw.node_id, round=raw.round, task=task,
                         outcome=fake_outcome, pattern_row=raw.pattern_row)
    if behavior == NOISE_INJECTOR:
        fake_row = rng.uniform(-10.0 * clip_radius, 10.0 * clip_radius,
                               size=raw.pattern_row.shape[0])
    elif behavior == COLLUDING_BOOSTER:
        if shared_vector is None:
            raise ConfigurationError("collusion requires a shared vector")
        fake_row = np.asarray(shared_vector, dtype=np.float64)
    else:
        raise ConfigurationError(f"unknown adversary behavior {behavior!r}")
    fake_task = Task(task_type=task.task_type, target=fake_row,
                     noise_std=0.0, task_id=task.task_id)
    fake_outcome = Outcome(task_id=raw.outcome.task_id, achieved_loss=0.0,
                           loss_before=0.0, strategy_used=fake_row)
    return RawSignal(node_id=raw.node_id, round=raw.round, task=fake_task,
                     outcome=fake_outcome, pattern_row=fake_row)


def consolidate(window: Sequence[Tuple[ImprovementSignal, float]],
                base: PatternObject) -> PatternObject:
    """Dispersion-weighted mean of the window's priors as the new base.

    Each window entry is (signal, dispersion of its round); zero total
    dispersion degrades to an unweighted mean. Types never present in
    the window keep the old base row. Empty window returns base as-is.
    """
    if not window:
        return base
    rows = base.per_type_strategies.copy()
    k = base.k_types
    weights = [max(0.0, w) for _, w in window]
    if sum(weights) == 0.0:
        weights = [1.0] * len(window)
    for t in range(k):
        num = np.zeros(base.d_pattern)
        den = 0.0
        for (sig, _), w in zip(window, weights):
            if sig.present[t]:
                num += w * sig.per_type_priors[t]
                den += w
        if den > 0:
            rows[t] = num / den
    return PatternObject(per_type_strategies=rows,
                         local_step_size=base.local_step_size,
                         blend_rate=base.blend_rate)


def _json_line(obj: Dict[str, Any]) -> str:
    return json.dumps(obj, separators=(",", ":"))


def compute_content_hash(lines: Sequence[Dict[str, Any]]) -> str:
    h = hashlib.sha256()
    for line in lines:
        h.update((_json_line(line) + "\n").encode())
    return h.hexdigest()


@dataclass
class Transcript:
    """Append-only run record; the final line carries the content hash."""

    lines: List[Dict[str, Any]] = field(default_factory=list)
    content_hash: str = ""

    def seal(self) -> str:
        self.content_hash = compute_content_hash(self.lines)
        return self.content_hash

    def serialize(self) -> str:
        out = [_json_line(l) for l in self.lines]
        out.append(_json_line({"kind": "hash",
                               "content_hash": self.content_hash}))
        return "\n".join(out) + "\n"

    def write(self, path) -> None:
        Path(path).write_text(self.serialize())

    @classmethod
    def read(cls, path) -> "Transcript":
        lines = []
        content_hash = ""
        for raw in Path(path).read_text().splitlines():
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as e:
                raise IntegrityError(f"unparsable transcript line: {e}") from e
            if obj.get("kind") == "hash":
                content_hash = obj.get("content_hash", "")
            else:
                lines.append(obj)
        return cls(lines=lines, content_hash=content_hash)

    def verify(self) -> None:
        """Raise IntegrityError unless the recorded hash matches."""
        actual = compute_content_hash(self.lines)
        if actual != self.content_hash:
            raise IntegrityError(
                f"content hash mismatch: recorded {self.content_hash[:12]}, "
                f"recomputed {actual[:12]}")

    def audit_privacy(self, min_repr_len: int = 8) -> List[Dict[str, Any]]:
        """Scan every message for string forms of recorded private floats.

        JSON serializes a leaked float as the exact token repr() produces,
        so the audit extracts every numeric token from each round's
        messages and intersects with the recorded private values. Short
        reprs (e.g. "0.0") collide with honest payloads by chance and
        carry no identifying precision; only reprs of at least
        min_repr_len characters count. Returns one violation per
        (round, leaked value) pair; empty list means clean.
        """
        private: Set[str] = set()
        for line in self.lines:
            if line.get("kind") == "private":
                for r in line.get("reprs", []):
                    if len(r) >= min_repr_len:
                        private.add(r)
        number = re.compile(r"-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?")
        violations = []
        for line in self.lines:
            if line.get("kind") != "round":
                continue
            blob = _json_line(line.get("messages", {}))
            tokens = {t for t in number.findall(blob)
                      if len(t) >= min_repr_len}
            for leaked in sorted(tokens & private):
                violations.append({"round": line.get("round"),
                                   "value": leaked})
        return violations


@dataclass
class RunResult:
    """Everything a run produced, in memory; the transcript is canonical."""

    transcript: Transcript
    metrics: List[Dict[str, Any]]
    loss_mean: List[float]                 # per executed round
    loss_per_type: List[List[float]]       # per executed round, per type
    final_reputation: Dict[int, float]
    rejections: List[Dict[str, Any]]       # {round, node_id, reason}
    flagged: List[Tuple[int, List[int]]]   # (round, flagged node ids)
    dispersions: List[Optional[float]]
    signal: Optional[ImprovementSignal]
    plan_record: Dict[str, Any]
    carbon_g: float
    baseline_carbon_g: float
    executed_modes: List[str]
    aborted_rounds: List[int]
    abstentions: List[Dict[str, Any]]
    participants_per_round: List[int]
    content_hash: str


def _round_modes(rounds: int, sync_every: int, consolidate_every: int
                 ) -> List[Mode]:
    modes = []
    sync_seen = 0
    for r in range(rounds):
        if r % sync_every == 0:
            sync_seen += 1
            if sync_seen % consolidate_every == 0:
                modes.append(Mode.CONSOLIDATE)
            else:
                modes.append(Mode.SYNC)
        else:
            modes.append(Mode.LEARN)
    return modes


def _bundled_trace_path() -> Path:
    return Path(__file__).parent / "data" / "traces" / "sample_trace.csv"


def _deadlines(rounds: int, n_slots: int) -> List[int]:
    # evenly spaced windows over the horizon; last deadline is the last slot
    return [max(0, math.ceil((r + 1) * n_slots / rounds) - 1)
            for r in range(rounds)]


def _build_plan(config: RunConfig, modes: List[Mode]):
    sched = config.scheduler
    rounds = len(modes)
    if sched.enabled:
        path = Path(sched.trace_path) if sched.trace_path \
            else _bundled_trace_path()
        trace = EnergyTrace.from_csv(path)
        trace_name = str(path)
    else:
        trace = EnergyTrace.flat(max(rounds, 1), carbon=0.0, renewable=1.0)
        trace_name = "<flat>"
    deadlines = _deadlines(rounds, trace.n_slots) if rounds else []
    jobs = [Job(job_id=f"round-{r}", mode=modes[r], deadline_slot=deadlines[r])
            for r in range(rounds)]
    cost = config.energy_cost()
    thr = config.thresholds()
    plan = schedule(trace, jobs, thr, cost, config.scenario.n_nodes)
    base = baseline_earliest(trace, jobs, thr, cost, config.scenario.n_nodes)
    return trace, trace_name, plan, plan_carbon(plan, trace), \
        plan_carbon(base, trace)


def run(config: RunConfig, _leak_private: bool = False) -> RunResult:
    """Execute a scenario; deterministic in (config, seed)."""
    config.validate()
    sc = config.scenario
    seed = sc.seed
    k_types = config.tasks.k_types
    d_pattern = config.space.d_pattern
    clip = config.space.clip_radius

    family = TaskFamily.from_seed(seed, k_types, d_pattern,
                                  center_scale=config.tasks.center_scale,
                                  cluster_std=config.tasks.cluster_std,
                                  noise_std=config.tasks.noise_std)
    type_mix = config.tasks.type_mix

    modes = _round_modes(sc.rounds, sc.sync_every, sc.consolidate_every)
    trace, trace_name, plan, carbon_g, baseline_g = _build_plan(config, modes)

    # adversary/churn/expert wiring
    behavior_of: Dict[int, Tuple[str, int]] = {
        int(nid): (str(b), int(onset)) for nid, b, onset in sc.adversaries}
    joins: Dict[int, List[int]] = {}
    leaves: Dict[int, List[int]] = {}
    first_event: Dict[int, str] = {}
    for rnd, op, nid in sorted(sc.churn, key=lambda e: int(e[0])):
        rnd, nid = int(rnd), int(nid)
        (joins if op == "join" else leaves).setdefault(rnd, []).append(nid)
        first_event.setdefault(nid, str(op))
    # a node whose first churn event is a join starts outside the network
    joined_later = {nid for nid, op in first_event.items() if op == "join"}

    base_rows = np.zeros((k_types, d_pattern))
    base = PatternObject(per_type_strategies=base_rows,
                         local_step_size=config.node.step_size,
                         blend_rate=config.node.blend_eta)

    def fresh_node(nid: int, pattern_rows: np.ndarray) -> Node:
        state = PrivateState(nid, config.node.replay_budget,
                             _stream(seed, _D_SOLVE, nid, 0xFFFF))
        pat = PatternObject(per_type_strategies=pattern_rows,
                            local_step_size=config.node.step_size,
                            blend_rate=config.node.blend_eta)
        return Node(nid, pat, state, tau_val=config.node.tau_val)

    nodes: Dict[int, Node] = {}
    budgets: Dict[int, DpParams] = {}
    for nid in range(sc.n_nodes):
        if nid in joined_later:
            continue
        rows = base_rows.copy()
        nodes[nid] = fresh_node(nid, rows)
        budgets[nid] = config.dp_params()
    for nid, ttype in sc.experts:
        nid, ttype = int(nid), int(ttype)
        if nid in nodes:
            rows = nodes[nid].pattern.per_type_strategies.copy()
            rows[ttype] = family.centers[ttype]
            nodes[nid].pattern = PatternObject(
                per_type_strategies=rows,
                local_step_size=config.node.step_size,
                blend_rate=config.node.blend_eta)

    pairwise_seeds = derive_pairwise_seeds(seed, range(sc.n_nodes))
    shared_vec = _stream(seed, _D_ADV, 0xC0).uniform(
        -10.0 * clip, 10.0 * clip, size=d_pattern)

    ledger = ReputationLedger(alpha=config.ccf.alpha, r0=config.ccf.r0,
                              rho=config.ccf.rho)
    prev_signal: Optional[ImprovementSignal] = None
    window: List[Tuple[ImprovementSignal, float]] = []

    transcript = Transcript()
    transcript.lines.append({
        "kind": "header",
        "format_version": 1,
        "config": config.to_dict(),
        "artifact_dim": config.artifact_dim,
    })
    transcript.lines.append({
        "kind": "plan",
        "enabled": config.scheduler.enabled,
        "trace": trace_name,
        "n_slots": trace.n_slots,
        "slot_modes": [m.name for m in plan.slot_modes],
        "assignments": {k: v for k, v in sorted(plan.assignments.items())},
        "violations": [{"job_id": v.job_id, "deadline": v.deadline_slot,
                        "reason": v.reason} for v in plan.violations],
        "carbon_g": carbon_g,
        "baseline_carbon_g": baseline_g,
    })

    metrics: List[Dict[str, Any]] = []
    loss_mean: List[float] = []
    loss_per_type: List[List[float]] = []
    rejections: List[Dict[str, Any]] = []
    flagged_log: List[Tuple[int, List[int]]] = []
    dispersions: List[Optional[float]] = []
    aborted: List[int] = []
    abstentions: List[Dict[str, Any]] = []
    participants_per_round: List[int] = []

    for r in range(sc.rounds):
        mode = modes[r]
        # churn: joiners adopt the current base pattern, leavers run the
        # round up to mask setup and then vanish (dropout path)
        for nid in joins.get(r, []):
            if nid not in nodes:
                nodes[nid] = fresh_node(nid, base.per_type_strategies.copy())
                budgets[nid] = config.dp_params()
        leaving_now = [nid for nid in leaves.get(r, []) if nid in nodes]

        active_ids = sorted(nodes)
        draws = _stream(seed, _D_PART, r).random(len(active_ids))
        participants = [nid for nid, u in zip(active_ids, draws)
                        if u < sc.participation_prob]
        participants_per_round.append(len(participants))

        private_reprs: List[str] = []
        round_rejections: List[Dict[str, Any]] = []
        round_abstentions: List[int] = []
        artifacts_by_id: Dict[int, Any] = {}
        raw_rows_dbg: List[List[float]] = []

        for nid in participants:
            node = nodes[nid]
            node.round = r
            node.round_tag = node_tag(seed, nid, r)
            task = sample_task(family, _stream(seed, _D_TASK, nid, r),
                               type_mix=type_mix, task_id=r)
            raw = node.generate_signal(task, rng=_stream(seed, _D_SOLVE,
                                                         nid, r))
            behavior = None
            if nid in behavior_of and r >= behavior_of[nid][1]:
                behavior = behavior_of[nid][0]
            tampered = apply_adversary(behavior, raw,
                                       _stream(seed, _D_ADV, nid, r), clip,
                                       shared_vec)
            private_reprs.extend(repr(float(x)) for x in task.target)
            private_reprs.extend(repr(float(x)) for x in raw.pattern_row)
            private_reprs.append(repr(float(raw.outcome.loss_before)))
            private_reprs.append(repr(float(raw.outcome.achieved_loss)))
            raw_rows_dbg.append([float(x) for x in raw.pattern_row])

            if mode == Mode.LEARN:
                continue
            check = node.validate_signal(tampered)
            if not check.accepted:
                round_rejections.append({"round": r, "node_id": nid,
                                         "reason": check.reason})
                continue
            one_hot = np.zeros(k_types + 1)
            one_hot[tampered.task.task_type] = 1.0
            one_hot[-1] = tampered.outcome.achieved_loss
            try:
                artifact = proj(tampered.pattern_row, one_hot, budgets[nid],
                                _stream(seed, _D_DP, nid, r),
                                node_tag=node.round_tag, round_no=r,
                                confidence=check.confidence)
            except PrivacyBudgetExhausted:
                round_abstentions.append(nid)
                continue
            artifacts_by_id[nid] = artifact

        rejections.extend(round_rejections)
        for nid in round_abstentions:
            abstentions.append({"round": r, "node_id": nid})

        record: Dict[str, Any] = {
            "kind": "round", "round": r, "mode": mode.name,
            "slot": plan.assignments.get(f"round-{r}"),
            "participants": participants,
            "rejections": round_rejections,
            "abstentions": round_abstentions,
            "dropouts": [nid for nid in leaving_now
                         if nid in artifacts_by_id],
            "messages": {"artifacts": [], "shares": [], "broadcast": None},
            "aggregate": None, "consolidation": None,
        }

        round_disp: Optional[float] = None
        n_artifacts = 0
        n_flagged = 0
        aborted_this_round = False

        if mode != Mode.LEARN and artifacts_by_id:
            setup_ids = sorted(artifacts_by_id)
            dropouts = {nid for nid in leaving_now if nid in artifacts_by_id}
            sender_ids = [nid for nid in setup_ids if nid not in dropouts]
            masks = make_masks(r, setup_ids, pairwise_seeds,
                               config.artifact_dim)
            shares = [mask_share(nid, artifacts_by_id[nid].vector,
                                 masks[nid], r) for nid in sender_ids]
            record["messages"]["shares"] = [
                {"node_id": s.node_id,
                 "words": [int(w) for w in s.masked_vector]}
                for s in shares]
            try:
                if shares:
                    agg = aggregate_masked(shares, dropouts, pairwise_seeds)
                    expected = np.zeros(config.artifact_dim, dtype=np.int64)
                    for nid in sender_ids:
                        expected += quantize(
                            artifacts_by_id[nid].vector).view(np.int64)
                    if not np.array_equal(agg.lattice_sum, expected):
                        raise CcfSimError(
                            "masked-channel sum disagrees with artifacts")
                    record["aggregate"] = {
                        "n_live": agg.n_live,
                        "lattice_sum": [int(w) for w in agg.lattice_sum],
                    }
            except RoundAborted as e:
                aborted.append(r)
                aborted_this_round = True
                record["aborted"] = str(e)

            if not aborted_this_round and sender_ids:
                arts = [artifacts_by_id[nid] for nid in sender_ids]
                snapshot = form_field(
                    arts, r, frozenset(a.node_tag for a in arts))
                tag_to_id = {artifacts_by_id[nid].node_tag: nid
                             for nid in sender_ids}
                ordered_ids = [tag_to_id[a.node_tag]
                               for a in snapshot.artifacts]
                n_artifacts = len(snapshot)
                if n_artifacts >= 2:
                    round_disp = dispersion(snapshot)
                flags = detect_anomalies(snapshot, config.ccf.k_mad) \
                    if r >= config.ccf.warmup else set()
                n_flagged = len(flags)
                if flags:
                    flagged_log.append(
                        (r, sorted(ordered_ids[i] for i in flags)))
                weights = filter_and_weight(
                    snapshot, ledger, ordered_ids,
                    theta_conf=config.ccf.theta_conf, flagged=flags)
                signal = improve(snapshot, weights, k_types,
                                 prev=prev_signal, beta=config.ccf.beta)
                update_reputation(ledger, snapshot, ordered_ids, signal)
                prev_signal = signal
                window.append((signal, round_disp if round_disp else 0.0))

                record["messages"]["artifacts"] = [
                    a.to_json_dict() for a in snapshot.artifacts]
                record["messages"]["broadcast"] = {
                    "round": r,
                    "priors_hash": signal.priors_hash(),
                    "present": [bool(x) for x in signal.present],
                    "priors": [[float(x) for x in row]
                               for row in signal.per_type_priors],
                }
                if _leak_private and raw_rows_dbg:
                    record["messages"]["debug"] = raw_rows_dbg

                # dissemination: broadcast prior and/or self-excluding view
                for nid in participants:
                    if nid in dropouts or nid not in nodes:
                        continue
                    node = nodes[nid]
                    view = _combined_view(
                        node, snapshot, weights, signal,
                        use_broadcast=config.engine.broadcast_u,
                        use_views=config.engine.node_views)
                    node.pattern = node.update_pattern(view)
            else:
                for nid in participants:
                    if nid not in dropouts:
                        nodes[nid].pattern = nodes[nid].update_pattern(None)
        elif participants:
            # learning round (or sync round with nothing exported):
            # purely local updates
            for nid in participants:
                if nid in nodes and nid not in leaving_now:
                    nodes[nid].pattern = nodes[nid].update_pattern(None)

        if mode == Mode.CONSOLIDATE and not aborted_this_round:
            if window:
                base = consolidate(window, base)
                g = config.ccf.gamma_cons
                if g > 0:
                    for node in nodes.values():
                        rows = (1.0 - g) * node.pattern.per_type_strategies \
                            + g * base.per_type_strategies
                        node.pattern = PatternObject(
                            per_type_strategies=rows,
                            local_step_size=node.pattern.local_step_size,
                            blend_rate=node.pattern.blend_rate)
                record["consolidation"] = {
                    "window_size": len(window),
                    "gamma": config.ccf.gamma_cons,
                    "base": [[float(x) for x in row]
                             for row in base.per_type_strategies],
                }
                window = []
            else:
                record["consolidation"] = {"skipped": "empty window"}

        for nid in leaving_now:
            nodes.pop(nid, None)

        # god's-eye evaluation against the true cluster centers
        per_type = []
        for t in range(k_types):
            vals = [quadratic_loss(n.pattern.per_type_strategies[t],
                                   family.centers[t])
                    for n in nodes.values()]
            per_type.append(float(np.mean(vals)) if vals else float("nan"))
        mean_loss = float(np.mean(per_type))
        loss_per_type.append(per_type)
        loss_mean.append(mean_loss)
        dispersions.append(round_disp)

        metric = {
            "round": r,
            "disp": round_disp,
            "n_artifacts": n_artifacts,
            "n_flagged": n_flagged,
            "priors_hash": prev_signal.priors_hash() if prev_signal
            else "none",
            "mean_reputation": ledger.mean(),
        }
        metrics.append(metric)
        record["losses"] = {"mean": mean_loss, "per_type": per_type}
        record["metrics"] = metric
        transcript.lines.append(record)
        transcript.lines.append({"kind": "private", "round": r,
                                 "reprs": private_reprs})

    transcript.lines.append({
        "kind": "footer",
        "rounds_executed": sc.rounds,
        "sync_rounds": sum(1 for m in modes if m != Mode.LEARN),
        "aborted_rounds": aborted,
        "final_reputation": {str(k): v
                             for k, v in sorted(ledger.snapshot().items())},
        "final_loss_per_type": loss_per_type[-1] if loss_per_type else [],
        "final_loss_mean": loss_mean[-1] if loss_mean else None,
        "carbon_g": carbon_g,
        "baseline_carbon_g": baseline_g,
        "spent_budget": {str(nid): budgets[nid].spent_rounds
                         for nid in sorted(budgets)},
    })
    content_hash = transcript.seal()

    return RunResult(
        transcript=transcript, metrics=metrics, loss_mean=loss_mean,
        loss_per_type=loss_per_type,
        final_reputation=dict(sorted(ledger.snapshot().items())),
        rejections=rejections, flagged=flagged_log, dispersions=dispersions,
        signal=prev_signal,
        plan_record=transcript.lines[1], carbon_g=carbon_g,
        baseline_carbon_g=baseline_g,
        executed_modes=[m.name for m in modes], aborted_rounds=aborted,
        abstentions=abstentions,
        participants_per_round=participants_per_round,
        content_hash=content_hash)


def _combined_view(node: Node, snapshot: CcfSnapshot, weights: np.ndarray,
                   signal: ImprovementSignal, *, use_broadcast: bool,
                   use_views: bool) -> Optional[CollectiveView]:
    """Average the broadcast prior with the node's own field view.

    Either pathway can be switched off; with both off the update is
    purely local. Types covered by only one source use that source.
    """
    if not use_broadcast and not use_views:
        return None
    k = node.pattern.k_types
    d = node.pattern.d_pattern
    own = node.project_ccf(snapshot, weights) if use_views else None
    centroids = np.zeros((k, d))
    support = np.zeros(k, dtype=np.int64)
    for t in range(k):
        parts = []
        if use_broadcast and signal.present[t]:
            parts.append(signal.per_type_priors[t])
        if own is not None and own.support_counts[t] > 0:
            parts.append(own.per_type_centroids[t])
        if parts:
            centroids[t] = np.mean(parts, axis=0)
            support[t] = len(parts) if own is None \
                else max(1, int(own.support_counts[t]))
    if not support.any():
        return None
    return CollectiveView(per_type_centroids=centroids,
                          support_counts=support,
                          source_round=snapshot.round)
