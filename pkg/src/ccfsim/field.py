"""Collective field operations run by the aggregator.

Given the round's artifact tuple, the aggregator
  1. forms the canonical snapshot (sorted by pseudonymous tag),
  2. flags per-type outliers with a median/MAD rule,
  3. turns confidence and reputation into contribution weights,
  4. folds surviving pattern parts into per-type priors (EMA smoothed),
  5. scores every contributor's agreement with the new priors and
     updates the reputation ledger.

Reputation is an exponential moving average in [0, 1]; anomaly flags
zero a contribution's weight for the round but reputation still decays
through the agreement term, so a persistent outlier loses influence
permanently rather than being refused once.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence, Set

import numpy as np

from .errors import ConfigurationError, ProtocolViolationError
from .spaces import Artifact, CcfSnapshot, distance


@dataclass
class ReputationLedger:
    """EMA reputation per node id, clamped to [0, 1].

    alpha is the update rate, r0 the score assigned on first contact,
    rho the distance scale of the agreement kernel.
    """

    alpha: float = 0.1
    r0: float = 0.5
    rho: float = 1.0
    scores: Dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0):
            raise ConfigurationError("alpha must be in [0, 1]")
        if not (0.0 <= self.r0 <= 1.0):
            raise ConfigurationError("r0 must be in [0, 1]")
        if self.rho <= 0:
            raise ConfigurationError("rho must be positive")

    def get(self, node_id: int) -> float:
        return self.scores.get(node_id, self.r0)

    def update_one(self, node_id: int, agreement: float) -> float:
        new = (1.0 - self.alpha) * self.get(node_id) + self.alpha * agreement
        new = min(1.0, max(0.0, new))
        self.scores[node_id] = new
        return new

    def mean(self) -> float:
        if not self.scores:
            return self.r0
        return float(np.mean(list(self.scores.values())))

    def snapshot(self) -> Dict[int, float]:
        return dict(self.scores)


def form_field(artifacts: Sequence[Artifact], round_no: int,
               participant_set: FrozenSet[str]) -> CcfSnapshot:
    """Canonical snapshot: artifact order is independent of arrival order."""
    ordered = sorted(artifacts, key=lambda a: a.node_tag)
    tags = [a.node_tag for a in ordered]
    if len(set(tags)) != len(tags):
        raise ProtocolViolationError("duplicate node_tag in round")
    return CcfSnapshot(round=round_no, artifacts=tuple(ordered),
                       participant_set=participant_set)


def detect_anomalies(snapshot: CcfSnapshot, k_mad: float = 5.0) -> Set[int]:
    """Indices of artifacts whose pattern part is a per-type MAD outlier.

    Within each task type: med = coordinate-wise median of pattern
    parts, d_i = ||p_i - med||, MAD = median(d). Flag iff d_i is
    strictly greater than k_mad * MAD. The strict comparison makes the
    rule inert for groups of one or two and for identical contributions
    (MAD = 0 flags only points off the common value). Fewer than four
    artifacts overall is too little evidence: nothing is flagged.
    """
    arts = snapshot.artifacts
    if len(arts) < 4:
        return set()
    by_type: Dict[int, List[int]] = {}
    for idx, a in enumerate(arts):
        by_type.setdefault(a.task_type(), []).append(idx)
    flagged: Set[int] = set()
    for idxs in by_type.values():
        pts = np.stack([arts[i].pattern_part for i in idxs])
        med = np.median(pts, axis=0)
        dists = np.linalg.norm(pts - med, axis=1)
        mad = float(np.median(dists))
        for pos, i in enumerate(idxs):
            if dists[pos] > k_mad * mad:
                flagged.add(i)
    return flagged


def filter_and_weight(snapshot: CcfSnapshot, ledger: ReputationLedger,
                      node_ids: Sequence[int], *, theta_conf: float = 0.3,
                      flagged: Optional[Set[int]] = None) -> np.ndarray:
    """Weight per artifact: confidence * reputation, or zero.

    node_ids aligns positionally with snapshot.artifacts (the engine
    keeps the tag-to-id map; tags alone are round-scoped pseudonyms).
    Zeroed: confidence below theta_conf, or flagged this round.
    """
    if len(node_ids) != len(snapshot.artifacts):
        raise ConfigurationError("node_ids must align with artifacts")
    flagged = flagged or set()
    w = np.zeros(len(snapshot.artifacts))
    for i, art in enumerate(snapshot.artifacts):
        if i in flagged or art.confidence < theta_conf:
            continue
        w[i] = art.confidence * ledger.get(node_ids[i])
    return w


@dataclass(frozen=True)
class ImprovementSignal:
    """Per-type priors broadcast back to nodes after a sync round.

    present[t] is False until type t has received its first weighted
    support; consumers must not condition on an absent prior.
    """

    round: int
    per_type_priors: np.ndarray   # (k_types, d_pattern)
    present: np.ndarray           # (k_types,) bool

    def __post_init__(self):
        p = np.asarray(self.per_type_priors, dtype=np.float64).copy()
        m = np.asarray(self.present, dtype=bool).copy()
        if p.ndim != 2 or m.shape != (p.shape[0],):
            raise ConfigurationError("priors/present shape mismatch")
        p.flags.writeable = False
        m.flags.writeable = False
        object.__setattr__(self, "per_type_priors", p)
        object.__setattr__(self, "present", m)

    @property
    def k_types(self) -> int:
        return self.per_type_priors.shape[0]

    def prior_for(self, task_type: int) -> Optional[np.ndarray]:
        if not self.present[task_type]:
            return None
        return self.per_type_priors[task_type]

    def priors_hash(self) -> str:
        h = hashlib.sha256()
        h.update(np.round(self.per_type_priors, 12).tobytes())
        h.update(self.present.tobytes())
        return h.hexdigest()[:16]


def improve(snapshot: CcfSnapshot, weights: np.ndarray, k_types: int,
            prev: Optional[ImprovementSignal] = None,
            beta: float = 0.5) -> ImprovementSignal:
    """Weighted per-type mean of surviving pattern parts, EMA-folded.

    Types with zero weighted support this round inherit the previous
    prior unchanged. A type gaining its first support adopts the raw
    mean outright regardless of beta (there is nothing to smooth
    against); afterwards prior <- (1-beta)*prev + beta*raw.
    """
    if not (0.0 <= beta <= 1.0):
        raise ConfigurationError("beta must be in [0, 1]")
    arts = snapshot.artifacts
    if len(weights) != len(arts):
        raise ConfigurationError("weights must align with artifacts")
    if any(w < 0 for w in weights):
        raise ConfigurationError("weights must be non-negative")
    d_pattern = arts[0].pattern_part.shape[0] if arts else (
        prev.per_type_priors.shape[1] if prev is not None else 0)
    if prev is not None and prev.k_types != k_types:
        raise ConfigurationError("k_types changed between rounds")

    raw = np.zeros((k_types, d_pattern))
    support = np.zeros(k_types)
    for art, w in zip(arts, weights):
        if w <= 0:
            continue
        t = art.task_type()
        if t >= k_types:
            raise ProtocolViolationError(f"task type {t} out of range")
        raw[t] += w * art.pattern_part
        support[t] += w

    priors = np.array(prev.per_type_priors, copy=True) if prev is not None \
        else np.zeros((k_types, d_pattern))
    present = np.array(prev.present, copy=True) if prev is not None \
        else np.zeros(k_types, dtype=bool)
    for t in range(k_types):
        if support[t] <= 0:
            continue
        mean_t = raw[t] / support[t]
        if present[t]:
            priors[t] = (1.0 - beta) * priors[t] + beta * mean_t
        else:
            priors[t] = mean_t
            present[t] = True
    return ImprovementSignal(round=snapshot.round, per_type_priors=priors,
                             present=present)


def update_reputation(ledger: ReputationLedger, snapshot: CcfSnapshot,
                      node_ids: Sequence[int],
                      signal: ImprovementSignal) -> Dict[int, float]:
    """Score every contributor against the round's priors.

    agreement = exp(-||pattern_part - prior_type|| / rho); contributions
    to a type with no prior yet are skipped (no basis for judgement).
    Flagged or low-confidence nodes are still scored: that is how a
    persistent adversary's reputation actually falls.
    """
    if len(node_ids) != len(snapshot.artifacts):
        raise ConfigurationError("node_ids must align with artifacts")
    updated: Dict[int, float] = {}
    for art, nid in zip(snapshot.artifacts, node_ids):
        prior = signal.prior_for(art.task_type())
        if prior is None:
            continue
        d = float(np.linalg.norm(art.pattern_part - prior))
        agreement = math.exp(-d / ledger.rho)
        updated[nid] = ledger.update_one(nid, agreement)
    return updated
