"""Privacy projection and pairwise-mask secure aggregation.

Projection = L2 clip to a fixed radius + per-coordinate Gaussian noise
calibrated to an (epsilon, delta) budget:

    sigma >= clip_radius * sqrt(2 ln(1.25/delta)) / epsilon

Secure aggregation follows the classic pairwise-mask construction,
simplified to an honest-but-curious aggregator at desk scale: every
unordered pair {i, j} shares a seed; in each round the lower id adds a
PRG-derived vector to its share and the higher id subtracts it, so the
sum of all masks telescopes to zero. Vectors are transmitted quantized
onto a 2**40 integer lattice carried in 64-bit words (mod 2**64), which
makes the cancellation exact to the last bit instead of approximately
zero in floating point. Dropped participants are handled by removing the
surviving cross terms (the simulation grants seed recovery); a dropout
whose seeds cannot be recovered aborts the round, per the fail-safe.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Sequence, Set, Tuple

import numpy as np

from .errors import (ConfigurationError, EmptyAggregateError,
                     PrivacyBudgetExhausted, ProtocolSetupError, RoundAborted)
from .kernels import pair_masks, prg_values
from .spaces import Artifact

LATTICE_SCALE = float(2 ** 40)


def gaussian_sigma(epsilon: float, delta: float, clip_radius: float) -> float:
    """Noise std of the Gaussian mechanism at sensitivity = clip_radius."""
    if epsilon <= 0:
        raise ConfigurationError("epsilon must be positive")
    if not (0.0 < delta < 1.0):
        raise ConfigurationError("delta must be in (0, 1)")
    return clip_radius * math.sqrt(2.0 * math.log(1.25 / delta)) / epsilon


@dataclass
class DpParams:
    """Privacy budget: calibration is asserted at construction.

    spent_rounds is the simple per-round composition counter; once it
    reaches rounds_budget the node abstains instead of projecting.
    """

    epsilon: float
    delta: float
    clip_radius: float
    rounds_budget: int
    sigma: float = -1.0           # derived when negative
    spent_rounds: int = 0

    def __post_init__(self):
        if self.clip_radius <= 0:
            raise ConfigurationError("clip_radius must be positive")
        if self.rounds_budget < 1:
            raise ConfigurationError("rounds_budget must be positive")
        bound = gaussian_sigma(self.epsilon, self.delta, self.clip_radius)
        if self.sigma < 0:
            self.sigma = bound
        elif self.sigma < bound * (1.0 - 1e-12):
            raise ConfigurationError(
                f"sigma {self.sigma:.6g} below calibration bound {bound:.6g}")

    def copy(self) -> "DpParams":
        return DpParams(epsilon=self.epsilon, delta=self.delta,
                        clip_radius=self.clip_radius,
                        rounds_budget=self.rounds_budget, sigma=self.sigma,
                        spent_rounds=self.spent_rounds)


def clip_to_radius(v: np.ndarray, radius: float) -> np.ndarray:
    norm = float(np.linalg.norm(v))
    if norm <= radius or norm == 0.0:
        return v
    return v * (radius / norm)


def proj(pattern_image: np.ndarray, outcome_image: np.ndarray, dp: DpParams,
         rng: np.random.Generator, *, node_tag: str, round_no: int,
         confidence: float) -> Artifact:
    """Clip + noise the concatenated images and spend one round of budget."""
    if dp.spent_rounds >= dp.rounds_budget:
        raise PrivacyBudgetExhausted(
            f"budget {dp.rounds_budget} rounds exhausted")
    p = np.asarray(pattern_image, dtype=np.float64)
    o = np.asarray(outcome_image, dtype=np.float64)
    v = clip_to_radius(np.concatenate([p, o]), dp.clip_radius)
    if dp.sigma > 0:
        v = v + rng.normal(0.0, dp.sigma, size=v.shape[0])
    dp.spent_rounds += 1
    return Artifact(pattern_part=v[:p.shape[0]], outcome_part=v[p.shape[0]:],
                    node_tag=node_tag, round=round_no, confidence=confidence)


@dataclass(frozen=True)
class MaskedShare:
    """One node's lattice-quantized, mask-blinded artifact vector.

    The vector is stored as the raw 64-bit lattice words; alone it is
    uniformly masked and carries no information about the artifact.
    """

    node_id: int
    masked_vector: np.ndarray   # uint64 lattice words
    round: int

    def __post_init__(self):
        v = np.asarray(self.masked_vector, dtype=np.uint64).copy()
        v.flags.writeable = False
        object.__setattr__(self, "masked_vector", v)


def quantize(v: np.ndarray) -> np.ndarray:
    """Real vector -> 2**40 lattice, as uint64 words (two's complement)."""
    q = np.rint(np.asarray(v, dtype=np.float64) * LATTICE_SCALE)
    return q.astype(np.int64).view(np.uint64)


def dequantize(words: np.ndarray) -> np.ndarray:
    return np.asarray(words, dtype=np.uint64).view(np.int64) / LATTICE_SCALE


def derive_pairwise_seeds(master_seed: int, node_ids: Iterable[int]
                          ) -> Dict[Tuple[int, int], int]:
    """Trusted-setup stand-in: one shared 64-bit seed per unordered pair."""
    ids = sorted(set(int(i) for i in node_ids))
    seeds = {}
    for a_pos, i in enumerate(ids):
        for j in ids[a_pos + 1:]:
            digest = hashlib.sha256(
                f"pair|{master_seed}|{i}|{j}".encode()).digest()
            seeds[(i, j)] = int.from_bytes(digest[:8], "big")
    return seeds


def _seed_matrix(ids: Sequence[int],
                 pairwise_seeds: Dict[Tuple[int, int], int]) -> np.ndarray:
    m = len(ids)
    mat = np.zeros((m, m), dtype=np.uint64)
    for a in range(m):
        for b in range(a + 1, m):
            key = (ids[a], ids[b])
            if key not in pairwise_seeds:
                raise ProtocolSetupError(f"missing pairwise seed for {key}")
            mat[a, b] = np.uint64(pairwise_seeds[key])
    return mat


def make_masks(round_no: int, participant_ids: Iterable[int],
               pairwise_seeds: Dict[Tuple[int, int], int],
               dim: int) -> Dict[int, np.ndarray]:
    """Per-node mask vectors for the round; masks sum to zero mod 2**64."""
    ids = sorted(set(int(i) for i in participant_ids))
    mat = _seed_matrix(ids, pairwise_seeds)
    masks = pair_masks(mat, round_no, dim)
    return {nid: masks[k] for k, nid in enumerate(ids)}


def mask_share(node_id: int, vector: np.ndarray, mask: np.ndarray,
               round_no: int) -> MaskedShare:
    """Quantize to the lattice and blind with the node's round mask."""
    q = quantize(vector)
    if q.shape != mask.shape:
        raise ConfigurationError("mask dimension mismatch")
    return MaskedShare(node_id=node_id, masked_vector=q + mask,
                       round=round_no)


@dataclass(frozen=True)
class AggregateResult:
    """Decoded sum over live nodes. lattice_sum is exact (int lattice)."""

    vector: np.ndarray        # float64, lattice_sum / 2**40
    lattice_sum: np.ndarray   # int64 lattice words
    n_live: int


def aggregate_masked(shares: List[MaskedShare], dropouts: Set[int],
                     pairwise_seeds: Dict[Tuple[int, int], int]
                     ) -> AggregateResult:
    """Sum masked shares and strip surviving cross-terms of dropped nodes.

    Masks between two live nodes cancel in the sum; each (live, dropped)
    pair leaves one signed PRG term which is reconstructed from the
    recovered pairwise seed and removed. The aggregator never unmasks an
    individual share.
    """
    if not shares:
        raise EmptyAggregateError("no live shares to aggregate")
    round_no = shares[0].round
    live = sorted(s.node_id for s in shares)
    if len(set(live)) != len(live):
        raise ProtocolSetupError("duplicate share in aggregation")
    for s in shares:
        if s.round != round_no:
            raise ProtocolSetupError("shares from mixed rounds")
    dim = shares[0].masked_vector.shape[0]
    total = np.zeros(dim, dtype=np.uint64)
    for s in shares:
        total += s.masked_vector
    for d in sorted(dropouts):
        if d in live:
            raise ProtocolSetupError(f"node {d} both live and dropped")
        for i in live:
            key = (i, d) if i < d else (d, i)
            if key not in pairwise_seeds:
                raise RoundAborted(
                    f"unrecoverable dropout seed for pair {key}")
            term = prg_values(pairwise_seeds[key], round_no, dim)
            if i < d:
                total -= term    # live node had added the term
            else:
                total += term    # live node had subtracted it
    lattice = total.view(np.int64)
    return AggregateResult(vector=lattice / LATTICE_SCALE,
                           lattice_sum=lattice.copy(), n_live=len(live))
