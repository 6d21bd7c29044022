"""Pure-python (numpy) kernels: counter-mode PRG, pairwise masks, dispersion.

The PRG is fixed so that transcripts are bit-reproducible across kernel
backends and across independent implementations:

    counter(round, index) = round * 2**32 + index
    state(seed, counter)  = (seed + (counter + 1) * GAMMA)  mod 2**64
    value                 = mix64(state)

where GAMMA = 0x9E3779B97F4A7C15 and mix64 is the SplitMix64 finalizer

    z ^= z >> 30;  z *= 0xBF58476D1CE4E5B9
    z ^= z >> 27;  z *= 0x94D049BB133111EB
    z ^= z >> 31

All arithmetic is mod 2**64.  Masks live on this 64-bit integer lattice so
that pairwise cancellation is exact (no floating-point masking).
"""

import numpy as np

GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)

_U64 = np.uint64


def _mix64(z: np.ndarray) -> np.ndarray:
    z = z.astype(np.uint64, copy=True)
    z ^= z >> _U64(30)
    z *= _M1
    z ^= z >> _U64(27)
    z *= _M2
    z ^= z >> _U64(31)
    return z


def _counters(round_no: int, dim: int) -> np.ndarray:
    base = _U64(round_no) << _U64(32)
    return base + np.arange(dim, dtype=np.uint64)


def prg_values(seed: int, round_no: int, dim: int) -> np.ndarray:
    """64-bit lattice values for (seed, round, 0..dim-1)."""
    states = _U64(seed) + (_counters(round_no, dim) + _U64(1)) * GAMMA
    return _mix64(states)


def pair_masks(seed_matrix: np.ndarray, round_no: int, dim: int) -> np.ndarray:
    """Per-participant mask vectors from pairwise seeds.

    seed_matrix[a, b] (a < b, positions in the sorted participant list)
    holds the shared seed of the unordered pair; the lower participant
    adds the PRG vector, the higher one subtracts it, so the masks
    telescope to zero mod 2**64.
    """
    m = seed_matrix.shape[0]
    masks = np.zeros((m, dim), dtype=np.uint64)
    if m < 2:
        return masks
    ctr = (_counters(round_no, dim) + _U64(1)) * GAMMA
    ia, ib = np.triu_indices(m, k=1)
    states = seed_matrix[ia, ib].astype(np.uint64)[:, None] + ctr[None, :]
    vals = _mix64(states)
    np.add.at(masks, ia, vals)
    np.subtract.at(masks, ib, vals)
    return masks


def pairwise_sq_sum(x: np.ndarray) -> float:
    """Sum of squared euclidean distances over ordered pairs (i != j)."""
    x = np.asarray(x, dtype=np.float64)
    diff = x[:, None, :] - x[None, :, :]
    return float(np.einsum("ijk,ijk->", diff, diff))
