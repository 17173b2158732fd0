"""Frame-wise voice conversion against a target-speaker frame bank.

Each source frame is replaced by a cosine-similarity-weighted average of its
k nearest pool frames. The search is an exact blocked scan: pools of up to a
few hours of speech stay tractable and exactness removes a correctness
variable. Ties at equal similarity resolve to the lower pool index, so
results are reproducible across runs.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .featstore import FeatureSequence

DEFAULT_K = 8
_BLOCK_FRAMES = 512


@dataclass
class MatchingPool:
    frames: np.ndarray
    norms: np.ndarray

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float32)
        norms = np.asarray(self.norms, dtype=np.float64)
        if frames.ndim != 2 or frames.shape[0] < 1:
            raise ValueError("pool must contain at least one frame")
        if norms.shape != (frames.shape[0],):
            raise ValueError("need one norm per pool frame")
        if np.any(norms <= 0):
            raise ValueError("zero-norm frames must be excluded at build time")
        self.frames = frames
        self.norms = norms

    @property
    def size(self):
        return self.frames.shape[0]

    @property
    def dim(self):
        return self.frames.shape[1]


def build_pool(sequences) -> MatchingPool:
    """Concatenate target-speaker sequences into a matching pool.

    Zero frames are dropped (cosine similarity is undefined for them) with
    a warning reporting the count.
    """
    if not sequences:
        raise ValueError("need at least one sequence to build a pool")
    dims = {seq.dim for seq in sequences}
    if len(dims) != 1:
        raise ValueError(f"sequences have mixed dims {sorted(dims)}")
    frames = np.concatenate([seq.frames for seq in sequences], axis=0)
    if frames.shape[0] == 0:
        raise ValueError("pool has no frames")
    norms = np.linalg.norm(frames.astype(np.float64), axis=1)
    zero = norms == 0.0
    if np.any(zero):
        warnings.warn(f"dropping {int(zero.sum())} zero frame(s) from the pool")
        frames = frames[~zero]
        norms = norms[~zero]
    if frames.shape[0] == 0:
        raise ValueError("pool contains only zero frames")
    return MatchingPool(frames=frames, norms=norms)


def _top_k_by_similarity(sims, k):
    """Indices of the k largest similarities, ties resolved to lower index."""
    n = len(sims)
    if k >= n:
        order = np.argsort(-sims, kind="stable")
        return order
    threshold = np.partition(sims, n - k)[n - k]
    above = np.flatnonzero(sims > threshold)
    at = np.flatnonzero(sims == threshold)
    take = k - len(above)
    selected = np.concatenate([above, at[:take]])
    selected.sort()
    return selected


def select_matches(frame, pool: MatchingPool, k) -> np.ndarray:
    """Pool indices of the k frames most cosine-similar to ``frame``."""
    sims = _cosine_similarities(np.asarray(frame, dtype=np.float64), pool)
    return _top_k_by_similarity(sims, k)


def _cosine_similarities(frame, pool):
    norm = np.linalg.norm(frame)
    dots = pool.frames.astype(np.float64) @ frame
    return dots / (pool.norms * norm)


def convert_sequence(seq, pool: MatchingPool, k=DEFAULT_K):
    """Replace every source frame by the weighted average of its k best matches.

    Weights are cosine similarities clamped at zero; when every selected
    similarity is non-positive the average falls back to uniform. Zero source
    frames pass through unchanged with a warning. Output length and frame
    rate equal the input's.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if seq.dim != pool.dim:
        raise ValueError(f"sequence dim {seq.dim} does not match pool dim {pool.dim}")
    if k > pool.size:
        warnings.warn(f"k={k} exceeds pool size {pool.size}; clamping")
        k = pool.size

    src = seq.frames.astype(np.float64)
    src_norms = np.linalg.norm(src, axis=1)
    out = np.empty_like(src)
    pool_frames = pool.frames.astype(np.float64)

    for start in range(0, src.shape[0], _BLOCK_FRAMES):
        block = src[start : start + _BLOCK_FRAMES]
        block_norms = src_norms[start : start + _BLOCK_FRAMES]
        sims_block = (block @ pool_frames.T) / pool.norms[None, :]
        for i in range(block.shape[0]):
            row = start + i
            if block_norms[i] == 0.0:
                warnings.warn(f"source frame {row} is zero; copied through unchanged")
                out[row] = block[i]
                continue
            sims = sims_block[i] / block_norms[i]
            chosen = _top_k_by_similarity(sims, k)
            if len(chosen) == 1:
                # A one-frame average is that frame; copy it bit-exactly.
                out[row] = pool_frames[chosen[0]]
                continue
            weights = np.maximum(sims[chosen], 0.0)
            total = weights.sum()
            if total == 0.0:
                weights = np.full(len(chosen), 1.0 / len(chosen))
                total = 1.0
            out[row] = (weights @ pool_frames[chosen]) / total

    return FeatureSequence(frame_rate=seq.frame_rate, frames=out.astype(np.float32))
