"""Speech-type segmenter: codebook clustering, 3-way grouping, and DP segmentation.

Training clusters a speaker's frames into a 100-centroid codebook, groups the
centroids into three speech types by Ward agglomeration, and labels the groups
Silence / Sonorant / Obstruent from silence and voicing flag overlaps.
Segmentation scores each frame against the codebook, converts distances to
per-class log probabilities, and runs a dynamic program that maximizes total
log-likelihood minus ``gamma`` per segment, so larger gamma yields longer
segments.
"""

import enum
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

DEFAULT_K = 100
DEFAULT_GAMMA = 3.0
PROB_FLOOR = 1e-10

MODEL_MAGIC = b"RNVS"
MODEL_VERSION = 1
MODEL_HEADER = struct.Struct("<4sIIIff")


class SpeechType(enum.IntEnum):
    SILENCE = 0
    SONORANT = 1
    OBSTRUENT = 2


class TrainingDataError(ValueError):
    """Raised when training data cannot support a decision (ties, empty groups)."""


@dataclass
class SegmenterModel:
    centroids: np.ndarray
    type_of_centroid: np.ndarray
    sigma2: float
    frame_rate: float

    def __post_init__(self):
        # Canonical precision is float32, matching the on-disk layout, so that
        # save followed by load reproduces the model bit-exactly.
        centroids = np.asarray(self.centroids, dtype=np.float32)
        if centroids.ndim != 2:
            raise ValueError("centroids must be a K x dim matrix")
        if not np.all(np.isfinite(centroids)):
            raise ValueError("centroid rows must be finite")
        types = np.asarray(self.type_of_centroid, dtype=np.int64)
        if types.shape != (centroids.shape[0],):
            raise ValueError("type_of_centroid must have one entry per centroid")
        present = set(int(t) for t in types)
        if present != {int(t) for t in SpeechType}:
            raise ValueError(f"every speech type must appear at least once, got {sorted(present)}")
        if self.sigma2 <= 0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")
        if self.frame_rate <= 0:
            raise ValueError(f"frame_rate must be positive, got {self.frame_rate}")
        self.centroids = centroids
        self.type_of_centroid = types
        self.sigma2 = float(np.float32(self.sigma2))
        self.frame_rate = float(np.float32(self.frame_rate))

    @property
    def k(self):
        return self.centroids.shape[0]

    @property
    def dim(self):
        return self.centroids.shape[1]


@dataclass
class Segmentation:
    """Ordered (speech_type, start, end) runs tiling [0, n_frames)."""

    segments: list

    def __post_init__(self):
        prev_end = 0
        prev_type = None
        for speech_type, start, end in self.segments:
            if start != prev_end:
                raise ValueError(f"segments must tile without gaps, got start {start} after {prev_end}")
            if end <= start:
                raise ValueError(f"segment [{start}, {end}) is empty")
            if prev_type is not None and speech_type == prev_type:
                raise ValueError("adjacent segments must have distinct speech types")
            prev_end = end
            prev_type = speech_type

    @property
    def n_frames(self):
        return self.segments[-1][2] if self.segments else 0

    def counts_by_type(self):
        counts = {t: 0 for t in SpeechType}
        for speech_type, _, _ in self.segments:
            counts[speech_type] += 1
        return counts

    def durations_by_type(self, frame_rate):
        """Segment durations in seconds, keyed by speech type."""
        durations = {t: [] for t in SpeechType}
        for speech_type, start, end in self.segments:
            durations[speech_type].append((end - start) / frame_rate)
        return durations


def _squared_distances(points, centers):
    # ||x - c||^2 = ||x||^2 - 2 x.c + ||c||^2, clipped at 0 against rounding.
    sq = (
        np.sum(points**2, axis=1)[:, None]
        - 2.0 * points @ centers.T
        + np.sum(centers**2, axis=1)[None, :]
    )
    return np.maximum(sq, 0.0)


def _kmeans_pp_init(frames, k, rng):
    n = frames.shape[0]
    centers = np.empty((k, frames.shape[1]), dtype=np.float64)
    first = rng.integers(n)
    centers[0] = frames[first]
    closest = _squared_distances(frames, centers[0:1])[:, 0]
    for i in range(1, k):
        total = closest.sum()
        if total <= 0:
            # All remaining points coincide with a chosen center; any pick works.
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=closest / total)
        centers[i] = frames[idx]
        closest = np.minimum(closest, _squared_distances(frames, centers[i : i + 1])[:, 0])
    return centers


def kmeans_fit(frames, k, seed, max_iter=300, tol=1e-6):
    """Lloyd's k-means with k-means++ seeding.

    Deterministic for a fixed seed. Empty clusters are re-seeded to the point
    farthest from its assigned centroid. Returns (centroids, assignment).
    """
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2:
        raise ValueError("frames must be a 2-D matrix")
    n = frames.shape[0]
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if n < k:
        raise ValueError(f"need at least k={k} frames, got {n}")

    rng = np.random.default_rng(seed)
    centers = _kmeans_pp_init(frames, k, rng)

    prev_inertia = np.inf
    assignment = None
    for _ in range(max(1, max_iter)):
        dists = _squared_distances(frames, centers)
        assignment = np.argmin(dists, axis=1)

        # Re-seed empty clusters to the farthest point, then reassign. When
        # every point already coincides with a centroid (fewer distinct
        # values than k) no re-seed can gain members, so give up and keep
        # the duplicate centroid; the fit is already exact.
        counts = np.bincount(assignment, minlength=k)
        attempts = 0
        while np.any(counts == 0) and attempts < n:
            empty = int(np.argmin(counts))
            nearest = dists[np.arange(n), assignment]
            farthest = int(np.argmax(nearest))
            if nearest[farthest] == 0.0:
                break
            centers[empty] = frames[farthest]
            dists = _squared_distances(frames, centers)
            assignment = np.argmin(dists, axis=1)
            counts = np.bincount(assignment, minlength=k)
            attempts += 1

        inertia = float(dists[np.arange(n), assignment].sum())
        for j in range(k):
            members = frames[assignment == j]
            if members.shape[0]:
                centers[j] = members.mean(axis=0)
        if np.isfinite(prev_inertia) and prev_inertia - inertia <= tol * max(prev_inertia, 1e-12):
            break
        prev_inertia = inertia

    dists = _squared_distances(frames, centers)
    assignment = np.argmin(dists, axis=1)
    return centers, assignment


def ward_cluster_centroids(centroids, n_groups=3):
    """Agglomerate centroids under Ward's minimum-variance criterion.

    Merge cost for clusters A, B is |A||B| / (|A|+|B|) * ||mean_A - mean_B||^2.
    Ties break on the lexicographically lowest active pair index, making the
    merge sequence deterministic. Returns a length-K array of group labels in
    [0, n_groups), numbered by first centroid occurrence.
    """
    centroids = np.asarray(centroids, dtype=np.float64)
    k = centroids.shape[0]
    if k < n_groups:
        raise ValueError(f"need at least {n_groups} centroids, got {k}")

    members = {i: [i] for i in range(k)}
    means = {i: centroids[i].copy() for i in range(k)}
    sizes = {i: 1 for i in range(k)}

    while len(members) > n_groups:
        active = sorted(members)
        best = None
        best_pair = None
        for a_pos, i in enumerate(active):
            for j in active[a_pos + 1 :]:
                diff = means[i] - means[j]
                cost = sizes[i] * sizes[j] / (sizes[i] + sizes[j]) * float(diff @ diff)
                if best is None or cost < best:
                    best = cost
                    best_pair = (i, j)
        i, j = best_pair
        total = sizes[i] + sizes[j]
        means[i] = (sizes[i] * means[i] + sizes[j] * means[j]) / total
        sizes[i] = total
        members[i].extend(members[j])
        del members[j], means[j], sizes[j]

    labels = np.empty(k, dtype=np.int64)
    for group, root in enumerate(sorted(members, key=lambda r: min(members[r]))):
        labels[np.array(members[root])] = group
    return labels


def assign_speech_types(frame_groups, frame_flags):
    """Label the three centroid groups as Silence, Sonorant, Obstruent.

    frame_groups holds the group id of each training frame; frame_flags the
    matching (is_silence, is_voiced) pairs. The group whose frames are most
    often flagged silent becomes Silence, the more-voiced of the remaining
    two becomes Sonorant, and the last is Obstruent. Exact ties in a deciding
    fraction raise TrainingDataError, which more training data resolves.
    """
    frame_groups = np.asarray(frame_groups)
    frame_flags = np.asarray(frame_flags, dtype=bool)
    if frame_flags.shape != (len(frame_groups), 2):
        raise ValueError("need one (is_silence, is_voiced) pair per training frame")
    groups = sorted(set(int(g) for g in frame_groups))
    if len(groups) != 3:
        raise ValueError(f"expected 3 groups with training frames, got {len(groups)}")

    silent_frac = {}
    voiced_frac = {}
    for g in groups:
        mask = frame_groups == g
        count = int(mask.sum())
        if count == 0:
            raise TrainingDataError(f"group {g} has no training frames")
        silent_frac[g] = float(frame_flags[mask, 0].sum()) / count
        voiced_frac[g] = float(frame_flags[mask, 1].sum()) / count

    by_silence = sorted(groups, key=lambda g: silent_frac[g], reverse=True)
    if silent_frac[by_silence[0]] == silent_frac[by_silence[1]]:
        raise TrainingDataError(
            "tie in silence overlap between groups "
            f"{by_silence[0]} and {by_silence[1]}; more training data needed"
        )
    silence_group = by_silence[0]

    rest = [g for g in groups if g != silence_group]
    if voiced_frac[rest[0]] == voiced_frac[rest[1]]:
        raise TrainingDataError(
            f"tie in voiced overlap between groups {rest[0]} and {rest[1]}; "
            "more training data needed"
        )
    sonorant_group = max(rest, key=lambda g: voiced_frac[g])
    obstruent_group = next(g for g in rest if g != sonorant_group)

    return {
        silence_group: SpeechType.SILENCE,
        sonorant_group: SpeechType.SONORANT,
        obstruent_group: SpeechType.OBSTRUENT,
    }


def class_log_probs(model: SegmenterModel, seq) -> np.ndarray:
    """Per-frame log probability of each speech type.

    Centroid j gets weight exp(-||x - c_j||^2 / (2 sigma2)); weights are
    normalized over all centroids and summed within each class. Class
    probabilities are floored at 1e-10 before the log so silence-only
    input cannot produce -inf.
    """
    frames = np.asarray(seq.frames, dtype=np.float64)
    if frames.shape[1] != model.dim:
        raise ValueError(f"feature dim {frames.shape[1]} does not match model dim {model.dim}")
    sq = _squared_distances(frames, model.centroids)
    logits = -sq / (2.0 * model.sigma2)
    logits -= logits.max(axis=1, keepdims=True)
    weights = np.exp(logits)
    weights /= weights.sum(axis=1, keepdims=True)

    probs = np.zeros((frames.shape[0], len(SpeechType)))
    for speech_type in SpeechType:
        mask = model.type_of_centroid == int(speech_type)
        probs[:, int(speech_type)] = weights[:, mask].sum(axis=1)
    return np.log(np.maximum(probs, PROB_FLOOR))


def segment_dp(log_probs, gamma) -> Segmentation:
    """Segment a log-probability matrix into labeled runs.

    Maximizes the sum over segments of (sum of the segment's frames' log
    probability under its label) minus gamma per segment. Solved exactly in
    O(n^2 * 3) with per-class prefix sums; adjacent equal-label segments are
    merged in the output, which never changes the optimum.
    """
    log_probs = np.asarray(log_probs, dtype=np.float64)
    if log_probs.ndim != 2 or log_probs.shape[1] != len(SpeechType):
        raise ValueError("log_probs must be an n x 3 matrix")
    n = log_probs.shape[0]
    if n < 1:
        raise ValueError("need at least one frame")
    if gamma < 0:
        raise ValueError(f"gamma must be non-negative, got {gamma}")

    prefix = np.zeros((n + 1, log_probs.shape[1]))
    np.cumsum(log_probs, axis=0, out=prefix[1:])

    alpha = np.empty(n + 1)
    alpha[0] = 0.0
    prev_boundary = np.zeros(n + 1, dtype=np.int64)
    best_label = np.zeros(n + 1, dtype=np.int64)
    for t in range(1, n + 1):
        seg_scores = prefix[t] - prefix[:t]
        labels = np.argmax(seg_scores, axis=1)
        candidates = alpha[:t] + seg_scores[np.arange(t), labels] - gamma
        s = int(np.argmax(candidates))
        alpha[t] = candidates[s]
        prev_boundary[t] = s
        best_label[t] = labels[s]

    runs = []
    t = n
    while t > 0:
        s = int(prev_boundary[t])
        runs.append((SpeechType(int(best_label[t])), s, t))
        t = s
    runs.reverse()

    merged = []
    for speech_type, start, end in runs:
        if merged and merged[-1][0] == speech_type:
            merged[-1] = (speech_type, merged[-1][1], end)
        else:
            merged.append((speech_type, start, end))
    return Segmentation(segments=merged)


def segment_sequence(model: SegmenterModel, seq, gamma=DEFAULT_GAMMA) -> Segmentation:
    """Convenience wrapper: log probs then DP in one call."""
    return segment_dp(class_log_probs(model, seq), gamma)


def train_segmenter(sequences, flags_list, k=DEFAULT_K, seed=0):
    """Train a SegmenterModel from feature sequences and matching flag arrays.

    Concatenates all frames, fits the codebook, sets the distance scale to the
    mean squared distance of training frames to their nearest centroid, groups
    centroids by Ward agglomeration, and labels the groups from flag overlaps.
    """
    if not sequences:
        raise ValueError("need at least one training sequence")
    if len(sequences) != len(flags_list):
        raise ValueError("need one flag array per sequence")
    frame_rate = sequences[0].frame_rate
    for seq in sequences:
        if seq.frame_rate != frame_rate:
            raise ValueError("training sequences must share a frame rate")

    frames = np.concatenate([np.asarray(s.frames, dtype=np.float64) for s in sequences])
    flags = np.concatenate([np.asarray(f, dtype=bool) for f in flags_list])
    if flags.shape != (frames.shape[0], 2):
        raise ValueError("flag count must equal total frame count")

    centroids, assignment = kmeans_fit(frames, k, seed)
    nearest_sq = _squared_distances(frames, centroids)[np.arange(len(frames)), assignment]
    sigma2 = float(nearest_sq.mean())
    if sigma2 <= 0:
        # Degenerate corpus where every frame sits on a centroid.
        sigma2 = 1e-8
        warnings.warn("all training frames coincide with centroids; using fallback sigma2")

    group_labels = ward_cluster_centroids(centroids, n_groups=3)
    type_of_group = assign_speech_types(group_labels[assignment], flags)
    type_of_centroid = np.array([int(type_of_group[int(g)]) for g in group_labels])

    return SegmenterModel(
        centroids=centroids,
        type_of_centroid=type_of_centroid,
        sigma2=sigma2,
        frame_rate=frame_rate,
    )


def save_segmenter(model: SegmenterModel, destination) -> None:
    """Write a SegmenterModel in the RNVS binary layout."""
    header = MODEL_HEADER.pack(
        MODEL_MAGIC,
        MODEL_VERSION,
        model.dim,
        model.k,
        float(model.frame_rate),
        float(model.sigma2),
    )
    type_codes = model.type_of_centroid.astype(np.uint8).tobytes()
    payload = model.centroids.astype("<f4").tobytes()
    Path(destination).write_bytes(header + type_codes + payload)


def load_segmenter(source) -> SegmenterModel:
    data = Path(source).read_bytes()
    if len(data) < MODEL_HEADER.size:
        raise ValueError(f"segmenter model file shorter than {MODEL_HEADER.size}-byte header")
    magic, version, dim, k, frame_rate, sigma2 = MODEL_HEADER.unpack_from(data, 0)
    if magic != MODEL_MAGIC:
        raise ValueError(f"bad segmenter model magic {magic!r}, expected {MODEL_MAGIC!r}")
    if version != MODEL_VERSION:
        raise ValueError(f"unsupported segmenter model version {version}")
    offset = MODEL_HEADER.size
    if len(data) < offset + k + k * dim * 4:
        raise ValueError("segmenter model file truncated")
    type_codes = np.frombuffer(data, dtype=np.uint8, count=k, offset=offset).astype(np.int64)
    offset += k
    centroids = np.frombuffer(data, dtype="<f4", count=k * dim, offset=offset)
    centroids = centroids.reshape(k, dim).copy()
    return SegmenterModel(
        centroids=centroids,
        type_of_centroid=type_codes,
        sigma2=sigma2,
        frame_rate=frame_rate,
    )
