"""Codebook training, 3-way grouping, type assignment, and DP segmentation."""

import numpy as np
import pytest

from conftest import cycle_plan, make_planted_sequence
from rhythmvc import featstore, segmenter
from rhythmvc.segmenter import (
    Segmentation,
    SegmenterModel,
    SpeechType,
    TrainingDataError,
    _kmeans_pp_init,
    _squared_distances,
    assign_speech_types,
    class_log_probs,
    kmeans_fit,
    load_segmenter,
    save_segmenter,
    segment_dp,
    segment_sequence,
    train_segmenter,
    ward_cluster_centroids,
)


def _inertia(frames, centers):
    """Direct-form inertia; exact (no cancellation) when points sit on centers."""
    diffs = frames[:, None, :] - centers[None, :, :]
    d = np.einsum("nkd,nkd->nk", diffs, diffs)
    return float(d.min(axis=1).sum())


def _enumerate_best(log_probs, gamma):
    """Exhaustive DP oracle: every boundary set, best label per segment."""
    n = len(log_probs)
    best = -np.inf
    for mask in range(1 << (n - 1)):
        bounds = [0] + [i + 1 for i in range(n - 1) if mask >> i & 1] + [n]
        total = 0.0
        for a, b in zip(bounds[:-1], bounds[1:]):
            total += log_probs[a:b].sum(axis=0).max()
        total -= gamma * (len(bounds) - 1)
        if total > best:
            best = total
    return best


def _objective(segmentation, log_probs, gamma):
    total = 0.0
    for speech_type, start, end in segmentation.segments:
        total += log_probs[start:end, int(speech_type)].sum()
    return total - gamma * len(segmentation.segments)


class TestKMeans:
    def test_each_point_its_own_centroid(self):
        rng = np.random.default_rng(0)
        frames = rng.standard_normal((100, 5))
        centers, assignment = kmeans_fit(frames, k=100, seed=1)
        assert _inertia(frames, centers) < 1e-18
        assert sorted(assignment) == list(range(100))

    def test_recovers_separated_blobs(self):
        """Three blobs (sigma 0.1, centers 10 apart): centroids land on blob means."""
        rng = np.random.default_rng(1)
        blob_centers = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]])
        points = np.concatenate(
            [c + 0.1 * rng.standard_normal((50, 2)) for c in blob_centers]
        )
        blob_means = np.stack([points[i * 50 : (i + 1) * 50].mean(axis=0) for i in range(3)])
        centers, _ = kmeans_fit(points, k=3, seed=0)
        # match each blob mean to its closest centroid
        for mean in blob_means:
            assert np.min(np.linalg.norm(centers - mean, axis=1)) < 0.1

    def test_deterministic_for_fixed_seed(self):
        rng = np.random.default_rng(2)
        frames = rng.standard_normal((400, 6))
        a, assign_a = kmeans_fit(frames, k=100, seed=7)
        b, assign_b = kmeans_fit(frames, k=100, seed=7)
        np.testing.assert_array_equal(a, b)
        np.testing.assert_array_equal(assign_a, assign_b)

    def test_inertia_not_above_initialization(self):
        rng = np.random.default_rng(3)
        frames = rng.standard_normal((300, 4))
        for seed in range(5):
            init = _kmeans_pp_init(frames, 10, np.random.default_rng(seed))
            final, _ = kmeans_fit(frames, k=10, seed=seed)
            assert _inertia(frames, final) <= _inertia(frames, init) + 1e-9

    def test_too_few_frames_rejected(self):
        with pytest.raises(ValueError):
            kmeans_fit(np.zeros((3, 2)), k=4, seed=0)

    def test_duplicate_heavy_data_still_yields_k_centroids(self):
        # more centroids than distinct values forces the empty-cluster path
        frames = np.array([[0.0], [0.0], [0.0], [0.0], [10.0]])
        centers, assignment = kmeans_fit(frames, k=3, seed=0)
        assert centers.shape == (3, 1)
        assert np.all(np.isfinite(centers))
        assert np.all((assignment >= 0) & (assignment < 3))
        # two distinct values, three centroids: the fit must still be exact
        assert np.all(centers[assignment, 0] == frames[:, 0])


class TestWard:
    def test_bundle_ground_truth(self):
        rng = np.random.default_rng(4)
        bundles = [np.array([0.0, 0.0]), np.array([50.0, 0.0]), np.array([0.0, 50.0])]
        centroids = np.concatenate(
            [b + 0.5 * rng.standard_normal((8, 2)) for b in bundles]
        )
        labels = ward_cluster_centroids(centroids, n_groups=3)
        for i in range(3):
            bundle_labels = labels[i * 8 : (i + 1) * 8]
            assert len(set(bundle_labels.tolist())) == 1
        assert len(set(labels.tolist())) == 3

    def test_k_equals_groups(self):
        labels = ward_cluster_centroids(np.eye(3), n_groups=3)
        assert sorted(labels.tolist()) == [0, 1, 2]

    def test_duplicates_share_a_group(self):
        centroids = np.array([[0.0, 0.0], [5.0, 5.0], [0.0, 0.0], [9.0, 1.0], [5.0, 5.0]])
        labels = ward_cluster_centroids(centroids, n_groups=3)
        assert labels[0] == labels[2]
        assert labels[1] == labels[4]

    def test_too_few_centroids_rejected(self):
        with pytest.raises(ValueError):
            ward_cluster_centroids(np.zeros((2, 2)), n_groups=3)

    def test_deterministic(self):
        rng = np.random.default_rng(5)
        centroids = rng.standard_normal((30, 3))
        a = ward_cluster_centroids(centroids.copy())
        b = ward_cluster_centroids(centroids.copy())
        np.testing.assert_array_equal(a, b)

    def test_labels_numbered_by_first_occurrence(self):
        rng = np.random.default_rng(6)
        bundles = [np.array([0.0]), np.array([100.0]), np.array([200.0])]
        centroids = np.concatenate([b + 0.01 * rng.standard_normal((4, 1)) for b in bundles])
        labels = ward_cluster_centroids(centroids, n_groups=3)
        assert labels[0] == 0
        assert labels[4] == 1
        assert labels[8] == 2


class TestAssignSpeechTypes:
    def test_forced_by_overlap_rule(self):
        # group 0: 90% silent; group 1: 80% voiced; group 2: neither
        groups = np.repeat([0, 1, 2], 100)
        flags = np.zeros((300, 2), dtype=bool)
        flags[:90, 0] = True
        flags[100:180, 1] = True
        flags[200:210, 1] = True
        assignment = assign_speech_types(groups, flags)
        assert assignment[0] == SpeechType.SILENCE
        assert assignment[1] == SpeechType.SONORANT
        assert assignment[2] == SpeechType.OBSTRUENT

    def test_silence_tie_rejected(self):
        groups = np.repeat([0, 1, 2], 10)
        flags = np.zeros((30, 2), dtype=bool)
        flags[:9, 0] = True  # group 0: 0.9 silent
        flags[10:19, 0] = True  # group 1: 0.9 silent
        flags[20, 0] = True  # group 2: 0.1 silent
        with pytest.raises(TrainingDataError):
            assign_speech_types(groups, flags)

    def test_voiced_tie_rejected(self):
        groups = np.repeat([0, 1, 2], 10)
        flags = np.zeros((30, 2), dtype=bool)
        flags[:9, 0] = True
        flags[10:15, 1] = True
        flags[20:25, 1] = True
        with pytest.raises(TrainingDataError):
            assign_speech_types(groups, flags)

    def test_planted_structure_recovered(self):
        """Randomized corpus with overlaps at least 0.2 apart recovers the plant."""
        rng = np.random.default_rng(8)
        for _ in range(20):
            sizes = rng.integers(50, 150, size=3)
            groups = np.repeat([0, 1, 2], sizes)
            flags = np.zeros((sizes.sum(), 2), dtype=bool)
            offsets = np.concatenate([[0], np.cumsum(sizes)])
            # plant: group 1 mostly silent, group 2 mostly voiced, group 0 neither
            s0, s1, s2 = offsets[0], offsets[1], offsets[2]
            flags[s1 : s1 + int(0.8 * sizes[1]), 0] = True
            flags[s2 : s2 + int(0.7 * sizes[2]), 1] = True
            flags[s0 : s0 + int(0.3 * sizes[0]), 1] = True
            assignment = assign_speech_types(groups, flags)
            assert assignment[1] == SpeechType.SILENCE
            assert assignment[2] == SpeechType.SONORANT
            assert assignment[0] == SpeechType.OBSTRUENT


def _toy_model(sigma2=1.0):
    centroids = np.array(
        [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0], [10.0, 10.0]], dtype=np.float32
    )
    types = np.array([0, 1, 2, 1])
    return SegmenterModel(centroids=centroids, type_of_centroid=types, sigma2=sigma2, frame_rate=50.0)


class TestClassLogProbs:
    def test_dominated_softmax(self):
        model = _toy_model(sigma2=0.5)
        seq = featstore.FeatureSequence(
            frame_rate=50.0, frames=np.array([[10.0, 0.0]], dtype=np.float32)
        )
        probs = np.exp(class_log_probs(model, seq))
        assert probs[0, SpeechType.SONORANT] >= 0.99

    def test_equidistant_classes_tie(self):
        centroids = np.array([[0.0, 0.0], [2.0, 0.0], [50.0, 50.0]], dtype=np.float32)
        model = SegmenterModel(
            centroids=centroids,
            type_of_centroid=np.array([0, 1, 2]),
            sigma2=1.0,
            frame_rate=50.0,
        )
        seq = featstore.FeatureSequence(
            frame_rate=50.0, frames=np.array([[1.0, 0.0]], dtype=np.float32)
        )
        log_probs = class_log_probs(model, seq)
        assert abs(log_probs[0, 0] - log_probs[0, 1]) < 1e-9

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(9)
        centroids = rng.standard_normal((12, 4))
        types = np.array([0, 1, 2] * 4)
        model = SegmenterModel(
            centroids=centroids, type_of_centroid=types, sigma2=0.7, frame_rate=50.0
        )
        seq = featstore.FeatureSequence(
            frame_rate=50.0, frames=rng.standard_normal((40, 4)).astype(np.float32)
        )
        sums = np.exp(class_log_probs(model, seq)).sum(axis=1)
        np.testing.assert_allclose(sums, 1.0, atol=1e-6)

    def test_probability_floor(self):
        model = _toy_model(sigma2=0.01)
        # frame far from every silence/obstruent centroid: their probabilities
        # underflow and must be floored, not -inf
        seq = featstore.FeatureSequence(
            frame_rate=50.0, frames=np.array([[10.0, 0.0]], dtype=np.float32)
        )
        log_probs = class_log_probs(model, seq)
        assert np.all(np.isfinite(log_probs))
        assert np.all(log_probs >= np.log(1e-10) - 1e-12)

    def test_invariant_to_centroid_order_within_class(self):
        rng = np.random.default_rng(10)
        centroids = rng.standard_normal((6, 3))
        types = np.array([0, 1, 1, 2, 2, 0])
        model = SegmenterModel(
            centroids=centroids, type_of_centroid=types, sigma2=1.0, frame_rate=50.0
        )
        # swap the two sonorant centroids (indices 1, 2) and the two silences (0, 5)
        permuted = centroids[[5, 2, 1, 3, 4, 0]]
        model_permuted = SegmenterModel(
            centroids=permuted, type_of_centroid=types, sigma2=1.0, frame_rate=50.0
        )
        seq = featstore.FeatureSequence(
            frame_rate=50.0, frames=rng.standard_normal((10, 3)).astype(np.float32)
        )
        np.testing.assert_allclose(
            class_log_probs(model, seq), class_log_probs(model_permuted, seq), atol=1e-12
        )

    def test_dim_mismatch_rejected(self):
        model = _toy_model()
        seq = featstore.FeatureSequence(
            frame_rate=50.0, frames=np.zeros((2, 3), dtype=np.float32)
        )
        with pytest.raises(ValueError):
            class_log_probs(model, seq)


class TestSegmentDP:
    def test_strong_preference_yields_single_segment(self):
        log_probs = np.full((20, 3), -20.0)
        log_probs[:, 1] = -0.01
        seg = segment_dp(log_probs, gamma=3.0)
        assert seg.segments == [(SpeechType.SONORANT, 0, 20)]

    def test_gamma_zero_is_per_frame_argmax(self):
        rng = np.random.default_rng(11)
        log_probs = np.log(rng.dirichlet(np.ones(3), size=30))
        seg = segment_dp(log_probs, gamma=0.0)
        argmax = np.argmax(log_probs, axis=1)
        labels = np.empty(30, dtype=np.int64)
        for speech_type, start, end in seg.segments:
            labels[start:end] = int(speech_type)
        np.testing.assert_array_equal(labels, argmax)

    def test_objective_matches_enumeration(self):
        """Module-level version of the exhaustive-oracle criterion."""
        rng = np.random.default_rng(12)
        for trial in range(60):
            n = int(rng.integers(1, 11))
            # dyadic rationals make prefix-sum arithmetic exact in float64
            log_probs = rng.integers(-512, 0, size=(n, 3)) / 64.0
            gamma = [0.0, 1.0, 3.0][trial % 3]
            seg = segment_dp(log_probs, gamma)
            assert _objective(seg, log_probs, gamma) == _enumerate_best(log_probs, gamma)

    def test_output_tiles_and_alternates(self):
        rng = np.random.default_rng(13)
        for _ in range(25):
            n = int(rng.integers(1, 60))
            log_probs = np.log(rng.dirichlet(np.ones(3), size=n))
            seg = segment_dp(log_probs, gamma=float(rng.uniform(0, 4)))
            assert seg.segments[0][1] == 0
            assert seg.segments[-1][2] == n
            for (t1, _, e1), (t2, s2, _) in zip(seg.segments, seg.segments[1:]):
                assert e1 == s2
                assert t1 != t2

    def test_segment_count_nonincreasing_in_gamma(self):
        rng = np.random.default_rng(14)
        for _ in range(10):
            log_probs = np.log(rng.dirichlet(np.ones(3), size=50))
            counts = [
                len(segment_dp(log_probs, g).segments) for g in (0.0, 0.5, 1.0, 2.0, 4.0, 8.0)
            ]
            assert all(a >= b for a, b in zip(counts, counts[1:]))

    def test_single_frame(self):
        log_probs = np.array([[-5.0, -1.0, -3.0]])
        seg = segment_dp(log_probs, gamma=3.0)
        assert seg.segments == [(SpeechType.SONORANT, 0, 1)]


class TestSegmentationType:
    def test_gap_rejected(self):
        with pytest.raises(ValueError):
            Segmentation(segments=[(SpeechType.SILENCE, 0, 5), (SpeechType.SONORANT, 6, 9)])

    def test_empty_segment_rejected(self):
        with pytest.raises(ValueError):
            Segmentation(segments=[(SpeechType.SILENCE, 0, 0)])

    def test_adjacent_equal_types_rejected(self):
        with pytest.raises(ValueError):
            Segmentation(segments=[(SpeechType.SILENCE, 0, 5), (SpeechType.SILENCE, 5, 9)])

    def test_durations_by_type(self):
        seg = Segmentation(
            segments=[
                (SpeechType.SILENCE, 0, 10),
                (SpeechType.SONORANT, 10, 35),
                (SpeechType.SILENCE, 35, 40),
            ]
        )
        durations = seg.durations_by_type(50.0)
        assert durations[SpeechType.SILENCE] == [0.2, 0.1]
        assert durations[SpeechType.SONORANT] == [0.5]
        assert durations[SpeechType.OBSTRUENT] == []


class TestTraining:
    def test_planted_corpus_recovered(self):
        """Types learned from flags transfer to a held-out utterance."""
        sequences = [
            make_planted_sequence(i, cycle_plan(100 + i, (5, 15), (4, 10), (10, 25)))
            for i in range(6)
        ]
        model = train_segmenter(sequences, [s.flags for s in sequences], k=12, seed=0)
        held_out_plan = cycle_plan(999, (5, 15), (4, 10), (10, 25))
        held_out = make_planted_sequence(77, held_out_plan)
        seg = segment_sequence(model, held_out, gamma=3.0)
        expected = [(SpeechType(t), n) for t, n in held_out_plan]
        got = [(t, e - s) for t, s, e in seg.segments]
        assert got == expected

    def test_sigma2_positive(self):
        sequences = [make_planted_sequence(0, [(0, 30), (1, 30), (2, 30)])]
        model = train_segmenter(sequences, [sequences[0].flags], k=6, seed=0)
        assert model.sigma2 > 0

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            train_segmenter([], [], k=5, seed=0)

    def test_flag_count_mismatch_rejected(self):
        seq = make_planted_sequence(0, [(0, 10), (1, 10), (2, 10)])
        with pytest.raises(ValueError):
            train_segmenter([seq], [seq.flags[:-1]], k=3, seed=0)

    def test_mixed_frame_rates_rejected(self):
        a = make_planted_sequence(0, [(0, 10), (1, 10), (2, 10)])
        b = featstore.FeatureSequence(frame_rate=25.0, frames=a.frames, flags=a.flags)
        with pytest.raises(ValueError):
            train_segmenter([a, b], [a.flags, b.flags], k=3, seed=0)


class TestModelFile:
    def test_round_trip_bit_exact(self, tmp_path):
        sequences = [
            make_planted_sequence(i, cycle_plan(50 + i, (5, 15), (4, 10), (10, 25)))
            for i in range(4)
        ]
        model = train_segmenter(sequences, [s.flags for s in sequences], k=9, seed=3)
        path = tmp_path / "m.rnvs"
        save_segmenter(model, path)
        back = load_segmenter(path)
        np.testing.assert_array_equal(back.centroids, model.centroids)
        np.testing.assert_array_equal(back.type_of_centroid, model.type_of_centroid)
        assert back.sigma2 == model.sigma2
        assert back.frame_rate == model.frame_rate
        # a second save must reproduce the file byte for byte
        save_segmenter(back, tmp_path / "m2.rnvs")
        assert (tmp_path / "m.rnvs").read_bytes() == (tmp_path / "m2.rnvs").read_bytes()

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.rnvs"
        model = _toy_model()
        save_segmenter(model, path)
        data = bytearray(path.read_bytes())
        data[:4] = b"ZZZZ"
        path.write_bytes(bytes(data))
        with pytest.raises(ValueError, match="magic"):
            load_segmenter(path)

    def test_truncation_rejected(self, tmp_path):
        path = tmp_path / "t.rnvs"
        save_segmenter(_toy_model(), path)
        data = path.read_bytes()
        path.write_bytes(data[:-5])
        with pytest.raises(ValueError, match="truncated"):
            load_segmenter(path)

    def test_model_invariants_enforced(self):
        with pytest.raises(ValueError):
            SegmenterModel(
                centroids=np.zeros((3, 2)),
                type_of_centroid=np.array([0, 0, 1]),  # no obstruent
                sigma2=1.0,
                frame_rate=50.0,
            )
        with pytest.raises(ValueError):
            SegmenterModel(
                centroids=np.zeros((3, 2)),
                type_of_centroid=np.array([0, 1, 2]),
                sigma2=0.0,
                frame_rate=50.0,
            )
