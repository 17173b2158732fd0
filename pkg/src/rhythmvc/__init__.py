"""Unsupervised rhythm and voice conversion in self-supervised feature space.

The engine segments speech into silence / sonorant / obstruent runs, remaps
segment durations onto a target speaker's rhythm model, and replaces frames
by k-nearest-neighbor matching against a target frame bank, plus the
speaking-rate analysis and WER tooling used to evaluate the result.
"""

from .featstore import FeatureSequence, UtteranceRecord, read_manifest, read_rnvf, write_rnvf
from .knnvc import MatchingPool, build_pool, convert_sequence
from .pipeline import ConversionSetup, EvalReport, aggregate_report, analyze_rhythm, run_conversion, score_wer
from .rhythm import (
    GammaParams,
    RhythmModel,
    convert_fine,
    convert_global,
    estimate_speaking_rate,
    fit_gamma,
    gamma_cdf,
    gamma_ppf,
    time_stretch,
)
from .segmenter import (
    Segmentation,
    SegmenterModel,
    SpeechType,
    class_log_probs,
    kmeans_fit,
    segment_dp,
    train_segmenter,
    ward_cluster_centroids,
)
from .signals import Waveform, compute_frame_flags, read_wav

__version__ = "0.1.0"
