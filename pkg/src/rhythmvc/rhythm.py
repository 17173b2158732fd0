"""Per-speaker rhythm models and rhythm conversion by feature-space time stretching.

The global model is a single speaking rate, measured as sonorant segments per
second over all frames (silences included, since pausing behaviour is part of
what the rate should capture). The fine-grained model fits a two-parameter
gamma distribution to the segment durations of each speech type; conversion
maps each source segment through the source CDF and the target PPF so that a
segment keeps its duration's probability rank, then time-stretches it by
linear interpolation.

Durations are modeled in seconds so models transfer across frame rates.
"""

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.special import digamma, gammainc, gammaln, polygamma

from .featstore import FeatureSequence
from .segmenter import SpeechType

CDF_CLAMP_LO = 0.001
CDF_CLAMP_HI = 0.999
PPF_TOL = 1e-8

_TYPE_KEYS = {
    SpeechType.SILENCE: "silence",
    SpeechType.SONORANT: "sonorant",
    SpeechType.OBSTRUENT: "obstruent",
}


@dataclass
class GammaParams:
    shape: float
    scale: float
    n_samples: int

    def __post_init__(self):
        if self.shape <= 0:
            raise ValueError(f"shape must be positive, got {self.shape}")
        if self.scale <= 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        if self.n_samples < 2:
            raise ValueError(f"n_samples must be >= 2, got {self.n_samples}")

    @property
    def mean(self):
        return self.shape * self.scale


@dataclass
class RhythmModel:
    speaker: str
    frame_rate: float
    rate_sps: float
    fine: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.frame_rate <= 0:
            raise ValueError(f"frame_rate must be positive, got {self.frame_rate}")
        if self.rate_sps < 0:
            raise ValueError(f"rate_sps must be non-negative, got {self.rate_sps}")


@dataclass
class StretchPlan:
    """Per-segment stretch targets: ((speech_type, start, end), target frame count)."""

    items: list

    def __post_init__(self):
        prev_end = 0
        for (_, start, end), target in self.items:
            if start != prev_end:
                raise ValueError("stretch plan segments must tile the utterance")
            if target < 1:
                raise ValueError(f"target duration must be >= 1 frame, got {target}")
            prev_end = end

    def total_target_frames(self):
        return sum(target for _, target in self.items)


def _round_half_up(x):
    return int(math.floor(x + 0.5))


def estimate_speaking_rate(segmentations, frame_rate) -> float:
    """Sonorant segments per second across the given segmentations.

    The denominator is the total duration of all frames, silences included.
    A rate of 0 is returned with a warning when no sonorant segments exist;
    such a model cannot drive global conversion.
    """
    if not segmentations:
        raise ValueError("need at least one segmentation")
    total_frames = sum(s.n_frames for s in segmentations)
    if total_frames == 0:
        raise ValueError("total duration is zero")
    sonorants = sum(s.counts_by_type()[SpeechType.SONORANT] for s in segmentations)
    rate = sonorants / (total_frames / frame_rate)
    if rate == 0.0:
        warnings.warn("no sonorant segments found; speaking rate is 0 and blocks global conversion")
    return rate


def fit_gamma(durations) -> GammaParams:
    """Maximum-likelihood gamma fit with the location fixed at 0.

    The shape starts from the closed-form approximation
    k0 = (3 - s + sqrt((s - 3)^2 + 24 s)) / (12 s), with
    s = ln(mean) - mean(ln x), and is refined by Newton iterations on
    ln k - psi(k) = s until the update falls below 1e-10. The scale is
    mean / shape, so shape * scale always equals the sample mean.
    """
    durations = np.asarray(durations, dtype=np.float64)
    if durations.ndim != 1 or len(durations) < 2:
        raise ValueError(f"need at least 2 duration samples, got {durations.size}")
    if np.any(durations <= 0):
        raise ValueError("durations must all be positive")
    if np.all(durations == durations[0]):
        raise ValueError("durations have zero variance; cannot fit a gamma distribution")
    mean = float(durations.mean())
    s = math.log(mean) - float(np.mean(np.log(durations)))
    if s <= 0:
        raise ValueError("durations have zero variance; cannot fit a gamma distribution")

    k = (3.0 - s + math.sqrt((s - 3.0) ** 2 + 24.0 * s)) / (12.0 * s)
    for _ in range(100):
        f = math.log(k) - float(digamma(k)) - s
        fprime = 1.0 / k - float(polygamma(1, k))
        step = f / fprime
        k_new = k - step
        if k_new <= 0:
            k_new = k / 2.0
        if abs(k_new - k) < 1e-10:
            k = k_new
            break
        k = k_new
    return GammaParams(shape=k, scale=mean / k, n_samples=len(durations))


def gamma_pdf(p: GammaParams, x) -> float:
    """Density of the fitted gamma distribution; used by the PPF Newton step."""
    if x <= 0:
        return 0.0
    z = x / p.scale
    return float(np.exp((p.shape - 1.0) * np.log(z) - z - gammaln(p.shape)) / p.scale)


def gamma_cdf(p: GammaParams, x) -> float:
    """Regularized lower incomplete gamma P(shape, x / scale)."""
    if x < 0:
        raise ValueError(f"duration must be non-negative, got {x}")
    return float(gammainc(p.shape, x / p.scale))


def gamma_ppf(p: GammaParams, u) -> float:
    """Inverse of gamma_cdf, found by bracketed bisection with Newton polish.

    The returned x satisfies |gamma_cdf(p, x) - u| <= 1e-8.
    """
    if not 0.0 < u < 1.0:
        raise ValueError(f"probability must lie strictly inside (0, 1), got {u}")

    lo = 0.0
    hi = p.mean + 10.0 * p.scale * math.sqrt(p.shape)
    while gamma_cdf(p, hi) < u:
        hi *= 2.0

    x = min(max(p.mean, 1e-12), hi)
    for _ in range(200):
        err = gamma_cdf(p, x) - u
        if abs(err) <= PPF_TOL:
            return x
        if err < 0:
            lo = x
        else:
            hi = x
        density = gamma_pdf(p, x)
        if density > 0:
            x_new = x - err / float(density)
        else:
            x_new = 0.5 * (lo + hi)
        if not lo < x_new < hi:
            x_new = 0.5 * (lo + hi)
        x = x_new
    return x


def time_stretch(frames, t_out) -> np.ndarray:
    """Resample a frame matrix to ``t_out`` frames by linear interpolation.

    Output frame i samples position i * (T_in - 1) / (T_out - 1); the first
    and last frames are preserved bit-exactly, and t_out == T_in returns the
    input unchanged. t_out == 1 returns the first frame.
    """
    frames = np.asarray(frames)
    if frames.ndim != 2 or frames.shape[0] < 1:
        raise ValueError("frames must be a non-empty T x dim matrix")
    if t_out < 1:
        raise ValueError(f"output length must be >= 1, got {t_out}")
    t_in = frames.shape[0]
    if t_out == t_in:
        return frames.copy()
    if t_out == 1 or t_in == 1:
        return np.repeat(frames[:1], t_out, axis=0)

    positions = np.arange(t_out, dtype=np.float64) * (t_in - 1) / (t_out - 1)
    lower = np.floor(positions).astype(np.int64)
    lower = np.minimum(lower, t_in - 2)
    frac = (positions - lower)[:, None]
    out = frames[lower] * (1.0 - frac) + frames[lower + 1] * frac
    out = out.astype(frames.dtype, copy=False)
    out[0] = frames[0]
    out[-1] = frames[-1]
    return out


def convert_global(seq: FeatureSequence, src: RhythmModel, tgt: RhythmModel) -> FeatureSequence:
    """Stretch a whole utterance by the ratio of source to target speaking rate."""
    if src.rate_sps <= 0 or tgt.rate_sps <= 0:
        raise ValueError(
            f"global conversion needs positive speaking rates, got {src.rate_sps} and {tgt.rate_sps}"
        )
    if src.rate_sps == tgt.rate_sps:
        return seq
    t_out = max(1, _round_half_up(seq.n_frames * src.rate_sps / tgt.rate_sps))
    return FeatureSequence(frame_rate=seq.frame_rate, frames=time_stretch(seq.frames, t_out))


def plan_fine_stretch(seq: FeatureSequence, segmentation, src: RhythmModel, tgt: RhythmModel) -> StretchPlan:
    """Map each segment's duration through source CDF and target PPF.

    The CDF value is clamped to [0.001, 0.999] first, so outlier segments
    cannot demand unbounded target durations. Targets are rounded to the
    nearest frame, minimum 1.
    """
    if segmentation.n_frames != seq.n_frames:
        raise ValueError("segmentation must tile the sequence")
    items = []
    for speech_type, start, end in segmentation.segments:
        src_params = src.fine.get(speech_type)
        tgt_params = tgt.fine.get(speech_type)
        if src_params is None or tgt_params is None:
            raise ValueError(
                f"missing gamma duration parameters for {speech_type.name} "
                "in the source or target model"
            )
        duration = (end - start) / seq.frame_rate
        u = min(max(gamma_cdf(src_params, duration), CDF_CLAMP_LO), CDF_CLAMP_HI)
        target_seconds = gamma_ppf(tgt_params, u)
        target_frames = max(1, _round_half_up(target_seconds * seq.frame_rate))
        items.append(((speech_type, start, end), target_frames))
    return StretchPlan(items=items)


def convert_fine(seq: FeatureSequence, segmentation, src: RhythmModel, tgt: RhythmModel) -> FeatureSequence:
    """Stretch each segment independently to its rank-preserved target duration."""
    plan = plan_fine_stretch(seq, segmentation, src, tgt)
    pieces = [
        time_stretch(seq.frames[start:end], target)
        for (_, start, end), target in plan.items
    ]
    return FeatureSequence(frame_rate=seq.frame_rate, frames=np.concatenate(pieces, axis=0))


def build_rhythm_model(speaker, segmentations, frame_rate) -> RhythmModel:
    """Fit the global rate and per-type gamma distributions from segmentations.

    Types with fewer than two segments, or with degenerate durations, get no
    fine-grained parameters; a warning names each one.
    """
    rate = estimate_speaking_rate(segmentations, frame_rate)
    durations = {t: [] for t in SpeechType}
    for segmentation in segmentations:
        for speech_type, dur_list in segmentation.durations_by_type(frame_rate).items():
            durations[speech_type].extend(dur_list)

    fine = {}
    for speech_type, values in durations.items():
        if len(values) < 2:
            warnings.warn(
                f"{speech_type.name}: only {len(values)} segment(s); "
                "no duration distribution fitted"
            )
            continue
        try:
            fine[speech_type] = fit_gamma(values)
        except ValueError as exc:
            warnings.warn(f"{speech_type.name}: {exc}; no duration distribution fitted")
    return RhythmModel(speaker=speaker, frame_rate=frame_rate, rate_sps=rate, fine=fine)


def save_rhythm_model(model: RhythmModel, destination) -> None:
    obj = {
        "speaker": model.speaker,
        "frame_rate": model.frame_rate,
        "rate_sps": model.rate_sps,
    }
    if model.fine:
        obj["fine"] = {
            _TYPE_KEYS[speech_type]: {
                "shape": params.shape,
                "scale": params.scale,
                "n": params.n_samples,
            }
            for speech_type, params in model.fine.items()
        }
    Path(destination).write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def load_rhythm_model(source) -> RhythmModel:
    obj = json.loads(Path(source).read_text(encoding="utf-8"))
    fine = {}
    for speech_type, key in _TYPE_KEYS.items():
        entry = obj.get("fine", {}).get(key)
        if entry is not None:
            fine[speech_type] = GammaParams(
                shape=entry["shape"], scale=entry["scale"], n_samples=entry["n"]
            )
    return RhythmModel(
        speaker=obj["speaker"],
        frame_rate=obj["frame_rate"],
        rate_sps=obj["rate_sps"],
        fine=fine,
    )
