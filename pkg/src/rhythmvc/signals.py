"""Minimal waveform utilities: PCM WAV reading and a per-frame silence/voicing flagger.

The flagger is the fallback used when feature files arrive without flags:
it marks a frame silent when its RMS falls 40 dB below the utterance's
95th-percentile frame RMS, and voiced when the normalized autocorrelation
peaks at or above 0.5 somewhere in the 60-400 Hz lag range. Flags only
vote on cluster labeling downstream, so a lightweight detector is enough.
"""

import math
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SILENCE_DB_BELOW_PEAK = 40.0
VOICING_THRESHOLD = 0.5
PITCH_MIN_HZ = 60.0
PITCH_MAX_HZ = 400.0


@dataclass
class Waveform:
    sample_rate: int
    samples: np.ndarray

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError("samples must be 1-D mono")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite")
        self.samples = samples


def read_wav(source) -> Waveform:
    """Read a RIFF PCM 16-bit mono WAV file, scaling samples into [-1, 1)."""
    source = Path(source)
    with wave.open(str(source), "rb") as handle:
        n_channels = handle.getnchannels()
        if n_channels != 1:
            raise ValueError(f"channels={n_channels} unsupported, expected mono")
        sampwidth = handle.getsampwidth()
        if sampwidth != 2:
            raise ValueError(f"sampwidth={sampwidth} unsupported, expected 16-bit PCM")
        comptype = handle.getcomptype()
        if comptype != "NONE":
            raise ValueError(f"comptype={comptype!r} unsupported, expected uncompressed PCM")
        sample_rate = handle.getframerate()
        raw = handle.readframes(handle.getnframes())
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return Waveform(sample_rate=sample_rate, samples=samples)


def write_wav(w: Waveform, destination) -> None:
    """Write a Waveform as PCM 16-bit mono, clipping to the int16 range."""
    scaled = np.clip(np.round(w.samples * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(destination), "wb") as handle:
        handle.setnchannels(1)
        handle.setsampwidth(2)
        handle.setframerate(w.sample_rate)
        handle.writeframes(scaled.tobytes())


def _window_bounds(t, hop, win_len):
    # Window of 2 hops centered on frame t; clipped at the signal start,
    # zero-padded past the end.
    start = int(round((t - 0.5) * hop))
    end = start + win_len
    return max(start, 0), end


def _normalized_autocorr_max(window, lag_min, lag_max):
    """Peak of the normalized autocorrelation over [lag_min, lag_max]."""
    n = len(window)
    if lag_min >= n:
        return 0.0
    lag_max = min(lag_max, n - 1)
    size = 1
    while size < 2 * n:
        size *= 2
    spectrum = np.fft.rfft(window, size)
    acf = np.fft.irfft(spectrum * np.conj(spectrum), size)[: n]
    energy = np.cumsum(window * window)
    total = energy[-1]
    if total <= 0.0:
        return 0.0
    best = 0.0
    lags = np.arange(lag_min, lag_max + 1)
    head = energy[n - lags - 1]
    tail = total - energy[lags - 1]
    denom = np.sqrt(head * tail)
    valid = denom > 0
    if np.any(valid):
        best = float(np.max(acf[lags[valid]] / denom[valid]))
    return best


def compute_frame_flags(w: Waveform, frame_rate: float) -> np.ndarray:
    """Per-frame (is_silence, is_voiced) flags for a waveform.

    Parameters
    ----------
    w : Waveform
        Mono waveform, non-empty.
    frame_rate : float
        Frames per second of the feature sequence the flags align with.

    Returns
    -------
    (ceil(n_samples / hop), 2) boolean array. is_silence and is_voiced are
    never simultaneously true.
    """
    if frame_rate <= 0:
        raise ValueError(f"frame_rate must be positive, got {frame_rate}")
    if len(w.samples) == 0:
        raise ValueError("waveform is empty")
    hop = w.sample_rate / frame_rate
    if hop < 1.0:
        raise ValueError(
            f"frame_rate {frame_rate} gives hop {hop:.3f} < 1 sample at {w.sample_rate} Hz"
        )
    n_samples = len(w.samples)
    n_frames = math.ceil(n_samples / hop)
    win_len = int(round(2 * hop))

    lag_min = max(1, int(math.floor(w.sample_rate / PITCH_MAX_HZ)))
    lag_max = max(lag_min, int(math.ceil(w.sample_rate / PITCH_MIN_HZ)))

    windows = []
    rms = np.empty(n_frames)
    for t in range(n_frames):
        start, end = _window_bounds(t, hop, win_len)
        window = w.samples[start:min(end, n_samples)]
        if end > n_samples:
            window = np.concatenate([window, np.zeros(end - n_samples)])
        windows.append(window)
        rms[t] = math.sqrt(float(np.mean(window * window))) if len(window) else 0.0

    gate = np.percentile(rms, 95) * 10.0 ** (-SILENCE_DB_BELOW_PEAK / 20.0)
    flags = np.zeros((n_frames, 2), dtype=bool)
    for t in range(n_frames):
        silent = rms[t] <= gate
        voiced = False
        if not silent:
            peak = _normalized_autocorr_max(windows[t], lag_min, lag_max)
            voiced = peak >= VOICING_THRESHOLD
        flags[t, 0] = silent
        flags[t, 1] = voiced
    return flags
