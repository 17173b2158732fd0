"""Feature-sequence storage: the RNVF binary format and line-delimited corpus manifests.

RNVF layout (little-endian):

    magic "RNVF" | version u32 | frame_rate f32 | dim u32 | n_frames u32
    | flags_present u8 | n_frames * dim f32 frames (frame-major)
    | if flags_present: n_frames bytes, bit0 = is_silence, bit1 = is_voiced

The format is deliberately dumb so that any producer (feature extractors,
conversion stages) and any consumer share one bit-exact contract.
"""

import json
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

MAGIC = b"RNVF"
VERSION = 1
HEADER = struct.Struct("<4sIfIIB")

SEVERITIES = ("control", "mild", "moderate", "mod-severe", "severe", "unknown")


class FormatError(ValueError):
    """Base class for RNVF parsing failures. ``offset`` is the failing byte offset."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class BadMagic(FormatError):
    pass


class UnsupportedVersion(FormatError):
    pass


class Truncated(FormatError):
    pass


class ManifestError(ValueError):
    pass


@dataclass
class FeatureSequence:
    """Time-major matrix of feature frames with a frame rate and optional flags.

    frames is an (n_frames, dim) float32 array. flags, when present, is an
    (n_frames, 2) boolean array of (is_silence, is_voiced) pairs.
    """

    frame_rate: float
    frames: np.ndarray
    flags: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.frame_rate <= 0:
            raise ValueError(f"frame_rate must be positive, got {self.frame_rate}")
        frames = np.asarray(self.frames, dtype=np.float32)
        if frames.ndim != 2:
            raise ValueError(f"frames must be 2-D (n_frames, dim), got shape {frames.shape}")
        if frames.shape[1] < 1:
            raise ValueError("feature dimensionality must be at least 1")
        if not np.all(np.isfinite(frames)):
            raise ValueError("frames must be finite")
        self.frames = frames
        if self.flags is not None:
            flags = np.asarray(self.flags, dtype=bool)
            if flags.shape != (frames.shape[0], 2):
                raise ValueError(
                    f"flags must have shape ({frames.shape[0]}, 2), got {flags.shape}"
                )
            self.flags = flags

    @property
    def n_frames(self):
        return self.frames.shape[0]

    @property
    def dim(self):
        return self.frames.shape[1]

    def duration(self):
        """Length in seconds."""
        return self.n_frames / self.frame_rate

    def __eq__(self, other):
        if not isinstance(other, FeatureSequence):
            return NotImplemented
        if self.frame_rate != other.frame_rate:
            return False
        if self.frames.shape != other.frames.shape:
            return False
        if not np.array_equal(self.frames, other.frames):
            return False
        if (self.flags is None) != (other.flags is None):
            return False
        if self.flags is not None and not np.array_equal(self.flags, other.flags):
            return False
        return True


@dataclass
class UtteranceRecord:
    id: str
    speaker: str
    severity: str
    feature_path: Path
    audio_path: Optional[Path] = None
    transcript: Optional[str] = None


def normalize_severity(value):
    """Map a severity string onto the closed set, case-insensitively.

    Unrecognized values become "unknown" with a warning so partially
    labeled corpora stay usable.
    """
    norm = str(value).strip().lower()
    if norm in SEVERITIES:
        return norm
    warnings.warn(f"unrecognized severity {value!r}, treating as 'unknown'")
    return "unknown"


def write_rnvf(seq: FeatureSequence, destination) -> None:
    """Write a FeatureSequence to ``destination`` in the RNVF layout.

    Byte-deterministic for identical input; the invariants of ``seq`` are
    re-checked before any bytes are written.
    """
    destination = Path(destination)
    frames = np.ascontiguousarray(seq.frames, dtype=np.float32)
    if frames.ndim != 2:
        raise ValueError("frames must be 2-D")
    n_frames, dim = frames.shape
    flags_present = seq.flags is not None
    if flags_present and seq.flags.shape != (n_frames, 2):
        raise ValueError("flag count must equal frame count")

    header = HEADER.pack(MAGIC, VERSION, float(seq.frame_rate), dim, n_frames, int(flags_present))
    payload = frames.astype("<f4", copy=False).tobytes()
    parts = [header, payload]
    if flags_present:
        packed = seq.flags[:, 0].astype(np.uint8) | (seq.flags[:, 1].astype(np.uint8) << 1)
        parts.append(packed.tobytes())
    destination.write_bytes(b"".join(parts))


def read_rnvf(source) -> FeatureSequence:
    """Read an RNVF file, validating magic, version and payload size.

    Never allocates more than the header-declared n_frames * dim values.
    """
    source = Path(source)
    data = source.read_bytes()
    if len(data) < HEADER.size:
        raise Truncated(f"file shorter than {HEADER.size}-byte header", len(data))
    magic, version, frame_rate, dim, n_frames, flags_present = HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}, expected {MAGIC!r}", 0)
    if version != VERSION:
        raise UnsupportedVersion(f"unsupported version {version}", 4)
    if dim < 1:
        raise FormatError(f"dim must be >= 1, got {dim}", 12)

    offset = HEADER.size
    payload_bytes = n_frames * dim * 4
    if len(data) < offset + payload_bytes:
        raise Truncated(
            f"payload needs {payload_bytes} bytes, file has {len(data) - offset}", len(data)
        )
    frames = np.frombuffer(data, dtype="<f4", count=n_frames * dim, offset=offset)
    frames = frames.reshape(n_frames, dim).copy()
    offset += payload_bytes

    flags = None
    if flags_present:
        if len(data) < offset + n_frames:
            raise Truncated(
                f"flag block needs {n_frames} bytes, file has {len(data) - offset}", len(data)
            )
        packed = np.frombuffer(data, dtype=np.uint8, count=n_frames, offset=offset)
        flags = np.stack([(packed & 1).astype(bool), ((packed >> 1) & 1).astype(bool)], axis=1)
    return FeatureSequence(frame_rate=frame_rate, frames=frames, flags=flags)


def read_manifest(source) -> list[UtteranceRecord]:
    """Read a line-delimited JSON manifest into UtteranceRecords.

    One record per non-empty line, order preserved. Raises ManifestError
    naming the line number for malformed lines and on duplicate ids.
    """
    source = Path(source)
    records = []
    seen = set()
    with source.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise ManifestError(f"line {lineno}: expected a JSON object")
            for key in ("id", "speaker", "severity", "feature_path"):
                if key not in obj:
                    raise ManifestError(f"line {lineno}: missing required field {key!r}")
            if obj["id"] in seen:
                raise ManifestError(f"line {lineno}: duplicate id {obj['id']!r}")
            seen.add(obj["id"])
            records.append(
                UtteranceRecord(
                    id=str(obj["id"]),
                    speaker=str(obj["speaker"]),
                    severity=normalize_severity(obj["severity"]),
                    feature_path=Path(obj["feature_path"]),
                    audio_path=Path(obj["audio_path"]) if obj.get("audio_path") else None,
                    transcript=obj.get("transcript"),
                )
            )
    return records


def write_manifest(records, destination) -> None:
    """Inverse of read_manifest; used by tooling that materializes corpora."""
    lines = []
    for rec in records:
        obj = {
            "id": rec.id,
            "speaker": rec.speaker,
            "severity": rec.severity,
            "feature_path": str(rec.feature_path),
        }
        if rec.audio_path is not None:
            obj["audio_path"] = str(rec.audio_path)
        if rec.transcript is not None:
            obj["transcript"] = rec.transcript
        lines.append(json.dumps(obj))
    Path(destination).write_text("\n".join(lines) + "\n", encoding="utf-8")
