"""End-to-end conversion runs, WER scoring, and rhythm-analysis reporting.

Conversion setups mirror the experimental grid: untouched features, a
vocoder-identity pass, rhythm conversion (global or fine-grained), frame
matching, and their compositions with rhythm applied before voice. In this
engine "vocoded" is an identity feature transform; the encode/resynthesize
difference only exists once audio-domain models run, which happens in the
model bridge, not here.
"""

import enum
import hashlib
import json
import os
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import knnvc, rhythm, segmenter
from .featstore import read_rnvf, write_rnvf
from .segmenter import SegmenterModel, SpeechType

_WORD_RE = re.compile(r"[^a-z0-9']+")


class ConversionSetup(enum.Enum):
    ORIGINAL = "original"
    VOCODED = "vocoded"
    RHYTHM_GLOBAL = "rhythm-global"
    RHYTHM_FINE = "rhythm-fine"
    VC = "vc"
    RHYTHM_GLOBAL_VC = "rhythm-global-vc"
    RHYTHM_FINE_VC = "rhythm-fine-vc"

    @property
    def uses_global(self):
        return self in (ConversionSetup.RHYTHM_GLOBAL, ConversionSetup.RHYTHM_GLOBAL_VC)

    @property
    def uses_fine(self):
        return self in (ConversionSetup.RHYTHM_FINE, ConversionSetup.RHYTHM_FINE_VC)

    @property
    def uses_vc(self):
        return self in (
            ConversionSetup.VC,
            ConversionSetup.RHYTHM_GLOBAL_VC,
            ConversionSetup.RHYTHM_FINE_VC,
        )


class ConfigurationError(ValueError):
    """A conversion setup is missing one of its required models."""


@dataclass
class UtteranceScore:
    id: str
    reference: str
    hypothesis: str
    substitutions: int
    deletions: int
    insertions: int
    n_ref_words: int

    @property
    def errors(self):
        return self.substitutions + self.deletions + self.insertions

    @property
    def wer(self):
        return self.errors / max(1, self.n_ref_words)


@dataclass
class EvalReport:
    per_utterance: list
    by_severity: dict
    overall_wer: float
    overall_errors: int
    overall_ref_words: int


@dataclass
class SpeakerRhythm:
    speaker: str
    severity: str
    n_utterances: int
    total_seconds: float
    rate_sps: float
    segment_counts: dict
    fine: dict


@dataclass
class RunResult:
    setup: ConversionSetup
    output_paths: list
    skipped: list = field(default_factory=list)
    run_manifest_path: Path = None


def normalize_text(text) -> list:
    """Lowercase, strip everything outside [a-z0-9'], collapse whitespace, tokenize."""
    return [tok for tok in _WORD_RE.sub(" ", text.lower()).split() if tok]


def score_wer(reference, hypothesis):
    """Token-level Levenshtein alignment counts (S, D, I, n_ref).

    Both texts pass through normalize_text first. Costs are unit; where an
    optimal alignment is ambiguous the backtrace prefers substitution, then
    deletion, then insertion, which keeps counts deterministic.
    """
    ref = normalize_text(reference)
    hyp = normalize_text(hypothesis)
    n, m = len(ref), len(hyp)

    dist = np.zeros((n + 1, m + 1), dtype=np.int64)
    dist[:, 0] = np.arange(n + 1)
    dist[0, :] = np.arange(m + 1)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            sub = dist[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1])
            dele = dist[i - 1, j] + 1
            ins = dist[i, j - 1] + 1
            dist[i, j] = min(sub, dele, ins)

    substitutions = deletions = insertions = 0
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and dist[i, j] == dist[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1]):
            if ref[i - 1] != hyp[j - 1]:
                substitutions += 1
            i -= 1
            j -= 1
        elif i > 0 and dist[i, j] == dist[i - 1, j] + 1:
            deletions += 1
            i -= 1
        else:
            insertions += 1
            j -= 1
    return substitutions, deletions, insertions, n


def aggregate_report(per_utterance_results, manifest) -> EvalReport:
    """Pool error counts per severity group and overall.

    per_utterance_results is a list of UtteranceScore; every id must appear
    in the manifest. Pooled WER divides total errors by total reference
    words, so it is not the mean of per-utterance WERs. Groups with zero
    reference words are omitted rather than reported as 0.
    """
    severity_of = {rec.id: rec.severity for rec in manifest}
    groups = {}
    total_errors = 0
    total_ref = 0
    for score in per_utterance_results:
        if score.id not in severity_of:
            raise ValueError(f"utterance id {score.id!r} not present in the manifest")
        severity = severity_of[score.id]
        errors, ref = groups.get(severity, (0, 0))
        groups[severity] = (errors + score.errors, ref + score.n_ref_words)
        total_errors += score.errors
        total_ref += score.n_ref_words

    by_severity = {}
    for severity, (errors, ref) in sorted(groups.items()):
        if ref == 0:
            warnings.warn(f"severity group {severity!r} has no reference words; omitting")
            continue
        by_severity[severity] = {"errors": errors, "ref_words": ref, "wer": errors / ref}

    overall = total_errors / total_ref if total_ref > 0 else 0.0
    return EvalReport(
        per_utterance=list(per_utterance_results),
        by_severity=by_severity,
        overall_wer=overall,
        overall_errors=total_errors,
        overall_ref_words=total_ref,
    )


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _hash_segmenter(model):
    if model is None:
        return None
    payload = (
        model.type_of_centroid.astype(np.uint8).tobytes()
        + model.centroids.astype("<f4").tobytes()
        + np.float32(model.sigma2).tobytes()
        + np.float32(model.frame_rate).tobytes()
    )
    return _sha256(payload)


def _hash_rhythm(model):
    if model is None:
        return None
    obj = {"speaker": model.speaker, "frame_rate": model.frame_rate, "rate_sps": model.rate_sps}
    for speech_type, params in sorted(model.fine.items()):
        obj[speech_type.name] = (params.shape, params.scale, params.n_samples)
    return _sha256(json.dumps(obj, sort_keys=True).encode())


def _hash_pool(pool):
    if pool is None:
        return None
    return _sha256(pool.frames.astype("<f4").tobytes())


def _validate_setup(setup, segmenter_model, src_rhythm, tgt_rhythm, pool):
    missing = []
    if setup.uses_global or setup.uses_fine:
        if src_rhythm is None:
            missing.append("source rhythm model")
        if tgt_rhythm is None:
            missing.append("target rhythm model")
    if setup.uses_global and src_rhythm is not None and src_rhythm.rate_sps <= 0:
        missing.append("source rhythm model with a positive speaking rate")
    if setup.uses_global and tgt_rhythm is not None and tgt_rhythm.rate_sps <= 0:
        missing.append("target rhythm model with a positive speaking rate")
    if setup.uses_fine:
        if segmenter_model is None:
            missing.append("segmenter model")
        for name, model in (("source", src_rhythm), ("target", tgt_rhythm)):
            if model is not None:
                absent = [t.name for t in SpeechType if t not in model.fine]
                if absent:
                    missing.append(
                        f"{name} rhythm model with duration distributions for {', '.join(absent)}"
                    )
    if setup.uses_vc and pool is None:
        missing.append("matching pool")
    if missing:
        raise ConfigurationError(
            f"setup {setup.value!r} requires: " + "; ".join(missing)
        )


def _transform(seq, setup, segmenter_model, src_rhythm, tgt_rhythm, pool, k, gamma):
    if setup in (ConversionSetup.ORIGINAL, ConversionSetup.VOCODED):
        return seq
    if setup.uses_global:
        seq = rhythm.convert_global(seq, src_rhythm, tgt_rhythm)
    elif setup.uses_fine:
        segmentation = segmenter.segment_sequence(segmenter_model, seq, gamma)
        seq = rhythm.convert_fine(seq, segmentation, src_rhythm, tgt_rhythm)
    if setup.uses_vc:
        seq = knnvc.convert_sequence(seq, pool, k)
    return seq


def run_conversion(
    manifest,
    segmenter_model,
    src_rhythm,
    tgt_rhythm,
    pool,
    setup,
    out_dir,
    k=knnvc.DEFAULT_K,
    gamma=segmenter.DEFAULT_GAMMA,
) -> RunResult:
    """Convert every manifest utterance under ``setup`` into ``out_dir``.

    Missing models for the chosen setup raise ConfigurationError before any
    utterance is touched. Per-utterance failures are recorded and skipped so
    a single degenerate recording cannot abort a corpus run. Outputs are
    written atomically, one RNVF per input, and a sidecar run manifest
    records the setup, model hashes, and per-utterance frame counts.
    """
    setup = ConversionSetup(setup)
    _validate_setup(setup, segmenter_model, src_rhythm, tgt_rhythm, pool)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    entries = []
    skipped = []
    output_paths = []
    for rec in manifest:
        try:
            seq = read_rnvf(rec.feature_path)
            converted = _transform(
                seq, setup, segmenter_model, src_rhythm, tgt_rhythm, pool, k, gamma
            )
            out_path = out_dir / f"{rec.id}.rnvf"
            tmp_path = out_dir / f"{rec.id}.rnvf.tmp"
            write_rnvf(converted, tmp_path)
            os.replace(tmp_path, out_path)
            entries.append(
                {
                    "id": rec.id,
                    "input_frames": seq.n_frames,
                    "output_frames": converted.n_frames,
                    "output_path": str(out_path),
                }
            )
            output_paths.append(out_path)
        except Exception as exc:  # noqa: BLE001 - per-utterance isolation is the point
            warnings.warn(f"utterance {rec.id}: {exc}")
            skipped.append({"id": rec.id, "error": str(exc)})

    run_manifest = {
        "setup": setup.value,
        "k": k,
        "gamma": gamma,
        "models": {
            "segmenter": _hash_segmenter(segmenter_model),
            "src_rhythm": _hash_rhythm(src_rhythm),
            "tgt_rhythm": _hash_rhythm(tgt_rhythm),
            "pool": _hash_pool(pool),
        },
        "utterances": entries,
        "skipped": skipped,
    }
    run_manifest_path = out_dir / "run_manifest.json"
    run_manifest_path.write_text(json.dumps(run_manifest, indent=2) + "\n", encoding="utf-8")
    return RunResult(
        setup=setup,
        output_paths=output_paths,
        skipped=skipped,
        run_manifest_path=run_manifest_path,
    )


def analyze_rhythm(manifest, segmenter_model: SegmenterModel, gamma=segmenter.DEFAULT_GAMMA):
    """Per-speaker speaking rates, duration distributions, and segment counts.

    Speakers lacking two segments of some type get no gamma parameters for
    that type; a warning names each gap.
    """
    by_speaker = {}
    for rec in manifest:
        by_speaker.setdefault(rec.speaker, []).append(rec)

    summaries = []
    for speaker in sorted(by_speaker):
        records = by_speaker[speaker]
        segmentations = []
        total_frames = 0
        for rec in records:
            seq = read_rnvf(rec.feature_path)
            if seq.n_frames == 0:
                warnings.warn(f"utterance {rec.id} has no frames; skipping")
                continue
            segmentations.append(segmenter.segment_sequence(segmenter_model, seq, gamma))
            total_frames += seq.n_frames
        if not segmentations:
            warnings.warn(f"speaker {speaker} has no usable utterances")
            continue
        model = rhythm.build_rhythm_model(speaker, segmentations, segmenter_model.frame_rate)
        counts = {t: 0 for t in SpeechType}
        for segmentation in segmentations:
            for speech_type, n in segmentation.counts_by_type().items():
                counts[speech_type] += n
        summaries.append(
            SpeakerRhythm(
                speaker=speaker,
                severity=records[0].severity,
                n_utterances=len(segmentations),
                total_seconds=total_frames / segmenter_model.frame_rate,
                rate_sps=model.rate_sps,
                segment_counts=counts,
                fine=model.fine,
            )
        )
    return summaries


def write_analysis_reports(summaries, out_dir):
    """Emit the rhythm analysis as CSV and JSON for external consumption."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    rows = []
    for s in summaries:
        row = {
            "speaker": s.speaker,
            "severity": s.severity,
            "n_utterances": s.n_utterances,
            "total_seconds": round(s.total_seconds, 6),
            "rate_sps": s.rate_sps,
        }
        for speech_type in SpeechType:
            key = speech_type.name.lower()
            row[f"{key}_segments"] = s.segment_counts.get(speech_type, 0)
            params = s.fine.get(speech_type)
            row[f"{key}_shape"] = params.shape if params else None
            row[f"{key}_scale"] = params.scale if params else None
        rows.append(row)

    json_path = out_dir / "rhythm_analysis.json"
    json_path.write_text(json.dumps(rows, indent=2) + "\n", encoding="utf-8")

    csv_path = out_dir / "rhythm_analysis.csv"
    if rows:
        header = list(rows[0])
        lines = [",".join(header)]
        for row in rows:
            lines.append(",".join("" if row[h] is None else str(row[h]) for h in header))
        csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    else:
        csv_path.write_text("", encoding="utf-8")
    return json_path, csv_path


def write_eval_reports(report: EvalReport, out_dir):
    """Emit the WER evaluation as CSV and JSON."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    obj = {
        "overall": {
            "wer": report.overall_wer,
            "errors": report.overall_errors,
            "ref_words": report.overall_ref_words,
        },
        "by_severity": report.by_severity,
        "per_utterance": [
            {
                "id": s.id,
                "reference": s.reference,
                "hypothesis": s.hypothesis,
                "substitutions": s.substitutions,
                "deletions": s.deletions,
                "insertions": s.insertions,
                "n_ref_words": s.n_ref_words,
                "wer": s.wer,
            }
            for s in report.per_utterance
        ],
    }
    json_path = out_dir / "wer_report.json"
    json_path.write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")

    csv_path = out_dir / "wer_report.csv"
    lines = ["id,substitutions,deletions,insertions,n_ref_words,wer"]
    for s in report.per_utterance:
        lines.append(f"{s.id},{s.substitutions},{s.deletions},{s.insertions},{s.n_ref_words},{s.wer}")
    csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return json_path, csv_path
