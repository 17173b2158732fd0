"""Command-line interface: one verb per pipeline stage.

train-segmenter, build-rhythm, segment, convert, analyze, wer. Keeping the
stages separate lets feature extraction, vocoding, and transcription tools
interleave with the engine through files alone. Exit codes: 0 success,
1 partial failure, 2 configuration error.
"""

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import knnvc, pipeline, plots, rhythm, segmenter, signals
from .featstore import ManifestError, read_manifest, read_rnvf
from .pipeline import ConfigurationError, ConversionSetup, UtteranceScore
from .segmenter import DEFAULT_GAMMA, DEFAULT_K


def _load_flags_for_training(records):
    """Collect (sequence, flags) pairs, preferring embedded flags over audio."""
    sequences = []
    flags_list = []
    for rec in records:
        seq = read_rnvf(rec.feature_path)
        if seq.n_frames == 0:
            warnings.warn(f"utterance {rec.id} has no frames; skipping")
            continue
        if seq.flags is not None:
            flags = seq.flags
        elif rec.audio_path is not None:
            wav = signals.read_wav(rec.audio_path)
            flags = signals.compute_frame_flags(wav, seq.frame_rate)
            if len(flags) >= seq.n_frames:
                flags = flags[: seq.n_frames]
            else:
                pad = np.repeat(flags[-1:], seq.n_frames - len(flags), axis=0)
                flags = np.concatenate([flags, pad])
        else:
            warnings.warn(f"utterance {rec.id} has neither flags nor audio; skipping")
            continue
        sequences.append(seq)
        flags_list.append(flags)
    return sequences, flags_list


def _segmentations_for_speaker(records, model, gamma):
    segmentations = []
    for rec in records:
        seq = read_rnvf(rec.feature_path)
        if seq.n_frames == 0:
            warnings.warn(f"utterance {rec.id} has no frames; skipping")
            continue
        segmentations.append(segmenter.segment_sequence(model, seq, gamma))
    return segmentations


def _read_jsonl(path, value_key):
    table = {}
    with Path(path).open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from exc
            if "id" not in obj or value_key not in obj:
                raise ManifestError(f"{path}: line {lineno}: needs 'id' and {value_key!r}")
            table[str(obj["id"])] = str(obj[value_key])
    return table


def cmd_train_segmenter(args):
    records = read_manifest(args.manifest)
    sequences, flags_list = _load_flags_for_training(records)
    if not sequences:
        raise ConfigurationError("no usable training utterances (need flags or audio paths)")
    model = segmenter.train_segmenter(sequences, flags_list, k=args.k, seed=args.seed)
    segmenter.save_segmenter(model, args.out)
    meta = {"k": args.k, "seed": args.seed, "n_training_frames": int(sum(s.n_frames for s in sequences))}
    Path(str(args.out) + ".meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    print(f"trained segmenter on {len(sequences)} utterance(s) -> {args.out}")
    return 0


def cmd_build_rhythm(args):
    records = [r for r in read_manifest(args.manifest) if r.speaker == args.speaker]
    if not records:
        raise ConfigurationError(f"no manifest entries for speaker {args.speaker!r}")
    model = segmenter.load_segmenter(args.segmenter)
    segmentations = _segmentations_for_speaker(records, model, args.gamma)
    if not segmentations:
        raise ConfigurationError(f"speaker {args.speaker!r} has no usable utterances")
    rhythm_model = rhythm.build_rhythm_model(args.speaker, segmentations, model.frame_rate)
    rhythm.save_rhythm_model(rhythm_model, args.out)
    print(f"rhythm model for {args.speaker}: rate {rhythm_model.rate_sps:.3f} sps -> {args.out}")
    return 0


def cmd_segment(args):
    records = read_manifest(args.manifest)
    model = segmenter.load_segmenter(args.segmenter)
    lines = []
    skipped = 0
    for rec in records:
        try:
            seq = read_rnvf(rec.feature_path)
            segmentation = segmenter.segment_sequence(model, seq, args.gamma)
        except Exception as exc:
            warnings.warn(f"utterance {rec.id}: {exc}")
            skipped += 1
            continue
        lines.append(
            json.dumps(
                {
                    "id": rec.id,
                    "frame_rate": seq.frame_rate,
                    "segments": [
                        [speech_type.name.lower(), start, end]
                        for speech_type, start, end in segmentation.segments
                    ],
                }
            )
        )
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"segmented {len(lines)} utterance(s), {skipped} skipped -> {args.out}")
    return 1 if skipped else 0


def cmd_convert(args):
    records = read_manifest(args.manifest)
    setup = ConversionSetup(args.setup)

    segmenter_model = segmenter.load_segmenter(args.segmenter) if args.segmenter else None
    src_rhythm = rhythm.load_rhythm_model(args.src_rhythm) if args.src_rhythm else None
    tgt_rhythm = rhythm.load_rhythm_model(args.tgt_rhythm) if args.tgt_rhythm else None
    pool = None
    if args.pool_manifest:
        pool_records = read_manifest(args.pool_manifest)
        pool_sequences = [read_rnvf(rec.feature_path) for rec in pool_records]
        pool = knnvc.build_pool(pool_sequences)

    result = pipeline.run_conversion(
        records,
        segmenter_model,
        src_rhythm,
        tgt_rhythm,
        pool,
        setup,
        args.out_dir,
        k=args.k,
        gamma=args.gamma,
    )
    print(
        f"setup {setup.value}: converted {len(result.output_paths)} utterance(s), "
        f"{len(result.skipped)} skipped -> {args.out_dir}"
    )
    return 1 if result.skipped else 0


def cmd_analyze(args):
    records = read_manifest(args.manifest)
    model = segmenter.load_segmenter(args.segmenter)
    summaries = pipeline.analyze_rhythm(records, model, gamma=args.gamma)
    if not summaries:
        raise ConfigurationError("no speakers with usable utterances")
    json_path, csv_path = pipeline.write_analysis_reports(summaries, args.out)
    written = [str(json_path), str(csv_path)]
    if not args.no_figures:
        out_dir = Path(args.out)
        written.append(str(plots.plot_speaking_rates(summaries, out_dir / "speaking_rates.png")))
        written.append(
            str(plots.plot_duration_distributions(summaries, out_dir / "duration_distributions.png"))
        )
    print("analysis written:")
    for path in written:
        print(f"  {path}")
    return 0


def cmd_wer(args):
    records = read_manifest(args.manifest)
    hyps = _read_jsonl(args.hyps, "hypothesis")
    if args.refs:
        refs = _read_jsonl(args.refs, "reference")
    else:
        refs = {rec.id: rec.transcript for rec in records if rec.transcript is not None}

    scores = []
    for utt_id, hypothesis in hyps.items():
        if utt_id not in refs:
            raise ConfigurationError(f"no reference transcript for utterance {utt_id!r}")
        reference = refs[utt_id]
        s, d, i, n_ref = pipeline.score_wer(reference, hypothesis)
        scores.append(
            UtteranceScore(
                id=utt_id,
                reference=reference,
                hypothesis=hypothesis,
                substitutions=s,
                deletions=d,
                insertions=i,
                n_ref_words=n_ref,
            )
        )
    report = pipeline.aggregate_report(scores, records)
    json_path, csv_path = pipeline.write_eval_reports(report, args.out)
    written = [str(json_path), str(csv_path)]
    if not args.no_figures and report.by_severity:
        written.append(
            str(plots.plot_wer_by_severity(report, Path(args.out) / "wer_by_severity.png"))
        )
    print(f"overall WER {report.overall_wer:.4f} over {report.overall_ref_words} reference words")
    for path in written:
        print(f"  {path}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rhythmvc",
        description="Rhythm and voice conversion engine for feature-space speech.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-segmenter", help="train the speech-type segmenter")
    p.add_argument("--manifest", required=True)
    p.add_argument("--k", type=int, default=DEFAULT_K, help="codebook size")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output model file")
    p.set_defaults(func=cmd_train_segmenter)

    p = sub.add_parser("build-rhythm", help="fit a speaker's rhythm model")
    p.add_argument("--manifest", required=True)
    p.add_argument("--segmenter", required=True)
    p.add_argument("--speaker", required=True)
    p.add_argument("--gamma", type=float, default=DEFAULT_GAMMA)
    p.add_argument("--out", required=True, help="output JSON model file")
    p.set_defaults(func=cmd_build_rhythm)

    p = sub.add_parser("segment", help="segment utterances into speech-type runs")
    p.add_argument("--manifest", required=True)
    p.add_argument("--segmenter", required=True)
    p.add_argument("--gamma", type=float, default=DEFAULT_GAMMA)
    p.add_argument("--out", required=True, help="output JSONL file")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("convert", help="convert a corpus under one setup")
    p.add_argument("--manifest", required=True)
    p.add_argument("--setup", required=True, choices=[s.value for s in ConversionSetup])
    p.add_argument("--segmenter")
    p.add_argument("--src-rhythm")
    p.add_argument("--tgt-rhythm")
    p.add_argument("--pool-manifest")
    p.add_argument("--k", type=int, default=knnvc.DEFAULT_K)
    p.add_argument("--gamma", type=float, default=DEFAULT_GAMMA)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("analyze", help="speaking-rate and duration analysis")
    p.add_argument("--manifest", required=True)
    p.add_argument("--segmenter", required=True)
    p.add_argument("--gamma", type=float, default=DEFAULT_GAMMA)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("wer", help="score hypotheses against references")
    p.add_argument("--refs", help="JSONL of {id, reference}; defaults to manifest transcripts")
    p.add_argument("--hyps", required=True, help="JSONL of {id, hypothesis}")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_wer)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, ManifestError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
