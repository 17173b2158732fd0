"""Figure rendering: every plot lands on disk as a valid, nonempty PNG."""

import pytest

from rhythmvc.pipeline import EvalReport, SpeakerRhythm, UtteranceScore
from rhythmvc.plots import (
    plot_duration_distributions,
    plot_speaking_rates,
    plot_wer_by_severity,
)
from rhythmvc.rhythm import GammaParams
from rhythmvc.segmenter import SpeechType

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def _summary(speaker, severity, rate, fine=None):
    return SpeakerRhythm(
        speaker=speaker,
        severity=severity,
        n_utterances=3,
        total_seconds=20.0,
        rate_sps=rate,
        segment_counts={t: 5 for t in SpeechType},
        fine=fine if fine is not None else {
            SpeechType.SILENCE: GammaParams(2.0, 0.3, 9),
            SpeechType.SONORANT: GammaParams(3.0, 0.1, 9),
            SpeechType.OBSTRUENT: GammaParams(1.5, 0.06, 9),
        },
    )


def _assert_png(path):
    data = path.read_bytes()
    assert data[: len(PNG_MAGIC)] == PNG_MAGIC
    assert len(data) > 1000


class TestSpeakingRates:
    def test_writes_png(self, tmp_path):
        summaries = [
            _summary("a", "severe", 0.8),
            _summary("b", "control", 2.4),
            _summary("c", "mild", 1.9),
        ]
        out = tmp_path / "rates.png"
        assert plot_speaking_rates(summaries, out) == out
        _assert_png(out)

    def test_unrecognized_severity_still_renders(self, tmp_path):
        out = tmp_path / "rates.png"
        plot_speaking_rates([_summary("x", "atypical", 1.0)], out)
        _assert_png(out)


class TestDurationDistributions:
    def test_writes_png(self, tmp_path):
        out = tmp_path / "durations.png"
        plot_duration_distributions(
            [_summary("a", "severe", 0.8), _summary("b", "control", 2.4)], out
        )
        _assert_png(out)

    def test_missing_fits_skipped(self, tmp_path):
        only_silence = {SpeechType.SILENCE: GammaParams(2.0, 0.3, 9)}
        out = tmp_path / "durations.png"
        plot_duration_distributions([_summary("a", "mild", 1.0, fine=only_silence)], out)
        _assert_png(out)


class TestWerBySeverity:
    def _report(self, by_severity, overall):
        score = UtteranceScore("u0", "a", "a", 0, 0, 0, 1)
        return EvalReport(
            per_utterance=[score],
            by_severity=by_severity,
            overall_wer=overall,
            overall_errors=0,
            overall_ref_words=1,
        )

    def test_writes_png(self, tmp_path):
        report = self._report(
            {
                "control": {"errors": 1, "ref_words": 50, "wer": 0.02},
                "severe": {"errors": 30, "ref_words": 40, "wer": 0.75},
            },
            31 / 90,
        )
        out = tmp_path / "wer.png"
        assert plot_wer_by_severity(report, out) == out
        _assert_png(out)

    def test_unknown_group_appended(self, tmp_path):
        report = self._report({"atypical": {"errors": 1, "ref_words": 4, "wer": 0.25}}, 0.25)
        out = tmp_path / "wer.png"
        plot_wer_by_severity(report, out)
        _assert_png(out)
