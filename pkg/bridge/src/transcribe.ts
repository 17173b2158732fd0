/**
 * Transcription: audio files -> hypothesis JSONL, one {"id", "hypothesis"}
 * per input. Per-file failures keep their line with an empty hypothesis and
 * an error flag so the scoring side sees every id.
 */
import fs from "node:fs";

import { BridgeConfig } from "./config.js";
import { createRecognizer } from "./engines.js";
import { readWav } from "./wav.js";

export interface TranscribeItem {
  id: string;
  audioPath: string;
}

export interface HypothesisLine {
  id: string;
  hypothesis: string;
  error?: string;
}

export function transcribeFiles(items: TranscribeItem[], cfg: BridgeConfig): HypothesisLine[] {
  const recognizer = createRecognizer(cfg);
  return items.map((item) => {
    try {
      const wave = readWav(item.audioPath);
      return { id: item.id, hypothesis: recognizer.transcribe(wave.samples, wave.sampleRate) };
    } catch (e) {
      return { id: item.id, hypothesis: "", error: (e as Error).message };
    }
  });
}

export function writeHypotheses(lines: HypothesisLine[], outPath: string): void {
  const body = lines
    .map((line) =>
      JSON.stringify(
        line.error === undefined
          ? { id: line.id, hypothesis: line.hypothesis }
          : { id: line.id, hypothesis: line.hypothesis, error: line.error },
      ),
    )
    .join("\n");
  fs.writeFileSync(outPath, body + (lines.length ? "\n" : ""));
}
