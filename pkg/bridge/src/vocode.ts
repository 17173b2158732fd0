/**
 * Vocoding: RNVF feature file -> waveform. The output duration is exactly
 * n_frames / frame_rate (one hop of samples per frame).
 */
import path from "node:path";
import fs from "node:fs";

import { BridgeConfig } from "./config.js";
import { createVocoder } from "./engines.js";
import { readRnvf } from "./rnvf.js";
import { writeWav } from "./wav.js";
import { FileResult } from "./extract.js";

export interface VocodeItem {
  id: string;
  featurePath: string;
}

export function vocodeFile(item: VocodeItem, cfg: BridgeConfig, outDir: string): FileResult {
  try {
    const m = readRnvf(item.featurePath);
    if (m.nFrames === 0) {
      throw new Error("feature sequence is empty; nothing to vocode");
    }
    const vocoder = createVocoder(cfg);
    if (m.dim !== vocoder.inputDim) {
      throw new Error(`feature dim ${m.dim} != vocoder input width ${vocoder.inputDim}`);
    }
    const samples = vocoder.synthesize(m.frames, m.nFrames, m.dim);
    const outPath = path.join(outDir, `${item.id}.wav`);
    writeWav({ sampleRate: cfg.sampleRate, samples }, outPath);
    return { id: item.id, ok: true, outPath };
  } catch (e) {
    return { id: item.id, ok: false, error: (e as Error).message };
  }
}

export function vocodeFeatures(
  items: VocodeItem[],
  cfg: BridgeConfig,
  outDir: string,
): FileResult[] {
  fs.mkdirSync(outDir, { recursive: true });
  return items.map((item) => vocodeFile(item, cfg, outDir));
}
