/**
 * Feature extraction: audio file -> loudness normalization -> encoder ->
 * RNVF with per-frame silence/voicing flags.
 */
import path from "node:path";
import fs from "node:fs";

import { BridgeConfig } from "./config.js";
import { createEncoder } from "./engines.js";
import { computeFlags } from "./flags.js";
import { normalizeLoudness } from "./loudness.js";
import { readWav } from "./wav.js";
import { writeRnvf } from "./rnvf.js";

export interface ExtractItem {
  id: string;
  audioPath: string;
}

export interface FileResult {
  id: string;
  ok: boolean;
  outPath?: string;
  error?: string;
}

export function extractFile(item: ExtractItem, cfg: BridgeConfig, outDir: string): FileResult {
  try {
    const wave = readWav(item.audioPath);
    if (wave.sampleRate !== cfg.sampleRate) {
      throw new Error(
        `sample rate ${wave.sampleRate} != configured ${cfg.sampleRate} (resampling is out of scope)`,
      );
    }
    if (wave.samples.length === 0) {
      throw new Error("audio is empty");
    }
    const samples = normalizeLoudness(wave.samples, cfg.targetLoudnessDb);
    const encoder = createEncoder(cfg);
    const frames = encoder.encode(samples);
    const nFrames = encoder.frameCount(samples.length);
    const flags = computeFlags(samples, cfg.sampleRate, encoder.hop, nFrames);
    const outPath = path.join(outDir, `${item.id}.rnvf`);
    writeRnvf(
      {
        frameRate: cfg.sampleRate / encoder.hop,
        dim: encoder.dim,
        nFrames,
        frames,
        flags,
      },
      outPath,
    );
    return { id: item.id, ok: true, outPath };
  } catch (e) {
    return { id: item.id, ok: false, error: (e as Error).message };
  }
}

export function extractFeatures(
  items: ExtractItem[],
  cfg: BridgeConfig,
  outDir: string,
): FileResult[] {
  fs.mkdirSync(outDir, { recursive: true });
  return items.map((item) => extractFile(item, cfg, outDir));
}
