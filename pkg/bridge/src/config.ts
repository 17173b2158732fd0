/**
 * Bridge configuration: which encoder/vocoder/ASR back the three verbs,
 * plus the audio preprocessing constants. Loaded from a JSON file; every
 * field has a default so an empty object is a valid config.
 */
import fs from "node:fs";

export interface BridgeConfig {
  encoder: {
    /** "wavlm-large" for the real encoder, "mock" for the deterministic test engine. */
    name: string;
    /** Transformer layer the features are taken from (0 = conv output). */
    layer: number;
  };
  /** Vocoder checkpoint path, or "mock". */
  vocoderCheckpoint: string;
  /** ASR model name ("whisper-base"), or "mock". */
  asrModel: string;
  /** Loudness target applied before encoding. */
  targetLoudnessDb: number;
  /** How loudness is measured; only RMS dBFS is implemented. */
  loudnessMeasure: "rms";
  sampleRate: number;
}

export class ConfigError extends Error {}

export const DEFAULT_CONFIG: BridgeConfig = {
  encoder: { name: "wavlm-large", layer: 6 },
  vocoderCheckpoint: "hifigan-v1.pt",
  asrModel: "whisper-base",
  targetLoudnessDb: -20,
  loudnessMeasure: "rms",
  sampleRate: 16000,
};

/** Encoder depth by name; layer indexes 0..depth are valid. The mock
 * stands in for the real encoder so it accepts the same layer range. */
const ENCODER_LAYERS: Record<string, number> = {
  "wavlm-large": 24,
  mock: 24,
};

export function validateConfig(cfg: BridgeConfig): void {
  const depth = ENCODER_LAYERS[cfg.encoder.name];
  if (depth === undefined) {
    throw new ConfigError(`unknown encoder ${JSON.stringify(cfg.encoder.name)}`);
  }
  if (!Number.isInteger(cfg.encoder.layer) || cfg.encoder.layer < 0 || cfg.encoder.layer > depth) {
    throw new ConfigError(
      `layer ${cfg.encoder.layer} out of range for ${cfg.encoder.name} (0..${depth})`,
    );
  }
  if (!Number.isInteger(cfg.sampleRate) || cfg.sampleRate <= 0) {
    throw new ConfigError(`sample rate must be a positive integer, got ${cfg.sampleRate}`);
  }
  if (cfg.vocoderCheckpoint !== "mock" && cfg.sampleRate !== 16000) {
    throw new ConfigError(
      `sample rate ${cfg.sampleRate} does not match the vocoder's expected 16000`,
    );
  }
  if (cfg.loudnessMeasure !== "rms") {
    throw new ConfigError(`unsupported loudness measure ${JSON.stringify(cfg.loudnessMeasure)}`);
  }
  if (!Number.isFinite(cfg.targetLoudnessDb) || cfg.targetLoudnessDb > 0) {
    throw new ConfigError(`target loudness must be finite and <= 0 dB, got ${cfg.targetLoudnessDb}`);
  }
}

export function mergeConfig(partial: Partial<BridgeConfig>): BridgeConfig {
  const cfg: BridgeConfig = {
    ...DEFAULT_CONFIG,
    ...partial,
    encoder: { ...DEFAULT_CONFIG.encoder, ...(partial.encoder ?? {}) },
  };
  validateConfig(cfg);
  return cfg;
}

export function loadConfig(path: string): BridgeConfig {
  let raw: string;
  try {
    raw = fs.readFileSync(path, "utf-8");
  } catch (e) {
    throw new ConfigError(`cannot read config ${path}: ${(e as Error).message}`);
  }
  let parsed: unknown;
  try {
    parsed = JSON.parse(raw);
  } catch (e) {
    throw new ConfigError(`${path}: invalid JSON (${(e as Error).message})`);
  }
  if (typeof parsed !== "object" || parsed === null || Array.isArray(parsed)) {
    throw new ConfigError(`${path}: config must be a JSON object`);
  }
  return mergeConfig(parsed as Partial<BridgeConfig>);
}
