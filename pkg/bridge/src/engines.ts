/**
 * Model engines behind the three verbs. Each engine is an interface with a
 * deterministic mock implementation, so every pipeline above it can be
 * exercised without checkpoints; the real engines are thin stubs that fail
 * with a clear message until their runtimes are wired in.
 */
import { BridgeConfig } from "./config.js";
import { computeFlags, FLAG_SILENCE } from "./flags.js";

export class ModelUnavailableError extends Error {}

export interface Encoder {
  readonly dim: number;
  /** Analysis hop and window, in samples at the config sample rate. */
  readonly hop: number;
  readonly window: number;
  /** Number of frames produced for n input samples. */
  frameCount(nSamples: number): number;
  /** Frame-major float32 features, length frameCount(n) * dim. */
  encode(samples: Float64Array): Float32Array;
}

export interface Vocoder {
  readonly inputDim: number;
  readonly hop: number;
  synthesize(frames: Float32Array, nFrames: number, dim: number): Float64Array;
}

export interface Recognizer {
  transcribe(samples: Float64Array, sampleRate: number): string;
}

// 25 ms window, 20 ms hop: the convolutional front-end's arithmetic.
function hopFor(sampleRate: number): number {
  return Math.round(sampleRate * 0.02);
}

function windowFor(sampleRate: number): number {
  return Math.round(sampleRate * 0.025);
}

export const MOCK_DIM = 16;

export class MockEncoder implements Encoder {
  readonly dim = MOCK_DIM;
  readonly hop: number;
  readonly window: number;

  constructor(sampleRate: number) {
    this.hop = hopFor(sampleRate);
    this.window = windowFor(sampleRate);
  }

  frameCount(nSamples: number): number {
    if (nSamples < this.window) {
      return 0;
    }
    return Math.floor((nSamples - this.window) / this.hop) + 1;
  }

  encode(samples: Float64Array): Float32Array {
    const n = this.frameCount(samples.length);
    const out = new Float32Array(n * this.dim);
    for (let t = 0; t < n; t++) {
      const start = t * this.hop;
      let sum = 0;
      let sumSq = 0;
      let crossings = 0;
      for (let i = 0; i < this.window; i++) {
        const v = samples[start + i];
        sum += v;
        sumSq += v * v;
        if (i > 0 && v * samples[start + i - 1] < 0) {
          crossings++;
        }
      }
      const mean = sum / this.window;
      const rms = Math.sqrt(sumSq / this.window);
      out[t * this.dim] = rms;
      out[t * this.dim + 1] = crossings / this.window;
      out[t * this.dim + 2] = mean;
      for (let d = 3; d < this.dim; d++) {
        out[t * this.dim + d] = Math.sin((d + 1) * (rms + mean) * 31 + d * 0.7);
      }
    }
    return out;
  }
}

export class MockVocoder implements Vocoder {
  readonly inputDim = MOCK_DIM;
  readonly hop: number;
  private sampleRate: number;

  constructor(sampleRate: number) {
    this.hop = hopFor(sampleRate);
    this.sampleRate = sampleRate;
  }

  synthesize(frames: Float32Array, nFrames: number, dim: number): Float64Array {
    const out = new Float64Array(nFrames * this.hop);
    for (let t = 0; t < nFrames; t++) {
      // first feature component drives the frame's amplitude
      const gain = Math.min(Math.abs(frames[t * dim]), 1);
      for (let i = 0; i < this.hop; i++) {
        const k = t * this.hop + i;
        out[k] = 0.5 * gain * Math.sin((2 * Math.PI * 200 * k) / this.sampleRate);
      }
    }
    return out;
  }
}

export class MockRecognizer implements Recognizer {
  private static WORDS = ["the", "birch", "canoe", "slid", "on", "smooth", "planks", "again"];

  transcribe(samples: Float64Array, sampleRate: number): string {
    if (samples.length === 0) {
      return "";
    }
    const hop = hopFor(sampleRate);
    const nFrames = Math.ceil(samples.length / hop);
    const flags = computeFlags(samples, sampleRate, hop, nFrames);
    // one word per non-silent run
    let runs = 0;
    let inRun = false;
    for (let t = 0; t < nFrames; t++) {
      const speech = (flags[t] & FLAG_SILENCE) === 0;
      if (speech && !inRun) {
        runs++;
      }
      inRun = speech;
    }
    const words: string[] = [];
    for (let i = 0; i < runs; i++) {
      words.push(MockRecognizer.WORDS[i % MockRecognizer.WORDS.length]);
    }
    return words.join(" ");
  }
}

class WavlmEncoderStub implements Encoder {
  readonly dim = 1024;
  readonly hop: number;
  readonly window: number;

  constructor(sampleRate: number, private layer: number) {
    this.hop = hopFor(sampleRate);
    this.window = windowFor(sampleRate);
  }

  frameCount(nSamples: number): number {
    if (nSamples < this.window) {
      return 0;
    }
    return Math.floor((nSamples - this.window) / this.hop) + 1;
  }

  encode(): Float32Array {
    throw new ModelUnavailableError(
      "wavlm-large weights are not bundled; point the runtime at a checkpoint or use encoder 'mock'",
    );
  }
}

class HifiGanVocoderStub implements Vocoder {
  readonly inputDim = 1024;
  readonly hop: number;

  constructor(sampleRate: number, private checkpoint: string) {
    this.hop = hopFor(sampleRate);
  }

  synthesize(): Float64Array {
    throw new ModelUnavailableError(
      `vocoder checkpoint ${JSON.stringify(this.checkpoint)} cannot be run here; use "mock"`,
    );
  }
}

class WhisperRecognizerStub implements Recognizer {
  constructor(private model: string) {}

  transcribe(): string {
    throw new ModelUnavailableError(
      `asr model ${JSON.stringify(this.model)} is not bundled; use "mock"`,
    );
  }
}

export function createEncoder(cfg: BridgeConfig): Encoder {
  if (cfg.encoder.name === "mock") {
    return new MockEncoder(cfg.sampleRate);
  }
  return new WavlmEncoderStub(cfg.sampleRate, cfg.encoder.layer);
}

export function createVocoder(cfg: BridgeConfig): Vocoder {
  if (cfg.vocoderCheckpoint === "mock") {
    return new MockVocoder(cfg.sampleRate);
  }
  return new HifiGanVocoderStub(cfg.sampleRate, cfg.vocoderCheckpoint);
}

export function createRecognizer(cfg: BridgeConfig): Recognizer {
  if (cfg.asrModel === "mock") {
    return new MockRecognizer();
  }
  return new WhisperRecognizerStub(cfg.asrModel);
}
