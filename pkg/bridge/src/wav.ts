/**
 * RIFF PCM 16-bit mono WAV reading and writing. Samples are Float64Array
 * scaled into [-1, 1); writing clips to the int16 range.
 */
import fs from "node:fs";

export interface Wave {
  sampleRate: number;
  samples: Float64Array;
}

export class WavFormatError extends Error {}

export function decodeWav(data: Buffer): Wave {
  if (data.length < 12 || data.toString("ascii", 0, 4) !== "RIFF" || data.toString("ascii", 8, 12) !== "WAVE") {
    throw new WavFormatError("not a RIFF/WAVE file");
  }
  let fmt: { audioFormat: number; channels: number; sampleRate: number; bitsPerSample: number } | null = null;
  let dataChunk: Buffer | null = null;
  let offset = 12;
  while (offset + 8 <= data.length) {
    const chunkId = data.toString("ascii", offset, offset + 4);
    const chunkSize = data.readUInt32LE(offset + 4);
    const body = data.subarray(offset + 8, offset + 8 + chunkSize);
    if (chunkId === "fmt ") {
      if (body.length < 16) {
        throw new WavFormatError("fmt chunk too short");
      }
      fmt = {
        audioFormat: body.readUInt16LE(0),
        channels: body.readUInt16LE(2),
        sampleRate: body.readUInt32LE(4),
        bitsPerSample: body.readUInt16LE(14),
      };
    } else if (chunkId === "data") {
      dataChunk = body;
    }
    offset += 8 + chunkSize + (chunkSize % 2);
  }
  if (!fmt || !dataChunk) {
    throw new WavFormatError("missing fmt or data chunk");
  }
  if (fmt.audioFormat !== 1) {
    throw new WavFormatError(`audio format ${fmt.audioFormat} unsupported, expected PCM`);
  }
  if (fmt.channels !== 1) {
    throw new WavFormatError(`channels=${fmt.channels} unsupported, expected mono`);
  }
  if (fmt.bitsPerSample !== 16) {
    throw new WavFormatError(`bits=${fmt.bitsPerSample} unsupported, expected 16-bit PCM`);
  }
  const n = Math.floor(dataChunk.length / 2);
  const samples = new Float64Array(n);
  for (let i = 0; i < n; i++) {
    samples[i] = dataChunk.readInt16LE(2 * i) / 32768;
  }
  return { sampleRate: fmt.sampleRate, samples };
}

export function encodeWav(w: Wave): Buffer {
  if (!(w.sampleRate > 0) || !Number.isInteger(w.sampleRate)) {
    throw new WavFormatError(`sample rate must be a positive integer, got ${w.sampleRate}`);
  }
  const n = w.samples.length;
  const buf = Buffer.alloc(44 + 2 * n);
  buf.write("RIFF", 0, "ascii");
  buf.writeUInt32LE(36 + 2 * n, 4);
  buf.write("WAVE", 8, "ascii");
  buf.write("fmt ", 12, "ascii");
  buf.writeUInt32LE(16, 16);
  buf.writeUInt16LE(1, 20); // PCM
  buf.writeUInt16LE(1, 22); // mono
  buf.writeUInt32LE(w.sampleRate, 24);
  buf.writeUInt32LE(w.sampleRate * 2, 28); // byte rate
  buf.writeUInt16LE(2, 32); // block align
  buf.writeUInt16LE(16, 34);
  buf.write("data", 36, "ascii");
  buf.writeUInt32LE(2 * n, 40);
  for (let i = 0; i < n; i++) {
    let v = Math.round(w.samples[i] * 32768);
    if (v > 32767) v = 32767;
    if (v < -32768) v = -32768;
    buf.writeInt16LE(v, 44 + 2 * i);
  }
  return buf;
}

export function readWav(path: string): Wave {
  return decodeWav(fs.readFileSync(path));
}

export function writeWav(w: Wave, path: string): void {
  fs.writeFileSync(path, encodeWav(w));
}
