/**
 * RNVF feature-matrix files: magic "RNVF" | version u32 = 1 | frame_rate f32
 * | dim u32 | n_frames u32 | flags_present u8 | n_frames * dim f32 frames
 * (frame-major) | if flags_present: n_frames bytes, bit0 = is_silence,
 * bit1 = is_voiced. All integers and floats little-endian. Round trips are
 * bit-exact so the conversion engine and this bridge share one contract.
 */
import fs from "node:fs";

export const RNVF_MAGIC = "RNVF";
export const RNVF_VERSION = 1;
const HEADER_SIZE = 21;

export interface FeatureMatrix {
  frameRate: number;
  dim: number;
  nFrames: number;
  /** Frame-major float32 payload, length nFrames * dim. */
  frames: Float32Array;
  /** Packed per-frame flag bytes (bit0 silence, bit1 voiced), length nFrames. */
  flags?: Uint8Array;
}

export class RnvfFormatError extends Error {}

function checkShape(m: FeatureMatrix): void {
  if (!(m.dim >= 1)) {
    throw new RnvfFormatError(`dim must be >= 1, got ${m.dim}`);
  }
  if (!(m.frameRate > 0) || !Number.isFinite(m.frameRate)) {
    throw new RnvfFormatError(`frame rate must be positive and finite, got ${m.frameRate}`);
  }
  if (m.frames.length !== m.nFrames * m.dim) {
    throw new RnvfFormatError(
      `frames length ${m.frames.length} != nFrames ${m.nFrames} * dim ${m.dim}`,
    );
  }
  if (m.flags && m.flags.length !== m.nFrames) {
    throw new RnvfFormatError(`flags length ${m.flags.length} != nFrames ${m.nFrames}`);
  }
  for (let i = 0; i < m.frames.length; i++) {
    if (!Number.isFinite(m.frames[i])) {
      throw new RnvfFormatError(`frame value at ${i} is not finite`);
    }
  }
}

export function encodeRnvf(m: FeatureMatrix): Buffer {
  checkShape(m);
  const payload = m.nFrames * m.dim * 4;
  const buf = Buffer.alloc(HEADER_SIZE + payload + (m.flags ? m.nFrames : 0));
  buf.write(RNVF_MAGIC, 0, "ascii");
  buf.writeUInt32LE(RNVF_VERSION, 4);
  buf.writeFloatLE(m.frameRate, 8);
  buf.writeUInt32LE(m.dim, 12);
  buf.writeUInt32LE(m.nFrames, 16);
  buf.writeUInt8(m.flags ? 1 : 0, 20);
  for (let i = 0; i < m.frames.length; i++) {
    buf.writeFloatLE(m.frames[i], HEADER_SIZE + 4 * i);
  }
  if (m.flags) {
    for (let i = 0; i < m.nFrames; i++) {
      buf.writeUInt8(m.flags[i] & 0x03, HEADER_SIZE + payload + i);
    }
  }
  return buf;
}

export function decodeRnvf(data: Buffer): FeatureMatrix {
  if (data.length < HEADER_SIZE) {
    throw new RnvfFormatError(`file shorter than ${HEADER_SIZE}-byte header`);
  }
  const magic = data.toString("ascii", 0, 4);
  if (magic !== RNVF_MAGIC) {
    throw new RnvfFormatError(`bad magic ${JSON.stringify(magic)}, expected "${RNVF_MAGIC}"`);
  }
  const version = data.readUInt32LE(4);
  if (version !== RNVF_VERSION) {
    throw new RnvfFormatError(`unsupported version ${version}`);
  }
  const frameRate = data.readFloatLE(8);
  const dim = data.readUInt32LE(12);
  const nFrames = data.readUInt32LE(16);
  const flagsPresent = data.readUInt8(20);
  if (dim < 1) {
    throw new RnvfFormatError(`dim must be >= 1, got ${dim}`);
  }
  const payload = nFrames * dim * 4;
  if (data.length < HEADER_SIZE + payload) {
    throw new RnvfFormatError(
      `payload needs ${payload} bytes, file has ${data.length - HEADER_SIZE}`,
    );
  }
  const frames = new Float32Array(nFrames * dim);
  for (let i = 0; i < frames.length; i++) {
    frames[i] = data.readFloatLE(HEADER_SIZE + 4 * i);
  }
  let flags: Uint8Array | undefined;
  if (flagsPresent) {
    if (data.length < HEADER_SIZE + payload + nFrames) {
      throw new RnvfFormatError(
        `flag block needs ${nFrames} bytes, file has ${data.length - HEADER_SIZE - payload}`,
      );
    }
    flags = new Uint8Array(nFrames);
    flags.set(data.subarray(HEADER_SIZE + payload, HEADER_SIZE + payload + nFrames));
    for (let i = 0; i < nFrames; i++) {
      flags[i] &= 0x03;
    }
  }
  return { frameRate, dim, nFrames, frames, flags };
}

export function readRnvf(path: string): FeatureMatrix {
  return decodeRnvf(fs.readFileSync(path));
}

export function writeRnvf(m: FeatureMatrix, path: string): void {
  fs.writeFileSync(path, encodeRnvf(m));
}
