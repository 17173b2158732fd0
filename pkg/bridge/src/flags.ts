/**
 * Per-frame silence/voicing flagger, matching the conversion engine's
 * fallback detector: a frame is silent when its RMS falls 40 dB below the
 * utterance's 95th-percentile frame RMS, and voiced when the normalized
 * autocorrelation peaks at or above 0.5 in the 60-400 Hz lag range.
 * Windows span 2 hops centered on the frame, clipped at the signal start
 * and zero-padded past the end.
 */

export const SILENCE_DB_BELOW_PEAK = 40;
export const VOICING_THRESHOLD = 0.5;
export const PITCH_MIN_HZ = 60;
export const PITCH_MAX_HZ = 400;

export const FLAG_SILENCE = 0x01;
export const FLAG_VOICED = 0x02;

function percentileLinear(values: number[], q: number): number {
  // linear-interpolation percentile over sorted values (q in [0, 100])
  const sorted = [...values].sort((a, b) => a - b);
  if (sorted.length === 1) {
    return sorted[0];
  }
  const pos = ((sorted.length - 1) * q) / 100;
  const lo = Math.floor(pos);
  const hi = Math.ceil(pos);
  if (lo === hi) {
    return sorted[lo];
  }
  return sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo);
}

function windowAt(samples: Float64Array, t: number, hop: number, winLen: number): Float64Array {
  const start = Math.max(Math.round((t - 0.5) * hop), 0);
  const end = start + winLen;
  const out = new Float64Array(winLen);
  const avail = Math.min(end, samples.length) - start;
  for (let i = 0; i < avail; i++) {
    out[i] = samples[start + i];
  }
  return out;
}

function normalizedAutocorrMax(window: Float64Array, lagMin: number, lagMax: number): number {
  const n = window.length;
  if (lagMin >= n) {
    return 0;
  }
  lagMax = Math.min(lagMax, n - 1);
  const energy = new Float64Array(n);
  let acc = 0;
  for (let i = 0; i < n; i++) {
    acc += window[i] * window[i];
    energy[i] = acc;
  }
  const total = energy[n - 1];
  if (total <= 0) {
    return 0;
  }
  let best = 0;
  for (let lag = lagMin; lag <= lagMax; lag++) {
    let corr = 0;
    for (let i = 0; i + lag < n; i++) {
      corr += window[i] * window[i + lag];
    }
    const head = energy[n - lag - 1];
    const tail = total - (lag >= 1 ? energy[lag - 1] : 0);
    const denom = Math.sqrt(head * tail);
    if (denom > 0) {
      const value = corr / denom;
      if (value > best) {
        best = value;
      }
    }
  }
  return best;
}

/**
 * Compute packed flag bytes for nFrames frames at the given hop. The frame
 * count is imposed by the caller (the encoder's grid); windows past the end
 * of the signal are zero-padded exactly as shorter grids pad.
 */
export function computeFlags(
  samples: Float64Array,
  sampleRate: number,
  hop: number,
  nFrames: number,
): Uint8Array {
  if (samples.length === 0) {
    throw new Error("waveform is empty");
  }
  if (!(hop >= 1)) {
    throw new Error(`hop must be >= 1 sample, got ${hop}`);
  }
  const winLen = Math.round(2 * hop);
  const lagMin = Math.max(1, Math.floor(sampleRate / PITCH_MAX_HZ));
  const lagMax = Math.max(lagMin, Math.ceil(sampleRate / PITCH_MIN_HZ));

  const windows: Float64Array[] = [];
  const rms: number[] = [];
  for (let t = 0; t < nFrames; t++) {
    const w = windowAt(samples, t, hop, winLen);
    windows.push(w);
    let sum = 0;
    for (let i = 0; i < w.length; i++) {
      sum += w[i] * w[i];
    }
    rms.push(w.length ? Math.sqrt(sum / w.length) : 0);
  }

  const flags = new Uint8Array(nFrames);
  if (nFrames === 0) {
    return flags;
  }
  const gate = percentileLinear(rms, 95) * Math.pow(10, -SILENCE_DB_BELOW_PEAK / 20);
  for (let t = 0; t < nFrames; t++) {
    const silent = rms[t] <= gate;
    let byte = 0;
    if (silent) {
      byte |= FLAG_SILENCE;
    } else if (normalizedAutocorrMax(windows[t], lagMin, lagMax) >= VOICING_THRESHOLD) {
      byte |= FLAG_VOICED;
    }
    flags[t] = byte;
  }
  return flags;
}
