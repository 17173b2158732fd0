/**
 * RMS-based loudness measurement and normalization. The measure is RMS dBFS
 * (0 dB = full-scale square wave); normalization rescales to a target level
 * and is idempotent: re-normalizing an already normalized signal is a gain
 * of exactly 1.
 */

export function rmsDb(samples: Float64Array): number {
  if (samples.length === 0) {
    return -Infinity;
  }
  let sum = 0;
  for (let i = 0; i < samples.length; i++) {
    sum += samples[i] * samples[i];
  }
  const rms = Math.sqrt(sum / samples.length);
  return rms > 0 ? 20 * Math.log10(rms) : -Infinity;
}

/**
 * Scale samples so their RMS level hits targetDb. Digital silence has no
 * defined gain and is returned unchanged.
 */
export function normalizeLoudness(samples: Float64Array, targetDb: number): Float64Array {
  const level = rmsDb(samples);
  if (level === -Infinity) {
    return samples.slice();
  }
  const gain = Math.pow(10, (targetDb - level) / 20);
  const out = new Float64Array(samples.length);
  for (let i = 0; i < samples.length; i++) {
    out[i] = samples[i] * gain;
  }
  return out;
}
