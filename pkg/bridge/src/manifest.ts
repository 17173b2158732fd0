/**
 * Corpus manifests: one JSON object per line with at least an id, plus
 * audio_path and/or feature_path depending on the verb.
 */
import fs from "node:fs";

export interface ManifestRecord {
  id: string;
  audioPath?: string;
  featurePath?: string;
}

export class ManifestError extends Error {}

export function readManifest(path: string): ManifestRecord[] {
  let raw: string;
  try {
    raw = fs.readFileSync(path, "utf-8");
  } catch (e) {
    throw new ManifestError(`cannot read manifest ${path}: ${(e as Error).message}`);
  }
  const records: ManifestRecord[] = [];
  const lines = raw.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (!line) {
      continue;
    }
    let obj: any;
    try {
      obj = JSON.parse(line);
    } catch {
      throw new ManifestError(`${path}: line ${i + 1}: invalid JSON`);
    }
    if (typeof obj !== "object" || obj === null || typeof obj.id !== "string" || !obj.id) {
      throw new ManifestError(`${path}: line ${i + 1}: needs a string 'id'`);
    }
    records.push({
      id: obj.id,
      audioPath: typeof obj.audio_path === "string" ? obj.audio_path : undefined,
      featurePath: typeof obj.feature_path === "string" ? obj.feature_path : undefined,
    });
  }
  return records;
}
