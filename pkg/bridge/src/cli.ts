#!/usr/bin/env node
/**
 * Bridge CLI: extract | vocode | transcribe, each taking --config (JSON)
 * and a JSONL --manifest. Exit codes: 0 success, 1 partial failure,
 * 2 configuration error.
 */
import { BridgeConfig, ConfigError, DEFAULT_CONFIG, loadConfig } from "./config.js";
import { extractFeatures } from "./extract.js";
import { vocodeFeatures } from "./vocode.js";
import { transcribeFiles, writeHypotheses } from "./transcribe.js";
import { ManifestError, readManifest } from "./manifest.js";

const USAGE = `usage:
  rnv-bridge extract    --manifest corpus.jsonl --out-dir feats/ [--config cfg.json]
  rnv-bridge vocode     --manifest corpus.jsonl --out-dir wavs/  [--config cfg.json]
  rnv-bridge transcribe --manifest corpus.jsonl --out hyps.jsonl [--config cfg.json]`;

function parseFlags(argv: string[]): Map<string, string> {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    if (!key.startsWith("--") || i + 1 >= argv.length) {
      throw new ConfigError(`malformed arguments near ${JSON.stringify(key)}\n${USAGE}`);
    }
    flags.set(key.slice(2), argv[i + 1]);
  }
  return flags;
}

function need(flags: Map<string, string>, name: string): string {
  const value = flags.get(name);
  if (value === undefined) {
    throw new ConfigError(`missing --${name}\n${USAGE}`);
  }
  return value;
}

function configFrom(flags: Map<string, string>): BridgeConfig {
  const path = flags.get("config");
  return path === undefined ? DEFAULT_CONFIG : loadConfig(path);
}

export function main(argv: string[]): number {
  const [verb, ...rest] = argv;
  try {
    if (verb === undefined || verb === "--help" || verb === "-h") {
      console.log(USAGE);
      return verb === undefined ? 2 : 0;
    }
    const flags = parseFlags(rest);
    const cfg = configFrom(flags);

    if (verb === "extract") {
      const records = readManifest(need(flags, "manifest"));
      const items = records.map((r) => {
        if (!r.audioPath) {
          throw new ConfigError(`utterance ${r.id} has no audio_path`);
        }
        return { id: r.id, audioPath: r.audioPath };
      });
      const results = extractFeatures(items, cfg, need(flags, "out-dir"));
      const failed = results.filter((r) => !r.ok);
      for (const f of failed) {
        console.error(`error: ${f.id}: ${f.error}`);
      }
      console.log(`extracted ${results.length - failed.length}/${results.length} file(s)`);
      return failed.length === 0 ? 0 : 1;
    }

    if (verb === "vocode") {
      const records = readManifest(need(flags, "manifest"));
      const items = records.map((r) => {
        if (!r.featurePath) {
          throw new ConfigError(`utterance ${r.id} has no feature_path`);
        }
        return { id: r.id, featurePath: r.featurePath };
      });
      const results = vocodeFeatures(items, cfg, need(flags, "out-dir"));
      const failed = results.filter((r) => !r.ok);
      for (const f of failed) {
        console.error(`error: ${f.id}: ${f.error}`);
      }
      console.log(`vocoded ${results.length - failed.length}/${results.length} file(s)`);
      return failed.length === 0 ? 0 : 1;
    }

    if (verb === "transcribe") {
      const records = readManifest(need(flags, "manifest"));
      const items = records.map((r) => {
        if (!r.audioPath) {
          throw new ConfigError(`utterance ${r.id} has no audio_path`);
        }
        return { id: r.id, audioPath: r.audioPath };
      });
      const lines = transcribeFiles(items, cfg);
      writeHypotheses(lines, need(flags, "out"));
      const failed = lines.filter((l) => l.error !== undefined);
      for (const f of failed) {
        console.error(`error: ${f.id}: ${f.error}`);
      }
      console.log(`transcribed ${lines.length - failed.length}/${lines.length} file(s)`);
      return failed.length === 0 ? 0 : 1;
    }

    throw new ConfigError(`unknown verb ${JSON.stringify(verb)}\n${USAGE}`);
  } catch (e) {
    if (e instanceof ConfigError || e instanceof ManifestError) {
      console.error(`error: ${e.message}`);
      return 2;
    }
    throw e;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined && import.meta.url === new URL(`file://${process.argv[1]}`).href;
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
