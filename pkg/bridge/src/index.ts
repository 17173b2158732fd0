export { FeatureMatrix, RnvfFormatError, readRnvf, writeRnvf, encodeRnvf, decodeRnvf } from "./rnvf.js";
export { Wave, WavFormatError, readWav, writeWav, encodeWav, decodeWav } from "./wav.js";
export { rmsDb, normalizeLoudness } from "./loudness.js";
export { computeFlags, FLAG_SILENCE, FLAG_VOICED } from "./flags.js";
export { BridgeConfig, ConfigError, DEFAULT_CONFIG, loadConfig, mergeConfig, validateConfig } from "./config.js";
export {
  Encoder,
  Vocoder,
  Recognizer,
  MockEncoder,
  MockVocoder,
  MockRecognizer,
  ModelUnavailableError,
  MOCK_DIM,
  createEncoder,
  createVocoder,
  createRecognizer,
} from "./engines.js";
export { extractFeatures, extractFile, ExtractItem, FileResult } from "./extract.js";
export { vocodeFeatures, vocodeFile, VocodeItem } from "./vocode.js";
export { transcribeFiles, writeHypotheses, HypothesisLine, TranscribeItem } from "./transcribe.js";
export { readManifest, ManifestRecord, ManifestError } from "./manifest.js";
export { main as cliMain } from "./cli.js";
