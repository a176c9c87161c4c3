/**
 * Fine-tune run orchestration.
 *
 * Consumes the dataset builder's training JSONL, trains a low-rank adapter
 * (miniature stand-in models train in-process; full-size checkpoints need
 * an accelerator this runner does not provide), and emits:
 *   - loss_log.csv (header `epoch,loss,eval_loss`, one row per epoch)
 *   - adapter.json (not in dry-run)
 *   - run_manifest.json (config + seed + input file hashes)
 */

import { createHash } from "node:crypto";
import { appendFileSync, mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { UNDOCUMENTED_DEFAULTS, type TrainingConfig, validateConfig } from "./config.js";
import { loadTrainingFile } from "./data.js";
import { trainStandin } from "./standin.js";

export const LOSS_LOG_HEADER = "epoch,loss,eval_loss";
export const STANDIN_PREFIX = "standin:";

export class AcceleratorUnavailableError extends Error {}

export interface RunOptions {
  dryRun?: boolean;
  log?: (msg: string) => void;
}

export interface RunOutputs {
  lossLogPath: string;
  manifestPath: string;
  adapterPath: string | null;
  epochsLogged: number;
}

function sha256File(path: string): string {
  return createHash("sha256").update(readFileSync(path)).digest("hex");
}

function acceleratorAvailable(): boolean {
  return Boolean(process.env.FINNEWS_ACCELERATOR);
}

export function runFinetune(
  config: TrainingConfig,
  trainFile: string,
  validFile: string | null,
  outDir: string,
  options: RunOptions = {},
): RunOutputs {
  const log = options.log ?? (() => {});
  validateConfig(config);
  const train = loadTrainingFile(trainFile);
  const valid = validFile ? loadTrainingFile(validFile) : null;
  log(`loaded ${train.length} training and ${valid ? valid.length : 0} validation records`);

  mkdirSync(outDir, { recursive: true });
  const lossLogPath = join(outDir, "loss_log.csv");
  const manifestPath = join(outDir, "run_manifest.json");
  writeFileSync(lossLogPath, LOSS_LOG_HEADER + "\n", "utf-8");

  const manifest = {
    config,
    seed: config.seed,
    quantization: config.load_in_4bit ? "4bit" : "8bit",
    dry_run: Boolean(options.dryRun),
    files: {
      train: { path: trainFile, sha256: sha256File(trainFile), records: train.length },
      valid: validFile
        ? { path: validFile, sha256: sha256File(validFile), records: valid!.length }
        : null,
    },
    undocumented_defaults: [...UNDOCUMENTED_DEFAULTS],
  };

  if (options.dryRun) {
    writeFileSync(manifestPath, JSON.stringify(manifest, null, 2) + "\n", "utf-8");
    log(`dry-run: inputs validated, header-only log at ${lossLogPath}`);
    return { lossLogPath, manifestPath, adapterPath: null, epochsLogged: 0 };
  }

  if (!config.model_name.startsWith(STANDIN_PREFIX) && !acceleratorAvailable()) {
    throw new AcceleratorUnavailableError(
      `no accelerator available for ${config.model_name}; ` +
        `re-run with --dry-run or point model_name at a ${STANDIN_PREFIX}* stand-in`,
    );
  }
  if (!config.model_name.startsWith(STANDIN_PREFIX)) {
    throw new AcceleratorUnavailableError(
      `full-size fine-tuning of ${config.model_name} is not provided by this runner; ` +
        `use a ${STANDIN_PREFIX}* stand-in for smoke runs`,
    );
  }

  const joinPair = (p: { prompt: string; response: string }) => `${p.prompt}\n${p.response}`;
  let epochsLogged = 0;
  const result = trainStandin(
    train.map(joinPair),
    valid ? valid.map(joinPair) : null,
    config,
    ({ epoch, trainLoss, evalLoss }) => {
      const evalCell = evalLoss === null ? "" : String(evalLoss);
      appendFileSync(lossLogPath, `${epoch},${trainLoss},${evalCell}\n`, "utf-8");
      epochsLogged += 1;
      log(`epoch ${epoch}: loss=${trainLoss.toFixed(4)} eval_loss=${evalCell || "n/a"}`);
    },
  );

  const adapterPath = join(outDir, "adapter.json");
  writeFileSync(adapterPath, JSON.stringify(result.adapter) + "\n", "utf-8");
  writeFileSync(manifestPath, JSON.stringify(manifest, null, 2) + "\n", "utf-8");
  log(`saved adapter to ${adapterPath}`);
  return { lossLogPath, manifestPath, adapterPath, epochsLogged };
}
