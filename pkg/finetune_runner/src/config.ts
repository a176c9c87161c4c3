/**
 * Training configuration: defaults, file loading, and validation.
 *
 * Key names mirror the trainer-argument convention of the upstream stack
 * (model_name, learning_rate, ...). Exactly one of load_in_4bit /
 * load_in_8bit must be set.
 */

import { readFileSync } from "node:fs";

export interface TrainingConfig {
  model_name: string;
  learning_rate: number;
  num_train_epochs: number;
  max_seq_length: number;
  gradient_accumulation_steps: number;
  load_in_4bit: boolean;
  load_in_8bit: boolean;
  bnb_4bit_quant_type: string;
  lr_scheduler_type: "linear" | "constant";
  /** Adapter rank; no upstream-documented default, flagged in the manifest. */
  lora_rank: number;
  /** Adapter scale; no upstream-documented default, flagged in the manifest. */
  lora_alpha: number;
  /** Minibatch size; no upstream-documented default, flagged in the manifest. */
  batch_size: number;
  seed: number;
}

export const DEFAULT_CONFIG: TrainingConfig = {
  model_name: "meta-llama/Llama-2-7b-chat-hf",
  learning_rate: 5e-4,
  num_train_epochs: 10,
  max_seq_length: 2048,
  gradient_accumulation_steps: 2,
  load_in_4bit: true,
  load_in_8bit: false,
  bnb_4bit_quant_type: "nf4",
  lr_scheduler_type: "linear",
  lora_rank: 4,
  lora_alpha: 8,
  batch_size: 32,
  seed: 0,
};

/** Config keys whose defaults are local choices, not documented upstream. */
export const UNDOCUMENTED_DEFAULTS = ["lora_rank", "lora_alpha", "batch_size", "seed"] as const;

export class ConfigError extends Error {}

export function validateConfig(config: TrainingConfig): void {
  if (config.load_in_4bit === config.load_in_8bit) {
    throw new ConfigError(
      `exactly one of load_in_4bit/load_in_8bit must be set, got ` +
        `${config.load_in_4bit}/${config.load_in_8bit}`,
    );
  }
  if (config.learning_rate <= 0) throw new ConfigError("learning_rate must be positive");
  if (!Number.isInteger(config.num_train_epochs) || config.num_train_epochs < 1) {
    throw new ConfigError("num_train_epochs must be a positive integer");
  }
  if (config.max_seq_length < 1) throw new ConfigError("max_seq_length must be >= 1");
  if (config.gradient_accumulation_steps < 1) {
    throw new ConfigError("gradient_accumulation_steps must be >= 1");
  }
  if (config.lr_scheduler_type !== "linear" && config.lr_scheduler_type !== "constant") {
    throw new ConfigError(`unsupported lr_scheduler_type: ${config.lr_scheduler_type}`);
  }
  if (!Number.isInteger(config.lora_rank) || config.lora_rank < 1) {
    throw new ConfigError("lora_rank must be a positive integer");
  }
  if (config.batch_size < 1) throw new ConfigError("batch_size must be >= 1");
}

export function loadConfig(path: string, warn: (msg: string) => void = console.warn): TrainingConfig {
  const raw = readFileSync(path, "utf-8").trim();
  const payload: unknown = raw === "" ? {} : JSON.parse(raw);
  if (typeof payload !== "object" || payload === null || Array.isArray(payload)) {
    throw new ConfigError(`${path}: config must be a JSON object`);
  }
  const config: TrainingConfig = { ...DEFAULT_CONFIG };
  const known = new Set(Object.keys(DEFAULT_CONFIG));
  for (const [key, value] of Object.entries(payload)) {
    if (!known.has(key)) {
      warn(`${path}: unknown config key ${JSON.stringify(key)} ignored`);
      continue;
    }
    (config as unknown as Record<string, unknown>)[key] = value;
  }
  validateConfig(config);
  return config;
}

export function dumpConfig(config: TrainingConfig): string {
  return JSON.stringify(config, null, 2) + "\n";
}
