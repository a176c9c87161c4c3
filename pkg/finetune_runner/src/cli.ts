/**
 * CLI: finetune-runner --config cfg.json --train train.jsonl
 *        [--valid valid.jsonl] --out outdir [--dry-run]
 */

import { ConfigError, DEFAULT_CONFIG, loadConfig } from "./config.js";
import { DataError } from "./data.js";
import { AcceleratorUnavailableError, runFinetune } from "./runner.js";

interface CliArgs {
  config?: string;
  train?: string;
  valid?: string;
  out?: string;
  dryRun: boolean;
}

function parseArgs(argv: string[]): CliArgs {
  const args: CliArgs = { dryRun: false };
  for (let i = 0; i < argv.length; i++) {
    const flag = argv[i];
    const next = () => {
      i += 1;
      if (i >= argv.length) throw new Error(`${flag} needs a value`);
      return argv[i];
    };
    switch (flag) {
      case "--config":
        args.config = next();
        break;
      case "--train":
        args.train = next();
        break;
      case "--valid":
        args.valid = next();
        break;
      case "--out":
        args.out = next();
        break;
      case "--dry-run":
        args.dryRun = true;
        break;
      case "--help":
      case "-h":
        console.log(
          "usage: finetune-runner --config cfg.json --train train.jsonl " +
            "[--valid valid.jsonl] --out outdir [--dry-run]",
        );
        process.exit(0);
        break;
      default:
        throw new Error(`unknown flag ${flag}`);
    }
  }
  return args;
}

export function main(argv: string[]): number {
  let args: CliArgs;
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error(`usage error: ${(err as Error).message}`);
    return 2;
  }
  if (!args.train || !args.out) {
    console.error("usage error: --train and --out are required");
    return 2;
  }
  try {
    const config = args.config ? loadConfig(args.config) : { ...DEFAULT_CONFIG };
    const outputs = runFinetune(config, args.train, args.valid ?? null, args.out, {
      dryRun: args.dryRun,
      log: (msg) => console.log(msg),
    });
    console.log(`loss log: ${outputs.lossLogPath} (${outputs.epochsLogged} epochs)`);
    return 0;
  } catch (err) {
    if (err instanceof ConfigError) {
      console.error(`config error: ${err.message}`);
      return 3;
    }
    if (err instanceof DataError) {
      console.error(`data error: ${err.message}`);
      return 4;
    }
    if (err instanceof AcceleratorUnavailableError) {
      console.error(`accelerator error: ${err.message}`);
      return 5;
    }
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

const invokedDirectly = process.argv[1]?.endsWith("cli.js");
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
