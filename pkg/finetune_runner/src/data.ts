/**
 * Training-file handling: JSONL of {"prompt": string, "response": string},
 * the export schema of the upstream dataset builder.
 */

import { readFileSync } from "node:fs";

export interface InstructionPair {
  prompt: string;
  response: string;
}

export class DataError extends Error {}

export function loadTrainingFile(path: string): InstructionPair[] {
  const text = readFileSync(path, "utf-8");
  const pairs: InstructionPair[] = [];
  const lines = text.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (line === "") continue;
    let obj: unknown;
    try {
      obj = JSON.parse(line);
    } catch (err) {
      throw new DataError(`${path}:${i + 1}: not valid JSON (${(err as Error).message})`);
    }
    if (
      typeof obj !== "object" ||
      obj === null ||
      typeof (obj as Record<string, unknown>).prompt !== "string" ||
      typeof (obj as Record<string, unknown>).response !== "string"
    ) {
      throw new DataError(`${path}:${i + 1}: expected {"prompt": string, "response": string}`);
    }
    const { prompt, response } = obj as { prompt: string; response: string };
    pairs.push({ prompt, response });
  }
  if (pairs.length === 0) {
    throw new DataError(`${path}: no records`);
  }
  return pairs;
}
