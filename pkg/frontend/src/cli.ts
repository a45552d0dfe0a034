#!/usr/bin/env node
/**
 * clarens-client call <url> <method> [json-args] --cert c.pem --key c.key --ca ca.pem
 *
 * Connects, issues one authenticated call and prints the JSON result.
 * Exits 0 on success, 1 on faults or transport errors.
 */

import { ClarensClient, loadOptions } from "./client.js";
import { RpcFault } from "./faults.js";
import { RpcValue } from "./codec.js";

interface ParsedArgs {
  url: string;
  method: string;
  params: RpcValue[];
  cert: string;
  key: string;
  ca: string;
}

function usage(): never {
  process.stderr.write(
    "usage: clarens-client call <url> <method> [json-args] --cert <pem> --key <pem> --ca <pem>\n",
  );
  process.exit(2);
}

function parseArgs(argv: string[]): ParsedArgs {
  const flags: Record<string, string> = {};
  const positional: string[] = [];
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (arg.startsWith("--")) {
      const value = argv[++i];
      if (value === undefined) usage();
      flags[arg.slice(2)] = value;
    } else {
      positional.push(arg);
    }
  }
  if (positional[0] !== "call" || positional.length < 3 || positional.length > 4) usage();
  if (!flags.cert || !flags.key || !flags.ca) usage();
  let params: RpcValue[] = [];
  if (positional.length === 4) {
    const parsed = JSON.parse(positional[3]);
    if (!Array.isArray(parsed)) {
      throw new TypeError("json-args must be a JSON array of parameters");
    }
    params = parsed as RpcValue[];
  }
  return {
    url: positional[1],
    method: positional[2],
    params,
    cert: flags.cert,
    key: flags.key,
    ca: flags.ca,
  };
}

async function main(): Promise<number> {
  const args = parseArgs(process.argv.slice(2));
  const client = new ClarensClient(args.url, loadOptions(args.cert, args.key, args.ca));
  try {
    await client.connect();
    const result = await client.call(args.method, args.params);
    process.stdout.write(
      JSON.stringify(result, (_k, v) => (v instanceof Uint8Array ? Buffer.from(v).toString("base64") : v), 2) + "\n",
    );
    return 0;
  } catch (err) {
    if (err instanceof RpcFault) {
      process.stderr.write(`error: ${err.message}\n`);
    } else {
      process.stderr.write(`error: ${(err as Error).message}\n`);
    }
    return 1;
  }
}

main().then((code) => process.exit(code));
