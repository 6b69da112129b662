#!/usr/bin/env node
/**
 * runner <code-file> --timeout <seconds> [--workdir <dir>] [--interpreter <cmd>]
 *
 * Executes one generated script in an isolated working directory under a
 * wall-clock timeout, then prints exactly one JSON envelope line on stdout:
 *
 *   {"stdout": "...", "stderr": "...", "exit_code": 0, "duration_ms": 12, "timed_out": false}
 *
 * Script failures (nonzero exit, timeout, missing interpreter) are data in
 * the envelope; the runner itself exits nonzero only when invoked wrongly.
 */

import { spawn } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

const STREAM_CAP_BYTES = 1024 * 1024;
const TRUNCATION_MARK = "\n[output truncated at 1 MiB]";
const KILL_GRACE_MS = 2000;

interface Envelope {
  stdout: string;
  stderr: string;
  exit_code: number;
  duration_ms: number;
  timed_out: boolean;
}

interface CliArgs {
  codeFile: string;
  timeoutS: number;
  workdir?: string;
  interpreter: string[];
}

function usageError(message: string): never {
  process.stderr.write(`runner: ${message}\n`);
  process.stderr.write("usage: runner <code-file> --timeout <seconds> [--workdir <dir>] [--interpreter <cmd>]\n");
  process.exit(2);
}

function parseArgs(argv: string[]): CliArgs {
  let codeFile: string | undefined;
  let timeoutS: number | undefined;
  let workdir: string | undefined;
  let interpreter = (process.env.RUNNER_INTERPRETER ?? "python3").split(/\s+/);

  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (arg === "--timeout") {
      timeoutS = Number(argv[++i]);
    } else if (arg === "--workdir") {
      workdir = argv[++i];
    } else if (arg === "--interpreter") {
      const value = argv[++i];
      if (!value) usageError("--interpreter needs a value");
      interpreter = value.split(/\s+/).filter((part) => part.length > 0);
    } else if (arg.startsWith("--")) {
      usageError(`unknown option ${arg}`);
    } else if (codeFile === undefined) {
      codeFile = arg;
    } else {
      usageError(`unexpected argument ${arg}`);
    }
  }

  if (!codeFile) usageError("missing code file");
  if (timeoutS === undefined || Number.isNaN(timeoutS) || timeoutS <= 0) {
    usageError("--timeout must be a positive number of seconds");
  }
  if (interpreter.length === 0) usageError("empty interpreter command");
  return { codeFile, timeoutS, workdir, interpreter };
}

/** Only PATH, HOME, and locale settings survive into the script. */
function scrubbedEnv(): NodeJS.ProcessEnv {
  const keep = ["PATH", "HOME", "LANG", "LC_ALL", "LC_CTYPE"];
  const env: NodeJS.ProcessEnv = {};
  for (const key of keep) {
    if (process.env[key] !== undefined) env[key] = process.env[key];
  }
  return env;
}

class CappedBuffer {
  private chunks: Buffer[] = [];
  private size = 0;
  private truncated = false;

  push(chunk: Buffer): void {
    if (this.size >= STREAM_CAP_BYTES) {
      this.truncated = true;
      return;
    }
    const room = STREAM_CAP_BYTES - this.size;
    if (chunk.length > room) {
      this.chunks.push(chunk.subarray(0, room));
      this.size = STREAM_CAP_BYTES;
      this.truncated = true;
    } else {
      this.chunks.push(chunk);
      this.size += chunk.length;
    }
  }

  text(): string {
    const joined = Buffer.concat(this.chunks).toString("utf8");
    return this.truncated ? joined + TRUNCATION_MARK : joined;
  }
}

function emit(envelope: Envelope): void {
  if (envelope.timed_out && envelope.exit_code === 0) {
    envelope.exit_code = 124;
  }
  process.stdout.write(JSON.stringify(envelope) + "\n");
}

function killTree(pid: number): void {
  try {
    process.kill(-pid, "SIGKILL"); // negative pid: the whole process group
  } catch {
    try {
      process.kill(pid, "SIGKILL");
    } catch {
      /* already gone */
    }
  }
}

function runScript(args: CliArgs, workdir: string, cleanup: () => void): void {
  const stagedCode = path.join(workdir, path.basename(args.codeFile));
  if (path.resolve(stagedCode) !== path.resolve(args.codeFile)) {
    fs.copyFileSync(args.codeFile, stagedCode);
  }

  const start = Date.now();
  const [command, ...commandArgs] = args.interpreter;
  const child = spawn(command, [...commandArgs, path.basename(stagedCode)], {
    cwd: workdir,
    env: scrubbedEnv(),
    stdio: ["ignore", "pipe", "pipe"],
    detached: true,
  });

  const stdout = new CappedBuffer();
  const stderr = new CappedBuffer();
  child.stdout.on("data", (chunk: Buffer) => stdout.push(chunk));
  child.stderr.on("data", (chunk: Buffer) => stderr.push(chunk));

  let timedOut = false;
  let finished = false;
  const timer = setTimeout(() => {
    timedOut = true;
    if (child.pid !== undefined) killTree(child.pid);
  }, args.timeoutS * 1000);
  timer.unref?.();

  const finish = (envelope: Envelope) => {
    if (finished) return;
    finished = true;
    clearTimeout(timer);
    cleanup();
    emit(envelope);
  };

  child.on("error", (error: NodeJS.ErrnoException) => {
    finish({
      stdout: "",
      stderr: `failed to launch interpreter '${command}': ${error.message}`,
      exit_code: 127,
      duration_ms: Date.now() - start,
      timed_out: false,
    });
  });

  child.on("close", (code, signal) => {
    let exitCode: number;
    if (code !== null) {
      exitCode = code;
    } else if (signal !== null) {
      exitCode = 124;
    } else {
      exitCode = 1;
    }
    finish({
      stdout: stdout.text(),
      stderr: stderr.text(),
      exit_code: exitCode,
      duration_ms: Math.min(Date.now() - start, args.timeoutS * 1000 + KILL_GRACE_MS),
      timed_out: timedOut,
    });
  });
}

function main(): void {
  const args = parseArgs(process.argv.slice(2));

  if (!fs.existsSync(args.codeFile)) {
    // a missing script is a caller fault, not a script failure
    usageError(`code file not found: ${args.codeFile}`);
  }

  let workdir: string;
  let cleanup: () => void = () => {};
  if (args.workdir) {
    workdir = args.workdir;
    if (!fs.existsSync(workdir)) usageError(`workdir not found: ${workdir}`);
  } else {
    workdir = fs.mkdtempSync(path.join(os.tmpdir(), "runner-"));
    cleanup = () => {
      try {
        fs.rmSync(workdir, { recursive: true, force: true });
      } catch {
        /* best effort */
      }
    };
  }

  runScript(args, workdir, cleanup);
}

main();
