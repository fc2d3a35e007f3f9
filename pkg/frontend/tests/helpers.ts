import { type ChildProcess, spawn } from "node:child_process";
import { once } from "node:events";
import * as path from "node:path";
import { fileURLToPath } from "node:url";

import type { ConfigPayload } from "../src/types.js";

export const REPO_ROOT = path.resolve(
  path.dirname(fileURLToPath(import.meta.url)),
  "..",
  "..",
);

export const TWO_SEM = path.join(REPO_ROOT, "models", "two_sem.rybu");

export interface RunningServer {
  baseUrl: string;
  stop(): Promise<void>;
}

/** Spawn the real service on an ephemeral port and wait until it answers. */
export async function startServer(modelPath: string = TWO_SEM): Promise<RunningServer> {
  const child: ChildProcess = spawn(
    "python3",
    ["-m", "rybu.cli", "serve", modelPath, "--port", "0"],
    { cwd: REPO_ROOT, stdio: ["ignore", "pipe", "pipe"] },
  );
  const port = await new Promise<number>((resolve, reject) => {
    let buffer = "";
    const timer = setTimeout(() => reject(new Error("service did not start")), 15_000);
    child.stdout!.on("data", (chunk: Buffer) => {
      buffer += chunk.toString();
      const match = buffer.match(/serving on http:\/\/[^:]+:(\d+)/);
      if (match) {
        clearTimeout(timer);
        resolve(Number(match[1]));
      }
    });
    child.stderr!.on("data", () => {});
    child.on("exit", (code) => {
      clearTimeout(timer);
      reject(new Error(`service exited early with ${code}`));
    });
  });
  const baseUrl = `http://127.0.0.1:${port}`;
  for (let i = 0; i < 100; i++) {
    try {
      const response = await fetch(`${baseUrl}/model`);
      if (response.ok) break;
    } catch {
      await new Promise((r) => setTimeout(r, 100));
    }
  }
  return {
    baseUrl,
    async stop() {
      child.kill("SIGINT");
      await Promise.race([once(child, "exit"), new Promise((r) => setTimeout(r, 2000))]);
      if (child.exitCode === null) child.kill("SIGKILL");
    },
  };
}

/** Run the command-line stepper with scripted input; return its stdout. */
export async function runSimulate(commands: string, modelPath: string = TWO_SEM): Promise<string> {
  const child = spawn("python3", ["-m", "rybu.cli", "simulate", modelPath], {
    cwd: REPO_ROOT,
    stdio: ["pipe", "pipe", "pipe"],
  });
  child.stdin!.write(commands);
  child.stdin!.end();
  let output = "";
  child.stdout!.on("data", (chunk: Buffer) => {
    output += chunk.toString();
  });
  await once(child, "exit");
  return output;
}

/** The engine's canonical one-line rendering of a configuration, rebuilt
 *  from a JSON payload so API states can be compared with CLI output. */
export function canonicalConfig(config: ConfigPayload): string {
  const parts: string[] = [];
  for (const server of Object.keys(config.servers).sort()) {
    parts.push(`${server}=${config.servers[server]}`);
  }
  for (const agent of Object.keys(config.pending).sort()) {
    const m = config.pending[agent];
    parts.push(`${agent}.${m.server}.${m.service}`);
  }
  for (const agent of [...config.terminated].sort()) {
    parts.push(`${agent}:stopped`);
  }
  return `<${parts.join(" ")}>`;
}
