/** Spawn the real backend pieces (mock FHIR server, decision-support service)
 * so the client code is tested against its actual HTTP surfaces. */

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdirSync, mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import type { LaunchStore } from "../src/smart.js";

export class MemoryStore implements LaunchStore {
  private map = new Map<string, string>();

  getItem(key: string): string | null {
    return this.map.get(key) ?? null;
  }

  setItem(key: string, value: string): void {
    this.map.set(key, value);
  }

  removeItem(key: string): void {
    this.map.delete(key);
  }

  get size(): number {
    return this.map.size;
  }

  dump(): string[] {
    return [...this.map.entries()].map(([key, value]) => `${key}=${value}`);
  }
}

export function randomPort(): number {
  return 21000 + Math.floor(Math.random() * 20000);
}

export async function waitForHttp(url: string, timeoutMs = 30_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  let lastError: unknown = null;
  while (Date.now() < deadline) {
    try {
      const response = await fetch(url);
      if (response.ok) {
        return;
      }
      lastError = new Error(`HTTP ${response.status}`);
    } catch (error) {
      lastError = error;
    }
    await new Promise((resolve) => setTimeout(resolve, 150));
  }
  throw new Error(`${url} did not come up: ${String(lastError)}`);
}

export interface SpawnedServer {
  baseUrl: string;
  proc: ChildProcess;
}

export async function startMockFhir(): Promise<SpawnedServer> {
  const port = randomPort();
  const proc = spawn("python3", ["-m", "clinrag.mockfhir", "--port", String(port)], {
    stdio: ["ignore", "pipe", "pipe"],
  });
  const baseUrl = `http://127.0.0.1:${port}`;
  await waitForHttp(`${baseUrl}/.well-known/smart-configuration`);
  return { baseUrl, proc };
}

export interface SpawnedService extends SpawnedServer {
  feedbackPath: string;
  workdir: string;
}

/** Ingest a two-chunk corpus and serve it with a scripted generator. */
export async function startService(options: { responses: string[] }): Promise<SpawnedService> {
  const workdir = mkdtempSync(join(tmpdir(), "clinrag-ui-test-"));
  const corpusDir = join(workdir, "corpus", "htn");
  mkdirSync(corpusDir, { recursive: true });
  writeFileSync(
    join(corpusDir, "ace.txt"),
    "ACE inhibitors are first-line therapy for most adults with hypertension.",
  );
  writeFileSync(
    join(corpusDir, "ccb.txt"),
    "Calcium channel blockers are preferred for isolated systolic hypertension.",
  );

  const feedbackPath = join(workdir, "feedback.jsonl");
  const indexPath = join(workdir, "index");
  const port = randomPort();
  const configPath = join(workdir, "config.json");
  writeFileSync(
    configPath,
    JSON.stringify({
      listen: { host: "127.0.0.1", port },
      index_path: indexPath,
      embedder: { kind: "hash" },
      generator: { kind: "scripted", responses: options.responses },
      feedback_path: feedbackPath,
      cors_origins: ["*"],
    }),
  );

  const ingest = spawnSync(
    "python3",
    [
      "-m", "clinrag.cli", "ingest",
      "--corpus", join(workdir, "corpus"),
      "--index", indexPath,
      "--config", configPath,
    ],
    { encoding: "utf-8" },
  );
  if (ingest.status !== 0) {
    throw new Error(`ingest failed: ${ingest.stdout}\n${ingest.stderr}`);
  }

  const proc = spawn("python3", ["-m", "clinrag.cli", "serve", "--config", configPath], {
    stdio: ["ignore", "pipe", "pipe"],
  });
  const baseUrl = `http://127.0.0.1:${port}`;
  await waitForHttp(`${baseUrl}/health`);
  return { baseUrl, proc, feedbackPath, workdir };
}

export function stopServer(server: SpawnedServer | null): void {
  server?.proc.kill("SIGTERM");
}
