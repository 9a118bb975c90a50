// Shared test plumbing: boot the real service offline in a subprocess and
// drive the UI through plain DOM events.

import { File as NodeFile } from "node:buffer";
import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, readdirSync, rmSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import path from "node:path";

export const TOPIC = "Neural Approaches to Automated Text Summarization";

const REF_DIR = path.resolve(import.meta.dirname, "../../tests/data/refs");

export function bundledRefs(): { name: string; text: string }[] {
  return readdirSync(REF_DIR)
    .filter((name) => name.endsWith(".md"))
    .sort()
    .map((name) => ({
      name,
      text: readFileSync(path.join(REF_DIR, name), "utf8"),
    }));
}

/** Build a text file whose async reader methods work in the test DOM. */
export function textFile(name: string, text: string): File {
  return new NodeFile([text], name, { type: "text/markdown" }) as unknown as File;
}

export function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

export async function waitFor(
  predicate: () => boolean | Promise<boolean>,
  label = "condition",
  timeoutMs = 45_000,
  stepMs = 50,
): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    if (await predicate()) {
      return;
    }
    if (Date.now() > deadline) {
      throw new Error(`timed out waiting for ${label}`);
    }
    await sleep(stepMs);
  }
}

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const server = createServer();
    server.listen(0, "127.0.0.1", () => {
      const address = server.address();
      if (address !== null && typeof address === "object") {
        const port = address.port;
        server.close(() => resolve(port));
      } else {
        server.close(() => reject(new Error("no port assigned")));
      }
    });
    server.on("error", reject);
  });
}

export interface ServiceHandle {
  baseUrl: string;
  stop(): Promise<void>;
}

/** Start the orchestrator with offline providers in a scratch storage root. */
export async function startService(): Promise<ServiceHandle> {
  const port = await freePort();
  const storage = mkdtempSync(path.join(tmpdir(), "surveygen-ui-"));
  const env = {
    ...process.env,
    SURVEYGEN_STORAGE_ROOT: storage,
    SURVEYGEN_LLM_PROVIDER: "offline",
    SURVEYGEN_EMBED_PROVIDER: "hash",
    SURVEYGEN_EMBED_DIM: "64",
    SURVEYGEN_CHUNK_SIZE: "250",
    SURVEYGEN_CHUNK_OVERLAP: "50",
    SURVEYGEN_TAU_STATIC: "0.5",
    SURVEYGEN_K_SIGMA: "1.0",
    SURVEYGEN_CANDIDATE_COUNTS: "2,3,4",
    SURVEYGEN_SUBSECTION_SLOTS: "2",
    SURVEYGEN_ARXIV_DELAY: "0.0",
    SURVEYGEN_CONCURRENCY_CAP: "4",
  };
  const proc: ChildProcess = spawn(
    "python3",
    [
      "-m",
      "uvicorn",
      "--factory",
      "surveygen.service:create_default_app",
      "--host",
      "127.0.0.1",
      "--port",
      String(port),
      "--log-level",
      "warning",
    ],
    { env, stdio: "ignore" },
  );
  const baseUrl = `http://127.0.0.1:${port}`;
  const deadline = Date.now() + 60_000;
  for (;;) {
    if (proc.exitCode !== null) {
      throw new Error(`service exited with code ${proc.exitCode} before startup`);
    }
    try {
      const response = await fetch(`${baseUrl}/healthz`);
      if (response.ok) {
        break;
      }
    } catch {
      // not accepting connections yet
    }
    if (Date.now() > deadline) {
      proc.kill("SIGKILL");
      throw new Error("service did not become healthy in time");
    }
    await sleep(100);
  }
  return {
    baseUrl,
    stop: async () => {
      proc.kill("SIGTERM");
      await new Promise<void>((resolve) => {
        const fallback = setTimeout(() => {
          proc.kill("SIGKILL");
          resolve();
        }, 5_000);
        proc.once("exit", () => {
          clearTimeout(fallback);
          resolve();
        });
      });
      rmSync(storage, { recursive: true, force: true });
    },
  };
}

// -- DOM driving -----------------------------------------------------------

export function q<T extends Element = HTMLElement>(
  root: ParentNode,
  selector: string,
): T {
  const node = root.querySelector(selector);
  if (!node) {
    throw new Error(`missing element: ${selector}`);
  }
  return node as T;
}

export function setInput(
  input: HTMLInputElement | HTMLTextAreaElement,
  value: string,
): void {
  input.value = value;
  input.dispatchEvent(new Event("input", { bubbles: true }));
}

export function click(root: ParentNode, selector: string): void {
  q<HTMLButtonElement>(root, selector).click();
}

function fakeFileList(files: File[]): FileList {
  const list: Record<number | string | symbol, unknown> = {
    length: files.length,
    item: (index: number) => files[index] ?? null,
    [Symbol.iterator]: function* () {
      yield* files;
    },
  };
  files.forEach((file, index) => {
    list[index] = file;
  });
  return list as unknown as FileList;
}

/** Set a file input's files and fire its change event. */
export function attachFiles(input: HTMLInputElement, files: File[]): void {
  Object.defineProperty(input, "files", {
    value: fakeFileList(files),
    configurable: true,
  });
  input.dispatchEvent(new Event("change", { bubbles: true }));
}

export function mouse(type: string, x: number, y: number): MouseEvent {
  return new MouseEvent(type, {
    bubbles: true,
    cancelable: true,
    clientX: x,
    clientY: y,
    button: 0,
  });
}

export interface Point {
  x: number;
  y: number;
}

/** Press on the target, move across, release at the destination. */
export function drag(target: Element, from: Point, to: Point): void {
  target.dispatchEvent(mouse("mousedown", from.x, from.y));
  const doc = target.ownerDocument;
  doc.dispatchEvent(mouse("mousemove", (from.x + to.x) / 2, (from.y + to.y) / 2));
  doc.dispatchEvent(mouse("mousemove", to.x, to.y));
  doc.dispatchEvent(mouse("mouseup", to.x, to.y));
}
