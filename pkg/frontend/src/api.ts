// Typed client for the orchestrator HTTP API. Every method maps to exactly
// one endpoint; the UI performs no other requests.

import type {
  ClusterEdit,
  ClusterView,
  ExportDownload,
  JobSnapshot,
  OutlineEditResult,
  SectionEditResult,
  SessionSummary,
  SessionView,
  StageOptions,
} from "./types.js";

export type FetchLike = (
  url: string,
  init?: RequestInit,
) => Promise<Response>;

/** A non-2xx service response, carrying the error name from the body. */
export class ApiError extends Error {
  readonly status: number;
  readonly detail: string;

  constructor(name: string, detail: string, status: number) {
    super(`${name}: ${detail}`);
    this.name = name;
    this.detail = detail;
    this.status = status;
  }
}

export function isStale(err: unknown): boolean {
  return err instanceof ApiError && err.name === "StaleVersion";
}

async function errorFrom(response: Response): Promise<ApiError> {
  const text = await response.text();
  try {
    const body = JSON.parse(text);
    if (typeof body.error === "string") {
      return new ApiError(body.error, String(body.detail ?? ""), response.status);
    }
    // FastAPI request-validation failures use {detail: [...]}
    if (body.detail !== undefined) {
      return new ApiError("ValidationError", JSON.stringify(body.detail), response.status);
    }
  } catch {
    // non-JSON body, fall through
  }
  return new ApiError("HttpError", text || response.statusText, response.status);
}

interface MultipartBody {
  contentType: string;
  body: Uint8Array;
}

/**
 * Build a single-file multipart/form-data body by hand. Avoids relying on
 * FormData/File interop, which differs between browsers and test DOMs.
 */
export function multipartFile(
  filename: string,
  content: string | Uint8Array,
): MultipartBody {
  const boundary =
    "----surveygen-" + Math.random().toString(16).slice(2) + Date.now().toString(16);
  const enc = new TextEncoder();
  const head = enc.encode(
    `--${boundary}\r\n` +
      `Content-Disposition: form-data; name="file"; filename="${filename}"\r\n` +
      `Content-Type: application/octet-stream\r\n\r\n`,
  );
  const data = typeof content === "string" ? enc.encode(content) : content;
  const tail = enc.encode(`\r\n--${boundary}--\r\n`);
  const body = new Uint8Array(head.length + data.length + tail.length);
  body.set(head, 0);
  body.set(data, head.length);
  body.set(tail, head.length + data.length);
  return { contentType: `multipart/form-data; boundary=${boundary}`, body };
}

export class ApiClient {
  private readonly base: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl: string, fetchImpl?: FetchLike) {
    this.base = baseUrl.replace(/\/+$/, "");
    this.fetchImpl = fetchImpl ?? ((url, init) => fetch(url, init));
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchImpl(this.base + path, init);
    if (!response.ok) {
      throw await errorFrom(response);
    }
    return (await response.json()) as T;
  }

  health(): Promise<{ status: string; version: string }> {
    return this.request("GET", "/healthz");
  }

  listSessions(): Promise<SessionSummary[]> {
    return this.request("GET", "/sessions");
  }

  createSession(title: string, criterion?: string | null): Promise<SessionView> {
    const payload: Record<string, unknown> = { title };
    if (criterion) {
      payload.criterion = criterion;
    }
    return this.request("POST", "/sessions", payload);
  }

  getSession(sessionId: string): Promise<SessionView> {
    return this.request("GET", `/sessions/${sessionId}`);
  }

  async uploadReference(
    sessionId: string,
    filename: string,
    content: string | Uint8Array,
  ): Promise<{ reference: unknown; state: string }> {
    const { contentType, body } = multipartFile(filename, content);
    const response = await this.fetchImpl(
      `${this.base}/sessions/${sessionId}/references`,
      { method: "POST", headers: { "content-type": contentType }, body: body as BodyInit },
    );
    if (!response.ok) {
      throw await errorFrom(response);
    }
    return (await response.json()) as { reference: unknown; state: string };
  }

  runStage(sessionId: string, stage: string, options: StageOptions = {}): Promise<JobSnapshot> {
    return this.request("POST", `/sessions/${sessionId}/stages/${stage}`, {
      confirm: options.confirm ?? false,
      force: options.force ?? false,
    });
  }

  getJob(jobId: string): Promise<JobSnapshot> {
    return this.request("GET", `/jobs/${jobId}`);
  }

  reassignReference(sessionId: string, edit: ClusterEdit): Promise<ClusterView> {
    return this.request("PATCH", `/sessions/${sessionId}/clusters`, edit);
  }

  applyOutlineText(sessionId: string, version: number, text: string): Promise<OutlineEditResult> {
    return this.request("PATCH", `/sessions/${sessionId}/outline`, { version, text });
  }

  editSection(
    sessionId: string,
    index: number,
    version: number,
    body: string,
  ): Promise<SectionEditResult> {
    return this.request("PATCH", `/sessions/${sessionId}/sections/${index}`, {
      version,
      body,
    });
  }

  toggleAsset(
    sessionId: string,
    refId: string,
    assetIndex: number,
    enabled: boolean,
  ): Promise<{ disabled_assets: string[] }> {
    return this.request("PATCH", `/sessions/${sessionId}/assets`, {
      ref_id: refId,
      asset_index: assetIndex,
      enabled,
    });
  }

  exportUrl(sessionId: string, format: string): string {
    return `${this.base}/sessions/${sessionId}/export?format=${encodeURIComponent(format)}`;
  }

  async downloadExport(sessionId: string, format: string): Promise<ExportDownload> {
    const response = await this.fetchImpl(this.exportUrl(sessionId, format), {
      method: "GET",
    });
    if (!response.ok) {
      throw await errorFrom(response);
    }
    const bytes = new Uint8Array(await response.arrayBuffer());
    const warnings = Number(response.headers.get("x-export-warnings") ?? "0");
    return { format, filename: `survey-${format}.zip`, bytes, warnings };
  }
}
