import { expect, test } from "vitest";

import { ApiClient, ApiError, isStale, multipartFile, type FetchLike } from "../src/api.js";

function jsonResponse(status: number, body: unknown, headers: Record<string, string> = {}): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json", ...headers },
  });
}

test("multipart body carries the filename and the exact content", () => {
  const { contentType, body } = multipartFile("reference.md", "# Title\n\nBody text");
  const text = new TextDecoder().decode(body);
  const boundary = contentType.split("boundary=")[1];
  expect(contentType.startsWith("multipart/form-data; boundary=")).toBe(true);
  expect(text.startsWith(`--${boundary}\r\n`)).toBe(true);
  expect(text).toContain('name="file"; filename="reference.md"');
  expect(text).toContain("# Title\n\nBody text");
  expect(text.endsWith(`\r\n--${boundary}--\r\n`)).toBe(true);
});

test("multipart accepts binary payloads unchanged", () => {
  const payload = new Uint8Array([0, 1, 2, 255, 254]);
  const { body } = multipartFile("doc.pdf", payload);
  const text = new TextDecoder("latin1").decode(body);
  const start = text.indexOf("\r\n\r\n") + 4;
  const slice = body.slice(start, start + payload.length);
  expect(Array.from(slice)).toEqual(Array.from(payload));
});

test("domain errors map to ApiError with the service's error name", async () => {
  const fetchImpl: FetchLike = async () =>
    jsonResponse(409, { error: "StaleVersion", detail: "outline is at version 3" });
  const api = new ApiClient("http://svc", fetchImpl);
  const err = await api.getSession("s1").catch((e) => e);
  expect(err).toBeInstanceOf(ApiError);
  expect(err.name).toBe("StaleVersion");
  expect(err.detail).toContain("version 3");
  expect(err.status).toBe(409);
  expect(isStale(err)).toBe(true);
});

test("request-validation failures become ValidationError", async () => {
  const fetchImpl: FetchLike = async () =>
    jsonResponse(422, { detail: [{ loc: ["body", "title"], msg: "field required" }] });
  const api = new ApiClient("http://svc", fetchImpl);
  const err = await api.createSession("").catch((e) => e);
  expect(err.name).toBe("ValidationError");
  expect(err.detail).toContain("field required");
  expect(isStale(err)).toBe(false);
});

test("non-JSON failures become HttpError with the raw body", async () => {
  const fetchImpl: FetchLike = async () =>
    new Response("bad gateway", { status: 502 });
  const api = new ApiClient("http://svc", fetchImpl);
  const err = await api.getJob("j1").catch((e) => e);
  expect(err.name).toBe("HttpError");
  expect(err.detail).toBe("bad gateway");
});

test("stage requests always send confirm and force flags", async () => {
  const bodies: unknown[] = [];
  const fetchImpl: FetchLike = async (_url, init) => {
    bodies.push(JSON.parse(String(init?.body)));
    return jsonResponse(202, { job_id: "j", session_id: "s", stage: "outline", state: "running", progress: 0, message: "", error: "" });
  };
  const api = new ApiClient("http://svc", fetchImpl);
  await api.runStage("s1", "outline");
  await api.runStage("s1", "compose", { confirm: true, force: true });
  expect(bodies).toEqual([
    { confirm: false, force: false },
    { confirm: true, force: true },
  ]);
});

test("export download exposes the warning count header", async () => {
  const fetchImpl: FetchLike = async () =>
    new Response(new Uint8Array([80, 75, 3, 4]), {
      status: 200,
      headers: { "x-export-warnings": "2" },
    });
  const api = new ApiClient("http://svc", fetchImpl);
  const result = await api.downloadExport("s1", "markdown");
  expect(result.filename).toBe("survey-markdown.zip");
  expect(result.bytes.length).toBe(4);
  expect(result.warnings).toBe(2);
});

test("trailing slashes in the base URL are normalized", async () => {
  const urls: string[] = [];
  const fetchImpl: FetchLike = async (url) => {
    urls.push(url);
    return jsonResponse(200, []);
  };
  const api = new ApiClient("http://svc///", fetchImpl);
  await api.listSessions();
  expect(urls).toEqual(["http://svc/sessions"]);
});
