/**
 * End-to-end: a real survey service (spawned from the Python CLI), a real
 * session, 20 submissions, and byte-level image checks against the core's
 * own windowing.
 */

import { execFileSync, spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient, type Judgment } from "../src/api.js";
import { SurveySession } from "../src/session.js";
import { decodeGrayPng } from "./png.js";

const PORT = 8400 + (process.pid % 400);
const BASE = `http://127.0.0.1:${PORT}`;

let fixtureDir: string;
let surveyId: string;
let dataDir: string;
let expected: {
  item_id: string;
  windows: Record<string, { wc: number; ww: number; pixels: number[]; rows: number; cols: number }>;
};
let service: ChildProcess;

function collectKeys(node: unknown, into: Set<string>): void {
  if (Array.isArray(node)) {
    for (const v of node) collectKeys(v, into);
  } else if (node !== null && typeof node === "object") {
    for (const [k, v] of Object.entries(node)) {
      into.add(k);
      collectKeys(v, into);
    }
  }
}

async function waitForService(): Promise<void> {
  for (let attempt = 0; attempt < 120; attempt++) {
    try {
      const res = await fetch(`${BASE}/api/surveys/${surveyId}/items`);
      if (res.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 250));
  }
  throw new Error("survey service did not come up");
}

beforeAll(async () => {
  fixtureDir = mkdtempSync(join(tmpdir(), "survey-ui-e2e-"));
  const out = execFileSync(
    "python3",
    [join(__dirname, "helpers", "make_fixture.py"), fixtureDir],
    { encoding: "utf-8" },
  );
  const fixture = JSON.parse(out.trim().split("\n").at(-1)!) as {
    survey_id: string;
    data_dir: string;
    expected_path: string;
  };
  surveyId = fixture.survey_id;
  dataDir = fixture.data_dir;
  expected = JSON.parse(readFileSync(fixture.expected_path, "utf-8"));

  service = spawn(
    "python3",
    ["-m", "synthct_eval.cli", "survey", "serve", "--data-dir", dataDir,
     "--host", "127.0.0.1", "--port", String(PORT)],
    { stdio: "ignore" },
  );
  await waitForService();
}, 90_000);

afterAll(() => {
  service?.kill("SIGTERM");
  rmSync(fixtureDir, { recursive: true, force: true });
});

describe("survey UI end to end", () => {
  it("completes a 20-item survey writing exactly 20 well-formed log lines", async () => {
    const api = new ApiClient(BASE);
    const session = new SurveySession(api, surveyId, "e2e-rater");
    expect(await session.load()).toBe(20);

    const plan: Judgment[] = ["real", "synthetic", "indeterminable"];
    const fetchedPayloads: unknown[] = [{}];
    fetchedPayloads[0] = await api.listItems(surveyId);

    let k = 0;
    while (!session.complete) {
      const judgment = plan[k % plan.length]!;
      const rationale =
        k === 2 ? "contorni più netti del solito — sospetto 🫀" : undefined;
      const outcome = await session.submit(judgment, rationale);
      expect(outcome).toBe("accepted");
      k += 1;
    }
    expect(k).toBe(20);
    expect(session.done).toBe(20);

    const log = readFileSync(join(dataDir, surveyId, "responses.jsonl"), "utf-8");
    const lines = log.split("\n").filter((l) => l.trim().length > 0);
    expect(lines).toHaveLength(20);
    for (const line of lines) {
      const doc = JSON.parse(line) as Record<string, unknown>;
      expect(doc.survey_id).toBe(surveyId);
      expect(doc.rater_id).toBe("e2e-rater");
      expect([0, 1, 2]).toContain(doc.judgment);
      expect(typeof doc.item_id).toBe("string");
      expect(typeof doc.ts).toBe("string");
    }
    // unicode rationale round-trips verbatim
    const withRationale = lines.map((l) => JSON.parse(l)).find((d) => d.rationale);
    expect(withRationale?.rationale).toBe(
      "contorni più netti del solito — sospetto 🫀",
    );

    // the client never received ground truth anywhere
    const keys = new Set<string>();
    for (const payload of fetchedPayloads) collectKeys(payload, keys);
    expect(keys.has("truth")).toBe(false);
  }, 60_000);

  it("window/level change alters the image URL and pixels match core windowing", async () => {
    const api = new ApiClient(BASE);
    const session = new SurveySession(api, surveyId, "pixel-rater");
    await session.load();
    expect(session.currentItem?.item_id).toBe(expected.item_id);

    const defaultUrl = session.imageUrl()!;
    session.setWindow(expected.windows.bone!.wc, expected.windows.bone!.ww);
    const boneUrl = session.imageUrl()!;
    expect(boneUrl).not.toBe(defaultUrl);
    expect(boneUrl).toContain("wc=400");
    expect(boneUrl).toContain("ww=1800");

    for (const [name, url] of [["default", defaultUrl], ["bone", boneUrl]] as const) {
      const want = expected.windows[name]!;
      const res = await fetch(url);
      expect(res.status).toBe(200);
      expect(res.headers.get("content-type")).toBe("image/png");
      const img = decodeGrayPng(new Uint8Array(await res.arrayBuffer()));
      expect(img.width).toBe(want.cols);
      expect(img.height).toBe(want.rows);
      expect(img.pixels.length).toBe(want.pixels.length);
      let maxDiff = 0;
      for (let i = 0; i < img.pixels.length; i++) {
        maxDiff = Math.max(maxDiff, Math.abs(img.pixels[i]! - want.pixels[i]!));
      }
      expect(maxDiff).toBeLessThanOrEqual(1);
    }
  }, 60_000);

  it("duplicate submissions surface as already-judged without extra log lines", async () => {
    const before = readFileSync(join(dataDir, surveyId, "responses.jsonl"), "utf-8")
      .split("\n").filter((l) => l.trim()).length;

    const api = new ApiClient(BASE);
    const replay = new SurveySession(api, surveyId, "e2e-rater");
    await replay.load();
    const outcome = await replay.submit("synthetic");
    expect(outcome).toBe("already-judged");

    const after = readFileSync(join(dataDir, surveyId, "responses.jsonl"), "utf-8")
      .split("\n").filter((l) => l.trim()).length;
    expect(after).toBe(before);
  }, 60_000);
});
