import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { SurveySession } from "../src/session.js";
import { DEFAULT_WINDOW, PRESETS } from "../src/windowing.js";

type Call = { url: string; init?: RequestInit };

function fakeService(options: { failures?: number; duplicates?: Set<string> } = {}) {
  const calls: Call[] = [];
  const submitted: Array<Record<string, unknown>> = [];
  let failuresLeft = options.failures ?? 0;
  const items = Array.from({ length: 4 }, (_, i) => ({ item_id: `it.${i}` }));

  const fetchFn = async (url: string, init?: RequestInit): Promise<Response> => {
    calls.push({ url, init });
    if (url.endsWith("/items")) {
      return new Response(JSON.stringify(items), { status: 200 });
    }
    if (url.includes("/responses")) {
      if (failuresLeft > 0) {
        failuresLeft -= 1;
        throw new TypeError("network down");
      }
      const body = JSON.parse(String(init?.body)) as Record<string, unknown>;
      if (options.duplicates?.has(body.item_id as string)) {
        return new Response(null, { status: 409 });
      }
      submitted.push(body);
      return new Response(null, { status: 204 });
    }
    return new Response("png-bytes", { status: 200 });
  };
  return { fetchFn, calls, submitted, items };
}

describe("SurveySession", () => {
  it("loads items and exposes them in order", async () => {
    const service = fakeService();
    const session = new SurveySession(new ApiClient("", undefined, service.fetchFn), "s", "r");
    expect(await session.load()).toBe(4);
    expect(session.currentItem?.item_id).toBe("it.0");
    expect(session.total).toBe(4);
    expect(session.complete).toBe(false);
  });

  it("cannot advance without a submitted judgment", async () => {
    const service = fakeService();
    const session = new SurveySession(new ApiClient("", undefined, service.fetchFn), "s", "r");
    await session.load();
    expect(session.currentItem?.item_id).toBe("it.0");
    // nothing but submit() moves the cursor
    session.setWindow(100, 500);
    session.applyPreset("bone");
    expect(session.currentItem?.item_id).toBe("it.0");
    await session.submit("real");
    expect(session.currentItem?.item_id).toBe("it.1");
  });

  it("submits exactly once per item and completes", async () => {
    const service = fakeService();
    const session = new SurveySession(new ApiClient("", undefined, service.fetchFn), "s", "dr");
    await session.load();
    await session.submit("real", "texture looks clinical");
    await session.submit("synthetic");
    await session.submit("indeterminable");
    await session.submit("real");
    expect(session.complete).toBe(true);
    expect(session.currentItem).toBeNull();
    expect(service.submitted).toHaveLength(4);
    expect(service.submitted[0]).toMatchObject({
      rater_id: "dr",
      item_id: "it.0",
      judgment: "real",
      rationale: "texture looks clinical",
    });
    // empty rationale travels as null
    expect(service.submitted[1]?.rationale).toBeNull();
    expect(session.counts()).toEqual({ real: 2, synthetic: 1, indeterminable: 1 });
    await expect(session.submit("real")).rejects.toThrow("complete");
  });

  it("keeps the cursor on network failure so a retry can reuse the rationale", async () => {
    const service = fakeService({ failures: 1 });
    const session = new SurveySession(new ApiClient("", undefined, service.fetchFn), "s", "r");
    await session.load();
    await expect(session.submit("synthetic", "kept text")).rejects.toThrow("network down");
    expect(session.currentItem?.item_id).toBe("it.0");
    expect(session.done).toBe(0);
    // retry succeeds and advances
    await session.submit("synthetic", "kept text");
    expect(session.currentItem?.item_id).toBe("it.1");
    expect(service.submitted[0]?.rationale).toBe("kept text");
  });

  it("treats 409 as item-done and advances without overwriting", async () => {
    const service = fakeService({ duplicates: new Set(["it.0"]) });
    const session = new SurveySession(new ApiClient("", undefined, service.fetchFn), "s", "r");
    await session.load();
    const outcome = await session.submit("real");
    expect(outcome).toBe("already-judged");
    expect(session.currentItem?.item_id).toBe("it.1");
    expect(service.submitted).toHaveLength(0);
  });

  it("image URL tracks window/level changes", async () => {
    const service = fakeService();
    const session = new SurveySession(new ApiClient("", undefined, service.fetchFn), "s", "r");
    await session.load();
    expect(session.window).toEqual(DEFAULT_WINDOW);
    expect(session.imageUrl()).toBe("/api/items/it.0/image?wc=40&ww=400");
    session.setWindow(400, 1500);
    expect(session.imageUrl()).toBe("/api/items/it.0/image?wc=400&ww=1500");
    session.applyPreset("lung");
    expect(session.imageUrl()).toBe(
      `/api/items/it.0/image?wc=${PRESETS.lung.wc}&ww=${PRESETS.lung.ww}`,
    );
  });

  it("clamps non-positive widths instead of requesting invalid images", async () => {
    const service = fakeService();
    const session = new SurveySession(new ApiClient("", undefined, service.fetchFn), "s", "r");
    await session.load();
    session.setWindow(0, -50);
    expect(session.window.ww).toBe(1);
  });

  it("sends the bearer token on every call when configured", async () => {
    const service = fakeService();
    const api = new ApiClient("", "tok123", service.fetchFn);
    const session = new SurveySession(api, "s", "r");
    await session.load();
    await session.submit("real");
    for (const call of service.calls) {
      const headers = (call.init?.headers ?? {}) as Record<string, string>;
      expect(headers["Authorization"]).toBe("Bearer tok123");
    }
  });
});
