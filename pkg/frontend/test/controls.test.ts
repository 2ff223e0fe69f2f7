import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import {
  TAG_UMBRELLA_ACTIVE,
  activateStudy,
  addNote,
  findTrialRecord,
  isActive,
  setExcluded,
} from "../src/controls.js";
import { initialFreshness, isStale, markSuccess } from "../src/staleness.js";
import { StubBackend } from "./stub_server.js";

describe("study controls write only tags, notes, and exclusion flags", () => {
  it("activate adds exactly the activation tag", async () => {
    const backend = new StubBackend();
    const umbrella = backend.addRecord("demo-study", { design_parameters: {} });
    const api = new ApiClient("http://stub", backend.fetch);
    expect(isActive(umbrella)).toBe(false);
    await activateStudy(api, umbrella);
    const refreshed = await api.recordByIdentifier("demo-study");
    expect(refreshed.tags).toEqual([TAG_UMBRELLA_ACTIVE]);
  });

  it("exclusion toggling and notes land in trial metadata", async () => {
    const backend = new StubBackend();
    backend.addRecord("demo-study-trial-3", { batch_index: 3 });
    const api = new ApiClient("http://stub", backend.fetch);
    const record = await findTrialRecord(api, "demo-study", 3);
    expect(record).not.toBeNull();
    await setExcluded(api, record!.record_id, true);
    await addNote(api, record!.record_id, "spread looks suspicious");
    const updated = await api.recordByIdentifier("demo-study-trial-3");
    expect(updated.metadata.excluded).toBe(true);
    expect(updated.metadata.notes).toEqual(["spread looks suspicious"]);
  });

  it("falls back to the prior-batch naming convention", async () => {
    const backend = new StubBackend();
    backend.addRecord("demo-study-prior-7", { batch_index: 7 });
    const api = new ApiClient("http://stub", backend.fetch);
    const record = await findTrialRecord(api, "demo-study", 7);
    expect(record?.identifier).toBe("demo-study-prior-7");
    expect(await findTrialRecord(api, "demo-study", 42)).toBeNull();
  });
});

describe("stale-data banner policy", () => {
  it("appears only after three silent poll intervals", () => {
    let state = initialFreshness(2000);
    expect(isStale(state, 10_000)).toBe(false); // nothing fetched yet
    state = markSuccess(state, 10_000);
    expect(isStale(state, 15_900)).toBe(false); // within 3 intervals
    expect(isStale(state, 16_100)).toBe(true); // beyond 3 intervals
    state = markSuccess(state, 16_200);
    expect(isStale(state, 17_000)).toBe(false); // fresh again
  });
});
