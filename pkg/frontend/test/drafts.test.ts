import { describe, expect, it } from "vitest";

import { LabelDraft, clustersOfSelection, validateDraft } from "../src/drafts.js";

describe("clustersOfSelection", () => {
  const labels = [0, 0, 1, 1, -1, 2];

  it("collects distinct cluster ids in ascending order", () => {
    expect(clustersOfSelection([5, 0, 3, 1], labels)).toEqual([0, 1, 2]);
  });

  it("ignores noise rows and unknown rows", () => {
    expect(clustersOfSelection([4], labels)).toEqual([]);
    expect(clustersOfSelection([99], labels)).toEqual([]);
  });
});

describe("validateDraft", () => {
  it("flags an empty draft", () => {
    expect(validateDraft([])).toMatch(/empty/);
  });

  it("flags a cluster claimed twice", () => {
    const problem = validateDraft([
      { clusters: [0, 1], name: "a", tag: "healthy" },
      { clusters: [1], name: "b", tag: "faulty" },
    ]);
    expect(problem).toMatch(/cluster 1 appears in both "a" and "b"/);
  });

  it("flags missing names and empty cluster sets", () => {
    expect(validateDraft([{ clusters: [0], name: "  ", tag: "healthy" }])).toMatch(/name/);
    expect(validateDraft([{ clusters: [], name: "x", tag: "healthy" }])).toMatch(/no clusters/);
  });

  it("accepts a consistent draft", () => {
    expect(
      validateDraft([
        { clusters: [0, 2], name: "operating", tag: "healthy" },
        { clusters: [1], name: "shutdown", tag: "transient" },
      ]),
    ).toBeNull();
  });
});

describe("LabelDraft", () => {
  it("cannot submit while empty, can after an entry", () => {
    const draft = new LabelDraft();
    expect(draft.canSubmit).toBe(false);
    draft.add([0, 1], "operating", "healthy");
    expect(draft.canSubmit).toBe(true);
    expect(draft.unsent).toBe(true);
  });

  it("rejects adding an entry that reuses a cluster", () => {
    const draft = new LabelDraft();
    draft.add([0], "a", "healthy");
    expect(() => draft.add([0], "b", "faulty")).toThrow(/appears in both/);
    expect(draft.entries).toHaveLength(1);
  });

  it("normalizes cluster order and duplicate ids within an entry", () => {
    const draft = new LabelDraft();
    draft.add([2, 0, 2], "merged", "unknown");
    expect(draft.entries[0]!.clusters).toEqual([0, 2]);
  });

  it("round-trips to API override entries", () => {
    const draft = new LabelDraft();
    draft.add([1], "shutdown", "transient");
    expect(draft.toOverrides()).toEqual([{ clusters: [1], name: "shutdown", tag: "transient" }]);
  });

  it("clear resets the unsent flag", () => {
    const draft = new LabelDraft();
    draft.add([0], "a", "healthy");
    draft.clear();
    expect(draft.entries).toHaveLength(0);
    expect(draft.unsent).toBe(false);
  });
});
