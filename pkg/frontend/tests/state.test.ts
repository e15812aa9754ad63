import { describe, expect, it } from "vitest";
import { readFileSync } from "node:fs";

import { diffParams } from "../src/diff";
import { mergeRequest, sameParams } from "../src/merge";
import {
  DRAFT_TNUM,
  commitError,
  commitResult,
  exportCards,
  importCards,
  newCard,
  requestBody,
  reroll,
  withEdit,
} from "../src/state";
import type { ErrorDoc, PowerDoc } from "../src/types";
import { isErrorDoc } from "../src/types";

function fixture<T>(name: string): { doc: T; raw: string } {
  const raw = readFileSync(new URL(`fixtures/${name}`, import.meta.url), "utf8");
  return { doc: JSON.parse(raw) as T, raw };
}

const baseline = fixture<PowerDoc>("power_baseline_draft.json");
const certified = fixture<PowerDoc>("power_baseline_certified.json");
const edited = fixture<PowerDoc>("power_icc2_020_draft.json");
const invalid = fixture<ErrorDoc>("power_invalid.json");

describe("mergeRequest", () => {
  it("overrides a single key and leaves the rest", () => {
    const merged = mergeRequest(baseline.doc.request, { "ICC.2": 0.2 });
    expect(merged["ICC.2"]).toBe(0.2);
    expect(merged["nbar"]).toBe(baseline.doc.request["nbar"]);
  });

  it("removes keys set to undefined", () => {
    const merged = mergeRequest(baseline.doc.request, { K: undefined });
    expect("K" in merged).toBe(false);
  });

  it("no-op merge is structurally identical", () => {
    const merged = mergeRequest(baseline.doc.request, {});
    expect(sameParams(merged, baseline.doc.request)).toBe(true);
  });
});

describe("diffParams", () => {
  it("baseline vs ICC.2 edit differs in exactly that key", () => {
    const diffs = diffParams(baseline.doc.request, edited.doc.request);
    expect(diffs.map((d) => d.key)).toEqual(["ICC.2"]);
    // The service echoes the resolved per-outcome vectors.
    expect(diffs[0]?.left).toEqual([0.05, 0.05, 0.05, 0.05, 0.05]);
    expect(diffs[0]?.right).toEqual([0.2, 0.2, 0.2, 0.2, 0.2]);
  });

  it("draft vs certified differ only in tnum", () => {
    const diffs = diffParams(baseline.doc.request, certified.doc.request);
    expect(diffs.map((d) => d.key)).toEqual(["tnum"]);
    expect(diffs[0]?.left).toBe(DRAFT_TNUM);
    expect(diffs[0]?.right).toBe(50000);
  });

  it("identical requests diff to nothing", () => {
    expect(diffParams(baseline.doc.request, baseline.doc.request)).toEqual([]);
  });
});

describe("scenario cards", () => {
  it("new cards start dirty with no results", () => {
    const card = newCard("a", { nbar: 10 }, 7);
    expect(card.dirty).toBe(true);
    expect(card.latest).toBeNull();
    expect(card.seed).toBe(7);
  });

  it("draft mode pins tnum and certify restores the requested tnum", () => {
    const card = newCard("a", { ...baseline.doc.request, tnum: 50000 }, 0);
    expect(requestBody(card, false)["tnum"]).toBe(DRAFT_TNUM);
    expect(requestBody(card, true)["tnum"]).toBe(50000);
    const fullRun = { ...card, draft: false };
    expect(requestBody(fullRun, false)["tnum"]).toBe(50000);
  });

  it("committing a result clears dirty and adopts the echoed request", () => {
    const card = newCard("a", { ...baseline.doc.request }, 0);
    const after = commitResult(card, baseline.doc, baseline.raw, false);
    expect(after.dirty).toBe(false);
    expect(after.request).toEqual(baseline.doc.request);
    expect(after.latest?.rawText).toBe(baseline.raw);
    expect(after.latest?.certified).toBe(false);
    expect(after.seed).toBe(baseline.doc.seed);
  });

  it("an edit marks the card dirty and a rerun keeps the prior result", () => {
    let card = newCard("a", { ...baseline.doc.request }, 0);
    card = commitResult(card, baseline.doc, baseline.raw, false);
    card = withEdit(card, { "ICC.2": 0.2 });
    expect(card.dirty).toBe(true);
    expect(card.latest?.doc).toBe(baseline.doc);
    card = commitResult(card, edited.doc, edited.raw, false);
    expect(card.dirty).toBe(false);
    expect(card.prior?.doc).toBe(baseline.doc);
    expect(card.latest?.doc).toBe(edited.doc);
  });

  it("a validation error keeps the stale result and maps field errors", () => {
    let card = newCard("a", { ...baseline.doc.request }, 0);
    card = commitResult(card, baseline.doc, baseline.raw, false);
    card = withEdit(card, { Tbar: 1.3 });
    card = commitError(card, invalid.doc);
    expect(card.dirty).toBe(true);
    expect(card.latest?.doc).toBe(baseline.doc);
    expect(card.fieldErrors.length).toBeGreaterThan(0);
    expect(card.fieldErrors[0]?.path).toContain("Tbar");
  });

  it("reroll swaps in a freshly drawn seed and marks the card dirty", () => {
    const card = newCard("a", { nbar: 10 }, 3);
    const next = reroll(card, () => 12345);
    expect(next.seed).toBe(12345);
    expect(next.dirty).toBe(true);
  });
});

describe("export and import", () => {
  it("round-trips labels, requests, and seeds", () => {
    const cards = [
      newCard("a", { ...baseline.doc.request }, 11),
      newCard("b", { ...edited.doc.request }, 12),
    ];
    const out = importCards(exportCards(cards));
    expect(out).toHaveLength(2);
    expect(out[0]?.label).toBe("a");
    expect(out[0]?.seed).toBe(11);
    expect(out[1]?.request["ICC.2"]).toEqual([0.2, 0.2, 0.2, 0.2, 0.2]);
  });

  it("rejects malformed payloads", () => {
    expect(() => importCards("[]")).toThrow();
    expect(() => importCards('{"format": "other"}')).toThrow();
    expect(() =>
      importCards(
        '{"format": "pump-explorer-scenarios", "version": 1, "scenarios": [{"label": 3}]}',
      ),
    ).toThrow();
  });
});

describe("error doc guard", () => {
  it("separates result documents from error documents", () => {
    expect(isErrorDoc(invalid.doc)).toBe(true);
    expect(isErrorDoc(baseline.doc)).toBe(false);
  });

  it("the captured validation error points at the offending field", () => {
    expect(invalid.doc.error.type).toBe("validation");
    const paths = invalid.doc.error.fields.map((f) => f.path);
    expect(paths.some((p) => p.includes("Tbar"))).toBe(true);
  });
});
