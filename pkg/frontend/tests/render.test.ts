import { describe, expect, it } from "vitest";
import { readFileSync } from "node:fs";

import { renderDiff } from "../src/render/diffview";
import {
  DEFAULT_CELL_CAP,
  gridDefinitions,
  planGrid,
  renderGridView,
} from "../src/render/heatmap";
import { renderInspector } from "../src/render/inspector";
import { renderPowerTable } from "../src/render/table";
import { renderSearchPanel } from "../src/render/trace";
import { diffParams } from "../src/diff";
import type { GridDoc, PowerDoc, SearchDoc } from "../src/types";

function fixture<T>(name: string): { doc: T; raw: string } {
  const raw = readFileSync(new URL(`fixtures/${name}`, import.meta.url), "utf8");
  return { doc: JSON.parse(raw) as T, raw };
}

const baseline = fixture<PowerDoc>("power_baseline_draft.json");
const icc20 = fixture<PowerDoc>("power_icc2_020_draft.json");
const grid28 = fixture<GridDoc>("grid_icc28.json");
const gridHoles = fixture<GridDoc>("grid_holes.json");
const sampleK = fixture<SearchDoc>("sample_k.json");
const mdes = fixture<SearchDoc>("mdes_hod1.json");
const nonconv = fixture<SearchDoc>("search_nonconverged.json");

describe("renderPowerTable", () => {
  it("shows every response cell with its exact value in the tooltip", () => {
    const html = renderPowerTable(baseline.doc, false);
    for (const row of baseline.doc.result.table) {
      expect(html).toContain(`value ${row.value} (mc_se ${row.mc_se})`);
    }
    const cells = html.match(/<td title="value /g) ?? [];
    expect(cells).toHaveLength(baseline.doc.result.table.length);
  });

  it("marks stale results and omits the badge on fresh ones", () => {
    expect(renderPowerTable(baseline.doc, true)).toContain("stale-badge");
    expect(renderPowerTable(baseline.doc, false)).not.toContain("stale-badge");
  });

  it("keeps procedures in response order as columns", () => {
    const html = renderPowerTable(baseline.doc, false);
    const noneAt = html.indexOf("<th>None</th>");
    const hoAt = html.indexOf("<th>HO</th>");
    expect(noneAt).toBeGreaterThan(-1);
    expect(hoAt).toBeGreaterThan(noneAt);
  });

  it("renders the adjusted individual power the edit example expects", () => {
    // Raising ICC.2 from 0.05 to 0.20 drops the adjusted individual power
    // to about 0.10 in the captured response.
    const row = icc20.doc.result.table.find(
      (r) => r.MTP === "HO" && r.definition === "D1indiv",
    );
    expect(row?.value).toBeCloseTo(0.1075, 10);
    expect(renderPowerTable(icc20.doc, false)).toContain("0.107");
  });

  it("fills definitions absent under a procedure with a placeholder", () => {
    // min1..complete exist only for the adjusted procedure, so the
    // unadjusted column shows placeholders on those rows.
    const html = renderPowerTable(baseline.doc, false);
    expect(html).toContain('class="absent"');
  });
});

describe("planGrid", () => {
  it("accepts a grid under the cap", () => {
    const plan = planGrid({ "ICC.2": [0, 0.1, 0.2], "ICC.3": [0, 0.2] }, 400);
    expect(plan).toMatchObject({ ok: true, cells: 6 });
  });

  it("rejects an oversized grid with a coarsening hint", () => {
    const values = Array.from({ length: 30 }, (_, i) => i);
    const plan = planGrid({ nbar: values, J: values }, DEFAULT_CELL_CAP);
    expect(plan.ok).toBe(false);
    expect(plan.cells).toBe(900);
    expect(plan.reason).toContain("coarsen");
  });

  it("a single value per axis is a one-cell grid", () => {
    const plan = planGrid({ "ICC.2": [0.1] }, 400);
    expect(plan).toMatchObject({ ok: true, cells: 1 });
  });
});

describe("renderGridView", () => {
  it("renders all 28 cells of the captured two-way surface", () => {
    const html = renderGridView(grid28.doc, "HO", ["D1indiv"]);
    const cells = html.match(/<g class="cell">/g) ?? [];
    expect(cells).toHaveLength(28);
    expect(html).toContain("ICC.2");
    expect(html).toContain("ICC.3");
  });

  it("facets by definition", () => {
    const defs = gridDefinitions(grid28.doc, "HO");
    expect(defs).toContain("D1indiv");
    expect(defs).toContain("min1");
    expect(defs).toContain("complete");
    const html = renderGridView(grid28.doc, "HO", defs);
    const facets = html.match(/<svg/g) ?? [];
    expect(facets).toHaveLength(defs.length);
  });

  it("draws invalid cells as holes with the reason in the tooltip", () => {
    const html = renderGridView(gridHoles.doc, "HO", ["D1indiv"]);
    const holes = html.match(/<g class="hole">/g) ?? [];
    expect(holes).toHaveLength(2);
    expect(html).toContain("ICC.2 + ICC.3 must be");
  });

  it("puts cell values from the response into the tiles", () => {
    const first = grid28.doc.result.rows.find(
      (r) => r.MTP === "HO" && r.definition === "D1indiv" && r.status === "ok",
    );
    const html = renderGridView(grid28.doc, "HO", ["D1indiv"]);
    expect(first?.value).toBeCloseTo(0.996, 10);
    expect(html).toContain("1.00");
  });
});

describe("renderSearchPanel", () => {
  it("reports the converged answer with step count", () => {
    const html = renderSearchPanel(sampleK.doc);
    expect(html).toContain("<b>15</b>");
    expect(html).toContain("0.805");
    expect(sampleK.doc.result.steps).toBe(1);
    expect(html).toContain("in 1 step");
  });

  it("draws one probe circle per trace entry, sized by tnum", () => {
    const html = renderSearchPanel(sampleK.doc);
    const probes = html.match(/<circle class="probe"/g) ?? [];
    expect(probes).toHaveLength(sampleK.doc.result.trace.length);
    expect(probes).toHaveLength(7);
    const radii = [...html.matchAll(/<circle class="probe"[^>]*r="([\d.]+)"/g)].map(
      (m) => Number(m[1]),
    );
    expect(new Set(radii).size).toBeGreaterThan(1);
    const biggest = Math.max(...radii);
    expect(biggest).toBeCloseTo(7.5, 5);
  });

  it("draws the fitted curve from the response samples", () => {
    const html = renderSearchPanel(sampleK.doc);
    expect(sampleK.doc.result.curve).toHaveLength(41);
    expect(html).toContain('<path class="curve"');
  });

  it("shows the target power line", () => {
    const html = renderSearchPanel(mdes.doc);
    expect(html).toContain('class="target"');
    expect(html).toContain("target power 0.8");
  });

  it("labels the answer for a minimum detectable effect search", () => {
    const html = renderSearchPanel(mdes.doc);
    expect(html).toContain("0.10474715456329377");
  });

  it("flags a non-converged search and still shows the best candidate", () => {
    const html = renderSearchPanel(nonconv.doc);
    expect(html).toContain("did not converge");
    expect(html).toContain("best candidate");
    expect(html).toContain(String(nonconv.doc.result.value));
  });
});

describe("renderInspector", () => {
  it("shows the exact response text", () => {
    const html = renderInspector(baseline.raw);
    expect(html).toContain("&quot;");
    const unescaped = html
      .replace(/^<pre class="inspector">/, "")
      .replace(/<\/pre>$/, "")
      .replace(/&quot;/g, '"')
      .replace(/&gt;/g, ">")
      .replace(/&lt;/g, "<")
      .replace(/&#39;/g, "'")
      .replace(/&amp;/g, "&");
    expect(unescaped).toBe(baseline.raw);
  });

  it("renders an empty state without a response", () => {
    expect(renderInspector(null)).toContain("no response");
  });
});

describe("renderDiff", () => {
  it("lists only differing parameters", () => {
    const diffs = diffParams(baseline.doc.request, icc20.doc.request);
    const html = renderDiff("a", "b", diffs);
    expect(html).toContain("ICC.2");
    expect(html).not.toContain("nbar");
  });

  it("says so when requests are identical", () => {
    expect(renderDiff("a", "b", [])).toContain("identical");
  });
});
