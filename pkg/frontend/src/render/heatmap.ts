// Grid rendering: one heatmap facet per power definition for a chosen
// procedure, laid out on the two varying parameters. Invalid cells render
// as holes carrying the service's validation message in a tooltip.

import { escapeHtml, fmt } from "../format";
import type { GridDoc, GridRow } from "../types";

export const DEFAULT_CELL_CAP = 400;

export interface GridPlan {
  ok: boolean;
  cells: number;
  cap: number;
  reason?: string;
}

// The cap check runs before any request is sent.
export function planGrid(
  varying: Record<string, unknown[]>,
  cap = DEFAULT_CELL_CAP,
): GridPlan {
  const names = Object.keys(varying);
  const cells = names.reduce((n, k) => n * (varying[k]?.length ?? 0), 1);
  if (names.length === 0 || cells === 0) {
    return { ok: false, cells, cap, reason: "give each parameter at least one value" };
  }
  if (cells > cap) {
    return {
      ok: false,
      cells,
      cap,
      reason: `${cells} cells exceed the cap of ${cap}; coarsen the value lists`,
    };
  }
  return { ok: true, cells, cap };
}

interface CellLookup {
  values: Map<string, GridRow>;
  holes: Map<string, string>;
}

function cellKey(row: GridRow, names: string[]): string {
  return names.map((n) => String(row[n])).join("\u0000");
}

function index(doc: GridDoc, mtp: string, definition: string): CellLookup {
  const names = Object.keys(doc.request.varying);
  const values = new Map<string, GridRow>();
  const holes = new Map<string, string>();
  for (const row of doc.result.rows) {
    const key = cellKey(row, names);
    if (row.status !== "ok") {
      holes.set(key, row.status);
    } else if (row.MTP === mtp && row.definition === definition) {
      values.set(key, row);
    }
  }
  return { values, holes };
}

const CELL = 34;
const GAP = 2;
const LEFT = 64;
const TOP = 20;

function fill(value: number): string {
  // Two-anchor gradient; geometry only, the number itself came from the
  // service and rides along in the tooltip.
  const t = Math.max(0, Math.min(1, value));
  const r = Math.round(248 - 180 * t);
  const g = Math.round(250 - 120 * t);
  const b = Math.round(252 - 60 * t);
  return `rgb(${r},${g},${b})`;
}

function facetSvg(
  doc: GridDoc,
  mtp: string,
  definition: string,
): string {
  const names = Object.keys(doc.request.varying);
  const [yName, xName] = [names[0] ?? "", names[1] ?? ""];
  const yVals = (doc.request.varying[yName] ?? []).map(String);
  const xVals = names.length > 1
    ? (doc.request.varying[xName] ?? []).map(String)
    : [""];
  const { values, holes } = index(doc, mtp, definition);

  const width = LEFT + xVals.length * (CELL + GAP);
  const height = TOP + yVals.length * (CELL + GAP) + 18;
  const parts: string[] = [
    `<svg class="facet" viewBox="0 0 ${width} ${height}" width="${width}" height="${height}" role="img">`,
    `<text x="${LEFT}" y="12" class="facet-title">${escapeHtml(definition)}</text>`,
  ];
  yVals.forEach((yv, i) => {
    const y = TOP + i * (CELL + GAP);
    parts.push(
      `<text x="${LEFT - 6}" y="${y + CELL / 2 + 4}" text-anchor="end" class="axis">${escapeHtml(yv)}</text>`,
    );
    xVals.forEach((xv, j) => {
      const x = LEFT + j * (CELL + GAP);
      const key = names.length > 1 ? `${yv}\u0000${xv}` : yv;
      const coords = names.length > 1
        ? `${yName}=${yv}, ${xName}=${xv}`
        : `${yName}=${yv}`;
      const hole = holes.get(key);
      if (hole !== undefined) {
        parts.push(
          `<g class="hole"><rect x="${x}" y="${y}" width="${CELL}" height="${CELL}"/>` +
            `<line x1="${x}" y1="${y}" x2="${x + CELL}" y2="${y + CELL}"/>` +
            `<title>${escapeHtml(`${coords}: ${hole}`)}</title></g>`,
        );
        return;
      }
      const row = values.get(key);
      if (!row || row.value === null) {
        parts.push(
          `<rect class="absent" x="${x}" y="${y}" width="${CELL}" height="${CELL}">` +
            `<title>${escapeHtml(`${coords}: no value`)}</title></rect>`,
        );
        return;
      }
      const tip = `${coords}: ${definition} ${fmt(row.value)} (se ${fmt(row.mc_se, 4)})`;
      parts.push(
        `<g class="cell"><rect x="${x}" y="${y}" width="${CELL}" height="${CELL}" fill="${fill(row.value)}"/>` +
          `<text x="${x + CELL / 2}" y="${y + CELL / 2 + 4}" text-anchor="middle" class="cellval">${fmt(row.value, 2)}</text>` +
          `<title>${escapeHtml(tip)}</title></g>`,
      );
    });
  });
  xVals.forEach((xv, j) => {
    const x = LEFT + j * (CELL + GAP);
    const y = TOP + yVals.length * (CELL + GAP) + 12;
    parts.push(
      `<text x="${x + CELL / 2}" y="${y}" text-anchor="middle" class="axis">${escapeHtml(xv)}</text>`,
    );
  });
  parts.push("</svg>");
  return parts.join("");
}

export function gridDefinitions(doc: GridDoc, mtp: string): string[] {
  const seen: string[] = [];
  for (const row of doc.result.rows) {
    if (row.MTP === mtp && row.status === "ok" && !seen.includes(row.definition)) {
      seen.push(row.definition);
    }
  }
  return seen;
}

export function renderGridView(
  doc: GridDoc,
  mtp: string,
  definitions?: string[],
): string {
  const names = Object.keys(doc.request.varying);
  const defs = definitions ?? gridDefinitions(doc, mtp);
  if (defs.length === 0) {
    return `<div class="grid-view empty">no ${escapeHtml(mtp)} rows in this grid</div>`;
  }
  const axisNote = names.length > 1
    ? `${names[0]} (rows) x ${names[1]} (columns)`
    : `${names[0]} (rows)`;
  const facets = defs.map((d) => facetSvg(doc, mtp, d)).join("");
  return (
    `<div class="grid-view"><div class="grid-meta">${escapeHtml(mtp)} | ` +
    `${escapeHtml(axisNote)} | seed ${doc.seed}</div>` +
    `<div class="facets">${facets}</div></div>`
  );
}
