// Power table rendering: definitions as rows, procedures as columns, each
// cell showing the service value with its Monte Carlo uncertainty band.
// The band is purely graphical; the only numbers shown are response fields.

import { escapeHtml, fmt } from "../format";
import type { PowerDoc, TableRow } from "../types";

function orderedKeys(rows: TableRow[], pick: (r: TableRow) => string): string[] {
  const seen: string[] = [];
  for (const row of rows) {
    const key = pick(row);
    if (!seen.includes(key)) seen.push(key);
  }
  return seen;
}

function bandCell(row: TableRow): string {
  const lo = Math.max(0, row.value - 2 * row.mc_se);
  const hi = Math.min(1, row.value + 2 * row.mc_se);
  const band =
    `<span class="band" style="left:${(lo * 100).toFixed(2)}%;` +
    `width:${((hi - lo) * 100).toFixed(2)}%"></span>` +
    `<span class="tick" style="left:${(row.value * 100).toFixed(2)}%"></span>`;
  return (
    `<td title="value ${row.value} (mc_se ${row.mc_se})">` +
    `<span class="val">${fmt(row.value)}</span>` +
    `<span class="se">se ${fmt(row.mc_se, 4)}</span>` +
    `<span class="bar">${band}</span></td>`
  );
}

export function renderPowerTable(doc: PowerDoc, stale: boolean): string {
  const rows = doc.result.table;
  const mtps = orderedKeys(rows, (r) => r.MTP);
  const defs = orderedKeys(rows, (r) => r.definition);
  const byCell = new Map(rows.map((r) => [`${r.MTP}\u0000${r.definition}`, r]));

  const head =
    "<tr><th>definition</th>" +
    mtps.map((m) => `<th>${escapeHtml(m)}</th>`).join("") +
    "</tr>";
  const body = defs
    .map((d) => {
      const cells = mtps
        .map((m) => {
          const row = byCell.get(`${m}\u0000${d}`);
          return row ? bandCell(row) : "<td class=\"absent\">n/a</td>";
        })
        .join("");
      return `<tr><th>${escapeHtml(d)}</th>${cells}</tr>`;
    })
    .join("");

  const staleBadge = stale
    ? '<div class="stale-badge">stale: request edited since this run</div>'
    : "";
  const meta =
    `<div class="table-meta">df ${fmt(doc.result.df, 1)} | ` +
    `B ${doc.result.B} | seed ${doc.seed}</div>`;
  return (
    `<div class="power-table${stale ? " stale" : ""}">${staleBadge}` +
    `<table>${head}${body}</table>${meta}</div>`
  );
}
