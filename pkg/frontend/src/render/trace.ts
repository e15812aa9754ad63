// Search panel rendering: probe points sized by their draw count, the
// service-fitted curve, the target line, and the certified answer. Every
// plotted coordinate is a response field; the curve samples come from the
// service so nothing is refit here.

import { escapeHtml, fmt } from "../format";
import type { SearchDoc } from "../types";

const W = 460;
const H = 260;
const PAD = { left: 48, right: 16, top: 16, bottom: 36 };

interface Scale {
  (x: number): number;
}

function linear(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 || 1;
  return (x) => r0 + ((x - d0) / span) * (r1 - r0);
}

export function renderSearchPanel(doc: SearchDoc): string {
  const { result } = doc;
  const goal = doc.request.goal;
  const xs = [
    ...result.trace.map((p) => p.value),
    ...result.curve.map(([v]) => v),
    result.value,
  ];
  const xMin = Math.min(...xs);
  const xMax = Math.max(...xs);
  const x = linear([xMin, xMax], [PAD.left, W - PAD.right]);
  const y = linear([0, 1], [H - PAD.bottom, PAD.top]);
  const maxTnum = Math.max(...result.trace.map((p) => p.tnum), 1);

  const parts: string[] = [
    `<svg class="trace" viewBox="0 0 ${W} ${H}" width="${W}" height="${H}" role="img">`,
  ];
  for (const tick of [0, 0.25, 0.5, 0.75, 1]) {
    parts.push(
      `<line class="gridline" x1="${PAD.left}" y1="${y(tick)}" x2="${W - PAD.right}" y2="${y(tick)}"/>`,
      `<text class="axis" x="${PAD.left - 6}" y="${y(tick) + 4}" text-anchor="end">${tick}</text>`,
    );
  }
  parts.push(
    `<line class="target" x1="${PAD.left}" y1="${y(goal.target_power)}" x2="${W - PAD.right}" y2="${y(goal.target_power)}">` +
      `<title>target power ${goal.target_power}</title></line>`,
  );
  if (result.curve.length > 0) {
    const path = result.curve
      .map(([v, p], i) => `${i === 0 ? "M" : "L"}${x(v).toFixed(1)},${y(p).toFixed(1)}`)
      .join("");
    parts.push(`<path class="curve" d="${path}"/>`);
  }
  for (const probe of result.trace) {
    const r = 2.5 + 5 * Math.sqrt(probe.tnum / maxTnum);
    parts.push(
      `<circle class="probe" cx="${x(probe.value).toFixed(1)}" cy="${y(probe.power).toFixed(1)}" r="${r.toFixed(1)}">` +
        `<title>${escapeHtml(`${result.quantity}=${probe.value}: power ${probe.power} (tnum ${probe.tnum})`)}</title></circle>`,
    );
  }
  parts.push(
    `<line class="answer" x1="${x(result.value)}" y1="${y(0)}" x2="${x(result.value)}" y2="${y(1)}"/>`,
    `<text class="axis" x="${x(result.value)}" y="${H - 8}" text-anchor="middle">${escapeHtml(String(result.value))}</text>`,
    "</svg>",
  );

  const headline = result.converged
    ? `<div class="search-result">${escapeHtml(result.quantity)} = <b>${escapeHtml(String(result.value))}</b>` +
      ` | achieved ${fmt(result.achieved_power)} (se ${fmt(result.mc_se, 4)})` +
      ` in ${result.steps} step${result.steps === 1 ? "" : "s"}</div>`
    : `<div class="search-result not-converged">did not converge; best candidate ` +
      `${escapeHtml(result.quantity)} = <b>${escapeHtml(String(result.value))}</b>` +
      ` at power ${fmt(result.achieved_power)}</div>`;
  const flat = result.flat_region
    ? '<div class="flat-note">flat region: a range of values sits inside the tolerance band</div>'
    : "";
  return `<div class="search-panel">${headline}${flat}${parts.join("")}</div>`;
}
