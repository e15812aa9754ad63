// Side-by-side scenario comparison showing only the parameters that differ.

import { escapeHtml, fmtParam } from "../format";
import type { ParamDiff } from "../diff";

export function renderDiff(
  leftLabel: string,
  rightLabel: string,
  diffs: ParamDiff[],
): string {
  if (diffs.length === 0) {
    return '<div class="diff-view empty">scenarios are identical</div>';
  }
  const rows = diffs
    .map(
      (d) =>
        `<tr><th>${escapeHtml(d.key)}</th>` +
        `<td>${escapeHtml(fmtParam(d.left))}</td>` +
        `<td>${escapeHtml(fmtParam(d.right))}</td></tr>`,
    )
    .join("");
  return (
    `<table class="diff-view"><tr><th></th>` +
    `<th>${escapeHtml(leftLabel)}</th><th>${escapeHtml(rightLabel)}</th></tr>` +
    `${rows}</table>`
  );
}
