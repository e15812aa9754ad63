// Raw-response inspector: the exact bytes the service returned, untouched.
// This is the audit trail for the "every number is traceable" rule.

import { escapeHtml } from "../format";

export function renderInspector(rawText: string | null): string {
  if (rawText === null) {
    return '<div class="inspector empty">no response yet</div>';
  }
  return `<pre class="inspector">${escapeHtml(rawText)}</pre>`;
}
