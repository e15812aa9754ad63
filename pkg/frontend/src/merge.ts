// Request merging for edit-and-rerun: overrides replace keys wholesale in
// the flat dotted-key dictionary. A scalar override of a per-outcome field
// is legal; the service broadcasts it and echoes back the full vector.

import type { ParamValue, RequestParams } from "./types";

export function mergeRequest(
  base: RequestParams,
  overrides: Record<string, ParamValue | undefined>,
): RequestParams {
  const out: RequestParams = { ...base };
  for (const [key, value] of Object.entries(overrides)) {
    if (value === undefined) {
      delete out[key];
    } else {
      out[key] = value;
    }
  }
  return out;
}

export function sameParams(a: unknown, b: unknown): boolean {
  return JSON.stringify(a) === JSON.stringify(b);
}
