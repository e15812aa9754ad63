// Scenario comparison: only the parameters that differ between two cards,
// so a side-by-side view stays readable.

import type { ParamValue, RequestParams } from "./types";
import { sameParams } from "./merge";

export interface ParamDiff {
  key: string;
  left: ParamValue | undefined;
  right: ParamValue | undefined;
}

export function diffParams(a: RequestParams, b: RequestParams): ParamDiff[] {
  const keys = new Set([...Object.keys(a), ...Object.keys(b)]);
  const out: ParamDiff[] = [];
  for (const key of [...keys].sort()) {
    const left = a[key];
    const right = b[key];
    if (left === undefined || right === undefined || !sameParams(left, right)) {
      out.push({ key, left, right });
    }
  }
  return out;
}
