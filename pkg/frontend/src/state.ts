// Scenario cards and their pure state transitions. A card holds the
// resolved request as last echoed by the service, the sticky seed, the
// latest and prior results, and a dirty flag that marks results as stale
// the moment the request is edited.

import { mergeRequest } from "./merge";
import type {
  ErrorDoc,
  FieldError,
  ParamValue,
  PowerDoc,
  RequestParams,
} from "./types";

export const DRAFT_TNUM = 2000;

export interface CardResult {
  doc: PowerDoc;
  rawText: string;
  seed: number;
  certified: boolean;
}

export interface ScenarioCard {
  id: string;
  label: string;
  request: RequestParams;
  seed: number;
  draft: boolean;
  dirty: boolean;
  latest: CardResult | null;
  prior: CardResult | null;
  fieldErrors: FieldError[];
}

let counter = 0;

export function newCard(
  label: string,
  request: RequestParams,
  seed: number,
): ScenarioCard {
  counter += 1;
  return {
    id: `card-${counter}`,
    label,
    request,
    seed,
    draft: true,
    dirty: true,
    latest: null,
    prior: null,
    fieldErrors: [],
  };
}

export function withEdit(
  card: ScenarioCard,
  overrides: Record<string, ParamValue | undefined>,
): ScenarioCard {
  return {
    ...card,
    request: mergeRequest(card.request, overrides),
    dirty: true,
  };
}

// The POST body for the next run: the card's request with the draw count
// pinned by the mode. Draft mode keeps slider exploration cheap; certify
// re-runs at the request's own full tnum.
export function requestBody(card: ScenarioCard, certify = false): RequestParams {
  const body = { ...card.request };
  if (!certify && card.draft) {
    body["tnum"] = DRAFT_TNUM;
  }
  return body;
}

export function commitResult(
  card: ScenarioCard,
  doc: PowerDoc,
  rawText: string,
  certified: boolean,
): ScenarioCard {
  return {
    ...card,
    request: doc.request,
    seed: doc.seed,
    dirty: false,
    fieldErrors: [],
    prior: card.latest,
    latest: { doc, rawText, seed: doc.seed, certified },
  };
}

// Validation failures keep the previous (now stale) result on screen and
// attach the field errors for inline rendering.
export function commitError(card: ScenarioCard, doc: ErrorDoc): ScenarioCard {
  return { ...card, fieldErrors: doc.error.fields, dirty: true };
}

export function reroll(
  card: ScenarioCard,
  draw: () => number = () => Math.floor(Math.random() * 2 ** 31),
): ScenarioCard {
  return { ...card, seed: draw(), dirty: true };
}

export interface ExportedScenario {
  label: string;
  request: RequestParams;
  seed: number;
}

export interface ScenarioFile {
  format: "pump-explorer-scenarios";
  version: 1;
  scenarios: ExportedScenario[];
}

export function exportCards(cards: ScenarioCard[]): string {
  const file: ScenarioFile = {
    format: "pump-explorer-scenarios",
    version: 1,
    scenarios: cards.map((c) => ({
      label: c.label,
      request: c.request,
      seed: c.seed,
    })),
  };
  return JSON.stringify(file, null, 1);
}

export function importCards(text: string): ScenarioCard[] {
  const parsed = JSON.parse(text) as Partial<ScenarioFile>;
  if (
    parsed.format !== "pump-explorer-scenarios" ||
    parsed.version !== 1 ||
    !Array.isArray(parsed.scenarios)
  ) {
    throw new Error("not a pump-explorer scenario file");
  }
  return parsed.scenarios.map((s, i) => {
    if (typeof s.label !== "string" || typeof s.seed !== "number" ||
        typeof s.request !== "object" || s.request === null) {
      throw new Error(`scenario ${i} is malformed`);
    }
    return newCard(s.label, s.request, s.seed);
  });
}
