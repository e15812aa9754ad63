// DOM wiring for the explorer. All statistics arrive from the service;
// this file only routes edits into requests and responses into renderers.

import { PumpClient, RunGate, isAbortError } from "./api";
import { diffParams } from "./diff";
import { escapeHtml, fmtParam } from "./format";
import {
  DRAFT_TNUM,
  ScenarioCard,
  commitError,
  commitResult,
  exportCards,
  importCards,
  newCard,
  reroll,
  requestBody,
  withEdit,
} from "./state";
import { planGrid, renderGridView, DEFAULT_CELL_CAP } from "./render/heatmap";
import { renderDiff } from "./render/diffview";
import { renderInspector } from "./render/inspector";
import { renderPowerTable } from "./render/table";
import { renderSearchPanel } from "./render/trace";
import type {
  ErrorDoc,
  GridDoc,
  ParamValue,
  PowerDoc,
  RequestParams,
  SearchDoc,
  SearchGoalBody,
} from "./types";
import { isErrorDoc as isError } from "./types";

const BASELINE: RequestParams = {
  design: "d3.2_m3fc2rc",
  M: 5,
  nbar: 258,
  Tbar: 0.5,
  J: 3,
  K: 15,
  "numCovar.1": 5,
  "numCovar.2": 3,
  "R2.1": 0.1,
  "R2.2": 0.7,
  "ICC.2": 0.05,
  "ICC.3": 0.4,
  rho: 0.4,
  MDES: 0.1,
  MTP: ["None", "HO"],
  tnum: 10000,
};

// Parameters offered as form fields; everything else stays editable
// through the free-form override box.
const FIELDS: { key: string; step?: number; min?: number; max?: number; slider?: boolean }[] = [
  { key: "nbar", step: 1, min: 1 },
  { key: "J", step: 1, min: 1 },
  { key: "K", step: 1, min: 1 },
  { key: "Tbar", step: 0.05, min: 0.05, max: 0.95 },
  { key: "MDES", step: 0.005, min: 0 },
  { key: "numZero", step: 1, min: 0 },
  { key: "ICC.2", step: 0.05, min: 0, max: 0.6, slider: true },
  { key: "ICC.3", step: 0.05, min: 0, max: 0.6, slider: true },
  { key: "rho", step: 0.1, min: 0, max: 0.9, slider: true },
  { key: "alpha", step: 0.01, min: 0.01, max: 0.2 },
  { key: "tnum", step: 1000, min: 100 },
];

const GRID_PARAMS = [
  "ICC.2", "ICC.3", "rho", "MDES", "nbar", "J", "K", "numZero", "R2.1", "R2.2",
];

interface AppState {
  cards: ScenarioCard[];
  selected: string | null;
  compareTo: string | null;
  tab: "table" | "grid" | "search" | "raw";
  gridDoc: { doc: GridDoc; rawText: string } | null;
  searchDoc: { doc: SearchDoc; rawText: string } | null;
  gridNote: string;
  mtps: string[];
}

export function mountApp(root: HTMLElement): void {
  const state: AppState = {
    cards: [newCard("baseline", { ...BASELINE }, 0)],
    selected: null,
    compareTo: null,
    tab: "table",
    gridDoc: null,
    searchDoc: null,
    gridNote: "",
    mtps: ["None", "BF", "HO", "BH", "WY-SS", "WY-SD"],
  };
  state.selected = state.cards[0]?.id ?? null;

  const client = new PumpClient(
    (localStorage.getItem("pump-base-url") ?? "http://localhost:8000"),
  );
  const gate = new RunGate();

  client.info().then(
    (info) => {
      state.mtps = info.mtps;
      render();
    },
    () => undefined,
  );

  function card(): ScenarioCard | null {
    return state.cards.find((c) => c.id === state.selected) ?? null;
  }

  function replaceCard(next: ScenarioCard): void {
    state.cards = state.cards.map((c) => (c.id === next.id ? next : c));
  }

  async function runCard(c: ScenarioCard, certify: boolean): Promise<void> {
    const ctrl = gate.begin(c.id);
    const body = requestBody(c, certify);
    try {
      const reply = await client.power(body, { seed: c.seed, signal: ctrl.signal });
      if (gate.isStale(c.id, ctrl)) return;
      gate.end(c.id, ctrl);
      const current = state.cards.find((x) => x.id === c.id);
      if (!current) return;
      if (reply.ok && !isError(reply.document)) {
        replaceCard(
          commitResult(current, reply.document as PowerDoc, reply.rawText, certify),
        );
      } else {
        replaceCard(commitError(current, reply.document as ErrorDoc));
      }
      render();
    } catch (err) {
      if (!isAbortError(err)) {
        gate.end(c.id, ctrl);
        state.gridNote = `service unreachable: ${String(err)}`;
        render();
      }
    }
  }

  function editAndRerun(overrides: Record<string, ParamValue | undefined>): void {
    const c = card();
    if (!c) return;
    const edited = withEdit(c, overrides);
    replaceCard(edited);
    render();
    void runCard(edited, false);
  }

  async function runGrid(
    varying: Record<string, unknown[]>,
    cap: number,
  ): Promise<void> {
    const c = card();
    if (!c) return;
    const plan = planGrid(varying, cap);
    if (!plan.ok) {
      state.gridNote = plan.reason ?? "grid rejected";
      render();
      return;
    }
    state.gridNote = `running ${plan.cells} cells...`;
    render();
    const ctrl = gate.begin(`${c.id}/grid`);
    try {
      const reply = await client.grid(
        { base: c.request, varying: varying as Record<string, ParamValue[]> },
        { seed: c.seed, signal: ctrl.signal },
      );
      if (gate.isStale(`${c.id}/grid`, ctrl)) return;
      gate.end(`${c.id}/grid`, ctrl);
      if (reply.ok && !isError(reply.document)) {
        state.gridDoc = { doc: reply.document as GridDoc, rawText: reply.rawText };
        state.gridNote = "";
      } else {
        const doc = reply.document as ErrorDoc;
        state.gridNote = doc.error.messages.join("; ");
      }
      render();
    } catch (err) {
      if (!isAbortError(err)) {
        gate.end(`${c.id}/grid`, ctrl);
        state.gridNote = `service unreachable: ${String(err)}`;
        render();
      }
    }
  }

  async function runSearch(goal: SearchGoalBody): Promise<void> {
    const c = card();
    if (!c) return;
    const verb = goal.quantity === "MDES" ? "mdes" : "sample";
    const base = { ...c.request };
    const ctrl = gate.begin(`${c.id}/search`);
    try {
      const reply = await (verb === "mdes"
        ? client.mdes({ base, goal }, { seed: c.seed, signal: ctrl.signal })
        : client.sample({ base, goal }, { seed: c.seed, signal: ctrl.signal }));
      if (gate.isStale(`${c.id}/search`, ctrl)) return;
      gate.end(`${c.id}/search`, ctrl);
      if (reply.ok && !isError(reply.document)) {
        state.searchDoc = { doc: reply.document as SearchDoc, rawText: reply.rawText };
        state.gridNote = "";
      } else {
        const doc = reply.document as ErrorDoc;
        state.gridNote = doc.error.messages.join("; ");
      }
      render();
    } catch (err) {
      if (!isAbortError(err)) {
        gate.end(`${c.id}/search`, ctrl);
        state.gridNote = `service unreachable: ${String(err)}`;
        render();
      }
    }
  }

  function fieldError(c: ScenarioCard, key: string): string | null {
    const hit = c.fieldErrors.find((f) => f.path === key || f.path.startsWith(`${key}.`));
    return hit ? hit.message : null;
  }

  function paramForm(c: ScenarioCard): string {
    const rows = FIELDS.map(({ key, step, min, max, slider }) => {
      const value = c.request[key];
      if (value === undefined || value === null) return "";
      const scalar = Array.isArray(value) ? (value as number[])[0] : value;
      const err = fieldError(c, key);
      const input = slider
        ? `<input type="range" data-param="${key}" value="${scalar}" step="${step}" min="${min}" max="${max}">` +
          `<span class="slider-val">${escapeHtml(String(scalar))}</span>`
        : `<input type="number" data-param="${key}" value="${scalar}"` +
          `${step !== undefined ? ` step="${step}"` : ""}` +
          `${min !== undefined ? ` min="${min}"` : ""}` +
          `${max !== undefined ? ` max="${max}"` : ""}>`;
      return (
        `<label class="field${err ? " invalid" : ""}"><span>${escapeHtml(key)}</span>${input}` +
        (err ? `<span class="field-error">${escapeHtml(err)}</span>` : "") +
        "</label>"
      );
    }).join("");
    const mtpBoxes = state.mtps
      .map((m) => {
        const active = Array.isArray(c.request["MTP"])
          ? (c.request["MTP"] as string[]).includes(m)
          : c.request["MTP"] === m;
        return (
          `<label class="mtp"><input type="checkbox" data-mtp="${m}"` +
          `${active ? " checked" : ""}>${escapeHtml(m)}</label>`
        );
      })
      .join("");
    const unknownErrors = c.fieldErrors
      .filter((f) => !FIELDS.some(({ key }) => f.path === key || f.path.startsWith(`${key}.`)))
      .map((f) => `<div class="field-error">${escapeHtml(`${f.path}: ${f.message}`)}</div>`)
      .join("");
    return (
      `<div class="param-form">${rows}` +
      `<div class="mtp-row"><span>MTP</span>${mtpBoxes}</div>` +
      `<div class="override-row"><input type="text" id="override" ` +
      `placeholder='override, e.g. R2.1=[0.1,0.2,0.1,0,0]'>` +
      `<button id="apply-override">apply</button></div>` +
      unknownErrors +
      "</div>"
    );
  }

  function seedBar(c: ScenarioCard): string {
    return (
      `<div class="seed-bar">seed <code>${c.seed}</code>` +
      `<button id="reroll">reroll</button>` +
      `<label class="draft"><input type="checkbox" id="draft"${c.draft ? " checked" : ""}>` +
      `draft mode (tnum ${DRAFT_TNUM})</label>` +
      `<button id="run">run</button>` +
      `<button id="certify">certify at full tnum</button></div>`
    );
  }

  function cardList(): string {
    const items = state.cards
      .map((c) => {
        const cls = [
          "card-item",
          c.id === state.selected ? "selected" : "",
          c.dirty ? "dirty" : "",
        ]
          .filter(Boolean)
          .join(" ");
        return (
          `<li class="${cls}" data-card="${c.id}">${escapeHtml(c.label)}` +
          (c.dirty ? '<span class="dot" title="edited since last run">*</span>' : "") +
          "</li>"
        );
      })
      .join("");
    return (
      `<ul class="card-list">${items}</ul>` +
      `<div class="card-actions"><button id="clone">clone</button>` +
      `<button id="export">export</button>` +
      `<label class="import-label">import<input type="file" id="import" hidden></label></div>`
    );
  }

  function tabs(): string {
    const names: AppState["tab"][] = ["table", "grid", "search", "raw"];
    return (
      `<nav class="tabs">` +
      names
        .map(
          (t) =>
            `<button class="tab${t === state.tab ? " active" : ""}" data-tab="${t}">${t}</button>`,
        )
        .join("") +
      "</nav>"
    );
  }

  function tableTab(c: ScenarioCard): string {
    const table = c.latest
      ? renderPowerTable(c.latest.doc, c.dirty)
      : '<div class="empty">no results yet; press run</div>';
    let compare = "";
    if (state.compareTo) {
      const other = state.cards.find((x) => x.id === state.compareTo);
      if (other) {
        compare = renderDiff(c.label, other.label, diffParams(c.request, other.request));
      }
    } else if (c.prior) {
      compare =
        `<details class="prior"><summary>diff vs previous run</summary>` +
        renderDiff(
          "current",
          "previous",
          diffParams(c.request, c.prior.doc.request),
        ) +
        renderPowerTable(c.prior.doc, true) +
        "</details>";
    }
    const pick =
      `<div class="compare-row">compare to <select id="compare-select">` +
      `<option value="">previous run</option>` +
      state.cards
        .filter((x) => x.id !== c.id)
        .map(
          (x) =>
            `<option value="${x.id}"${x.id === state.compareTo ? " selected" : ""}>${escapeHtml(x.label)}</option>`,
        )
        .join("") +
      "</select></div>";
    return table + pick + compare;
  }

  function gridTab(): string {
    const options = GRID_PARAMS.map((p) => `<option>${p}</option>`).join("");
    const controls =
      `<div class="grid-controls">` +
      `<select id="grid-p1">${options}</select>` +
      `<input id="grid-v1" type="text" value="0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3">` +
      `<select id="grid-p2">${options}</select>` +
      `<input id="grid-v2" type="text" value="0, 0.2, 0.4, 0.6">` +
      `<label>cap <input id="grid-cap" type="number" value="${DEFAULT_CELL_CAP}" min="1"></label>` +
      `<select id="grid-mtp">${state.mtps.map((m) => `<option>${m}</option>`).join("")}</select>` +
      `<button id="run-grid">run grid</button></div>`;
    const note = state.gridNote
      ? `<div class="note">${escapeHtml(state.gridNote)}</div>`
      : "";
    const view = state.gridDoc
      ? renderGridView(
          state.gridDoc.doc,
          (root.querySelector("#grid-mtp") as HTMLSelectElement | null)?.value ?? "HO",
        )
      : "";
    return controls + note + view;
  }

  function searchTab(): string {
    const defs = ["D1indiv", "D2indiv", "D3indiv", "mean", "min1", "min2", "complete"];
    const controls =
      `<div class="search-controls">` +
      `<select id="search-quantity"><option>MDES</option><option>nbar</option>` +
      `<option>J</option><option>K</option></select>` +
      `<select id="search-def">${defs.map((d) => `<option${d === "min1" ? " selected" : ""}>${d}</option>`).join("")}</select>` +
      `<label>target <input id="search-target" type="number" value="0.8" step="0.05" min="0.05" max="0.95"></label>` +
      `<button id="run-search">search</button></div>`;
    const note = state.gridNote
      ? `<div class="note">${escapeHtml(state.gridNote)}</div>`
      : "";
    const panel = state.searchDoc ? renderSearchPanel(state.searchDoc.doc) : "";
    return controls + note + panel;
  }

  function rawTab(c: ScenarioCard): string {
    const sections: string[] = [];
    if (c.latest) {
      sections.push("<h3>latest power response</h3>", renderInspector(c.latest.rawText));
    }
    if (state.gridDoc) {
      sections.push("<h3>latest grid response</h3>", renderInspector(state.gridDoc.rawText));
    }
    if (state.searchDoc) {
      sections.push("<h3>latest search response</h3>", renderInspector(state.searchDoc.rawText));
    }
    if (sections.length === 0) sections.push(renderInspector(null));
    return sections.join("");
  }

  function render(): void {
    const c = card();
    const baseUrlRow =
      `<div class="base-url">service <input id="base-url" type="text" ` +
      `value="${escapeHtml(localStorage.getItem("pump-base-url") ?? "http://localhost:8000")}"></div>`;
    let main = '<div class="empty">create a scenario</div>';
    if (c) {
      const body =
        state.tab === "table"
          ? tableTab(c)
          : state.tab === "grid"
            ? gridTab()
            : state.tab === "search"
              ? searchTab()
              : rawTab(c);
      main = seedBar(c) + paramForm(c) + tabs() + `<section class="tab-body">${body}</section>`;
    }
    root.innerHTML =
      `<aside>${baseUrlRow}${cardList()}</aside><main>${main}</main>`;
    wire();
  }

  function wire(): void {
    root.querySelectorAll<HTMLElement>(".card-item").forEach((el) => {
      el.addEventListener("click", () => {
        state.selected = el.dataset["card"] ?? null;
        render();
      });
    });
    root.querySelector("#base-url")?.addEventListener("change", (ev) => {
      const url = (ev.target as HTMLInputElement).value;
      localStorage.setItem("pump-base-url", url);
      client.setBaseUrl(url);
    });
    root.querySelectorAll<HTMLInputElement>("[data-param]").forEach((el) => {
      el.addEventListener("change", () => {
        const key = el.dataset["param"];
        if (!key) return;
        editAndRerun({ [key]: Number(el.value) });
      });
    });
    root.querySelectorAll<HTMLInputElement>("[data-mtp]").forEach((el) => {
      el.addEventListener("change", () => {
        const c = card();
        if (!c) return;
        const current = Array.isArray(c.request["MTP"])
          ? [...(c.request["MTP"] as string[])]
          : [String(c.request["MTP"])];
        const name = el.dataset["mtp"] ?? "";
        const next = el.checked
          ? [...current, name]
          : current.filter((m) => m !== name);
        editAndRerun({ MTP: next.length ? next : ["None"] });
      });
    });
    root.querySelector("#apply-override")?.addEventListener("click", () => {
      const box = root.querySelector<HTMLInputElement>("#override");
      if (!box || !box.value.includes("=")) return;
      const idx = box.value.indexOf("=");
      const key = box.value.slice(0, idx).trim();
      const rawVal = box.value.slice(idx + 1).trim();
      let value: ParamValue;
      try {
        value = JSON.parse(rawVal) as ParamValue;
      } catch {
        value = rawVal;
      }
      editAndRerun({ [key]: value });
    });
    root.querySelector("#reroll")?.addEventListener("click", () => {
      const c = card();
      if (!c) return;
      const next = reroll(c);
      replaceCard(next);
      render();
      void runCard(next, false);
    });
    root.querySelector("#draft")?.addEventListener("change", (ev) => {
      const c = card();
      if (!c) return;
      replaceCard({ ...c, draft: (ev.target as HTMLInputElement).checked });
      render();
    });
    root.querySelector("#run")?.addEventListener("click", () => {
      const c = card();
      if (c) void runCard(c, false);
    });
    root.querySelector("#certify")?.addEventListener("click", () => {
      const c = card();
      if (c) void runCard(c, true);
    });
    root.querySelector("#clone")?.addEventListener("click", () => {
      const c = card();
      if (!c) return;
      const copy = newCard(`${c.label} copy`, { ...c.request }, c.seed);
      state.cards = [...state.cards, copy];
      state.selected = copy.id;
      render();
    });
    root.querySelector("#export")?.addEventListener("click", () => {
      const blob = new Blob([exportCards(state.cards)], { type: "application/json" });
      const a = document.createElement("a");
      a.href = URL.createObjectURL(blob);
      a.download = "scenarios.json";
      a.click();
      URL.revokeObjectURL(a.href);
    });
    root.querySelector<HTMLInputElement>("#import")?.addEventListener("change", (ev) => {
      const file = (ev.target as HTMLInputElement).files?.[0];
      if (!file) return;
      void file.text().then((text) => {
        try {
          const imported = importCards(text);
          state.cards = [...state.cards, ...imported];
          render();
        } catch (err) {
          state.gridNote = String(err);
          render();
        }
      });
    });
    root.querySelectorAll<HTMLElement>(".tab").forEach((el) => {
      el.addEventListener("click", () => {
        state.tab = (el.dataset["tab"] as AppState["tab"]) ?? "table";
        render();
      });
    });
    root.querySelector("#compare-select")?.addEventListener("change", (ev) => {
      const value = (ev.target as HTMLSelectElement).value;
      state.compareTo = value || null;
      render();
    });
    root.querySelector("#run-grid")?.addEventListener("click", () => {
      const p1 = root.querySelector<HTMLSelectElement>("#grid-p1")?.value ?? "";
      const p2 = root.querySelector<HTMLSelectElement>("#grid-p2")?.value ?? "";
      const v1 = (root.querySelector<HTMLInputElement>("#grid-v1")?.value ?? "")
        .split(",")
        .map((s) => Number(s.trim()))
        .filter((x) => !Number.isNaN(x));
      const v2 = (root.querySelector<HTMLInputElement>("#grid-v2")?.value ?? "")
        .split(",")
        .map((s) => Number(s.trim()))
        .filter((x) => !Number.isNaN(x));
      const cap = Number(root.querySelector<HTMLInputElement>("#grid-cap")?.value ?? DEFAULT_CELL_CAP);
      const varying: Record<string, unknown[]> = { [p1]: v1 };
      if (p2 && p2 !== p1 && v2.length) varying[p2] = v2;
      void runGrid(varying, cap);
    });
    root.querySelector("#run-search")?.addEventListener("click", () => {
      const quantity = (root.querySelector<HTMLSelectElement>("#search-quantity")?.value ?? "MDES") as SearchGoalBody["quantity"];
      const definition = root.querySelector<HTMLSelectElement>("#search-def")?.value ?? "min1";
      const target = Number(root.querySelector<HTMLInputElement>("#search-target")?.value ?? 0.8);
      void runSearch({
        quantity,
        power_definition: definition,
        target_power: target,
      });
    });
  }

  render();
  const first = card();
  if (first) void runCard(first, false);
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  mountApp(document.getElementById("app") as HTMLElement);
}
