// Thin typed wrapper over fetch. Every reply keeps the exact response text
// alongside the parsed document so the raw-response inspector can show the
// bytes that produced each number on screen.

import type {
  ErrorDoc,
  GridDoc,
  InfoDoc,
  PowerDoc,
  RequestParams,
  SearchDoc,
  SearchGoalBody,
} from "./types";

export interface ApiReply<T> {
  status: number;
  ok: boolean;
  document: T | ErrorDoc;
  rawText: string;
}

export interface CallOptions {
  seed?: number;
  signal?: AbortSignal;
  budgetMs?: number;
}

function query(opts: CallOptions): string {
  const parts: string[] = [];
  if (opts.seed !== undefined) parts.push(`seed=${opts.seed}`);
  if (opts.budgetMs !== undefined) parts.push(`budget_ms=${opts.budgetMs}`);
  return parts.length ? `?${parts.join("&")}` : "";
}

export class PumpClient {
  private baseUrl: string;

  constructor(
    baseUrl: string,
    private fetchFn: typeof fetch = fetch,
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  setBaseUrl(url: string): void {
    this.baseUrl = url.replace(/\/+$/, "");
  }

  private async post<T>(
    path: string,
    body: unknown,
    opts: CallOptions,
  ): Promise<ApiReply<T>> {
    const reply = await this.fetchFn(
      `${this.baseUrl}/api/v1/${path}${query(opts)}`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(body),
        signal: opts.signal,
      },
    );
    const rawText = await reply.text();
    return {
      status: reply.status,
      ok: reply.ok,
      document: JSON.parse(rawText) as T | ErrorDoc,
      rawText,
    };
  }

  power(body: RequestParams, opts: CallOptions = {}): Promise<ApiReply<PowerDoc>> {
    return this.post<PowerDoc>("power", body, opts);
  }

  mdes(
    body: { base: RequestParams; goal: SearchGoalBody },
    opts: CallOptions = {},
  ): Promise<ApiReply<SearchDoc>> {
    return this.post<SearchDoc>("mdes", body, opts);
  }

  sample(
    body: { base: RequestParams; goal: SearchGoalBody },
    opts: CallOptions = {},
  ): Promise<ApiReply<SearchDoc>> {
    return this.post<SearchDoc>("sample", body, opts);
  }

  grid(
    body: {
      base: RequestParams;
      varying: Record<string, unknown[]>;
      quantity?: string;
      tnum?: number | null;
    },
    opts: CallOptions = {},
  ): Promise<ApiReply<GridDoc>> {
    return this.post<GridDoc>("grid", body, opts);
  }

  async info(): Promise<InfoDoc> {
    const reply = await this.fetchFn(`${this.baseUrl}/api/v1/info`);
    return (await reply.json()) as InfoDoc;
  }
}

// At most one in-flight request per card: starting a new run cancels the
// previous one, so a slider drag settles on the latest edit.
export class RunGate {
  private inflight = new Map<string, AbortController>();

  begin(key: string): AbortController {
    this.inflight.get(key)?.abort();
    const ctrl = new AbortController();
    this.inflight.set(key, ctrl);
    return ctrl;
  }

  end(key: string, ctrl: AbortController): void {
    if (this.inflight.get(key) === ctrl) this.inflight.delete(key);
  }

  isStale(key: string, ctrl: AbortController): boolean {
    return this.inflight.get(key) !== ctrl;
  }
}

export function isAbortError(err: unknown): boolean {
  return err instanceof DOMException
    ? err.name === "AbortError"
    : err instanceof Error && err.name === "AbortError";
}
