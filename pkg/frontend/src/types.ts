// Shapes of the service's JSON documents. The client treats request
// parameters as an opaque flat dictionary (dotted keys included) so the
// resolved echo from one response can be edited and posted back verbatim.

export type ParamValue =
  | number
  | string
  | boolean
  | null
  | number[]
  | number[][]
  | string[];

export type RequestParams = Record<string, ParamValue>;

export interface EngineStamp {
  name: string;
  version: string;
}

export interface TableRow {
  MTP: string;
  definition: string;
  value: number;
  mc_se: number;
}

export interface PowerDoc {
  kind: "power";
  engine: EngineStamp;
  seed: number;
  request: RequestParams;
  result: {
    B: number;
    df: number;
    Q: number[];
    shift: number[];
    table: TableRow[];
  };
}

export interface SearchGoalBody {
  quantity: "MDES" | "nbar" | "J" | "K";
  power_definition: string;
  target_power: number;
  tol?: number;
  start_tnum?: number;
  tnum?: number;
  final_tnum?: number;
  max_steps?: number;
}

export interface ProbePoint {
  value: number;
  tnum: number;
  power: number;
  weight: number;
}

export interface SearchDoc {
  kind: "mdes" | "sample";
  engine: EngineStamp;
  seed: number;
  request: { base: RequestParams; goal: Required<SearchGoalBody> };
  result: {
    quantity: string;
    value: number;
    achieved_power: number;
    mc_se: number;
    steps: number;
    converged: boolean;
    flat_region: boolean;
    curve: [number, number][];
    trace: ProbePoint[];
  };
}

export interface GridRow {
  MTP: string;
  definition: string;
  value: number | null;
  mc_se: number | null;
  status: string;
  [varying: string]: string | number | null;
}

export interface GridDoc {
  kind: "grid";
  engine: EngineStamp;
  seed: number;
  request: {
    base: RequestParams;
    varying: Record<string, ParamValue[]>;
    quantity: string;
    tnum: number | null;
  };
  result: { rows: GridRow[] };
}

export interface FieldError {
  path: string;
  message: string;
}

export interface ErrorDoc {
  kind: string;
  error: {
    type: string;
    messages: string[];
    fields: FieldError[];
  };
}

export interface InfoDoc {
  engine: EngineStamp;
  designs: { design: string; levels: number; params: string[] }[];
  mtps: string[];
  power_definitions: Record<string, string>;
  defaults: Record<string, number>;
}

export type ResultDoc = PowerDoc | SearchDoc | GridDoc;

export function isErrorDoc(doc: unknown): doc is ErrorDoc {
  return typeof doc === "object" && doc !== null && "error" in doc;
}
