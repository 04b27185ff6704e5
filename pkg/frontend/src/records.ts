/** Gateway record schema: the JSON frames the control server pushes. */

export type RecordType = "status" | "telemetry" | "preview" | "event";

export interface StatusPayload {
  state: string;
  frames_done: number;
  frames_total: number;
  percent: number;
  eta: string;
  power: string;
}

/** Register name -> formatted value, e.g. "ccd-temp" -> "165.0021". */
export type TelemetryPayload = Record<string, string>;

export interface PreviewPayload {
  file: string;
  width: number;
  height: number;
  factor: number;
  /** Row-major uint16 rows, already downsampled server-side. */
  data: number[][];
}

export interface EventPayload {
  state?: string;
  reply?: string;
  error?: string;
  code?: string;
  readout_complete?: boolean;
  file?: string;
  frames_done?: number;
  [key: string]: unknown;
}

export interface GatewayRecord {
  type: RecordType;
  seq: number;
  payload: StatusPayload | TelemetryPayload | PreviewPayload | EventPayload;
}

export interface CommandRecord {
  type: "command";
  verb: string;
  args: Record<string, string>;
}

const KNOWN_TYPES = new Set(["status", "telemetry", "preview", "event"]);

/**
 * Validate one incoming message. Returns null (with a console warning)
 * for anything malformed or of an unknown type; the stream keeps going.
 */
export function parseRecord(raw: string): GatewayRecord | null {
  let obj: unknown;
  try {
    obj = JSON.parse(raw);
  } catch {
    console.warn("console: discarding unparseable gateway message");
    return null;
  }
  if (typeof obj !== "object" || obj === null) return null;
  const rec = obj as { type?: unknown; seq?: unknown; payload?: unknown };
  if (typeof rec.type !== "string" || !KNOWN_TYPES.has(rec.type)) {
    console.warn(`console: ignoring record of unknown type ${String(rec.type)}`);
    return null;
  }
  if (typeof rec.seq !== "number" || typeof rec.payload !== "object" || rec.payload === null) {
    console.warn("console: ignoring malformed gateway record");
    return null;
  }
  return rec as unknown as GatewayRecord;
}
