/**
 * Panel state and the reducer that folds gateway records into it.
 *
 * Rendering is pure with respect to the record stream: the only way
 * panel state changes is `reduce(model, record, now)`, so replaying a
 * captured stream reproduces identical models. User actions never
 * touch the model directly; they enqueue commands and the resulting
 * server events come back through the stream.
 */

import {
  EventPayload,
  GatewayRecord,
  PreviewPayload,
  StatusPayload,
  TelemetryPayload,
} from "./records.js";

export const TELEMETRY_WINDOW_MS = 10 * 60 * 1000;

export interface TelemetrySample {
  t: number;          // ms epoch of arrival
  value: number;
}

export interface StateBadge {
  state: string;      // Standby | Ready | Exposing | Reading | RunCmd | Fault
  power: string;
  connected: boolean;
}

export interface Progress {
  framesDone: number;
  framesTotal: number;
  percent: number;
  eta: string;
  phase: "idle" | "integrating" | "reading";
}

export interface PreviewImage {
  file: string;
  width: number;
  height: number;
  factor: number;
  data: number[][];
}

export interface PanelModel {
  badge: StateBadge;
  progress: Progress;
  preview: PreviewImage | null;
  /** register -> trimmed history, newest last; keyed tabs are derived. */
  telemetry: Record<string, TelemetrySample[]>;
  eventLog: string[];
  lastSeq: number;
  /** set by the reducer when a seq gap is observed; client clears it
      after emitting the resync command */
  resyncNeeded: boolean;
  lastFile: string;
}

export function initialModel(): PanelModel {
  return {
    badge: { state: "Standby", power: "off", connected: false },
    progress: { framesDone: 0, framesTotal: 0, percent: 0, eta: "0.000", phase: "idle" },
    preview: null,
    telemetry: {},
    eventLog: [],
    lastSeq: -1,
    resyncNeeded: false,
    lastFile: "",
  };
}

const EVENT_LOG_LIMIT = 200;

function phaseFor(state: string): Progress["phase"] {
  if (state === "Exposing") return "integrating";
  if (state === "Reading") return "reading";
  return "idle";
}

function withLog(model: PanelModel, line: string): PanelModel {
  const log = [...model.eventLog, line];
  if (log.length > EVENT_LOG_LIMIT) log.splice(0, log.length - EVENT_LOG_LIMIT);
  return { ...model, eventLog: log };
}

function reduceStatus(model: PanelModel, p: StatusPayload): PanelModel {
  return {
    ...model,
    badge: { ...model.badge, state: p.state, power: p.power, connected: true },
    progress: {
      framesDone: p.frames_done,
      framesTotal: p.frames_total,
      percent: p.percent,
      eta: p.eta,
      phase: phaseFor(p.state),
    },
  };
}

function reduceTelemetry(model: PanelModel, p: TelemetryPayload, now: number): PanelModel {
  const telemetry: Record<string, TelemetrySample[]> = { ...model.telemetry };
  const cutoff = now - TELEMETRY_WINDOW_MS;
  for (const [name, raw] of Object.entries(p)) {
    const value = Number(raw);
    if (!Number.isFinite(value)) continue; // power_state and other text registers
    const history = (telemetry[name] ?? []).filter((s) => s.t >= cutoff);
    history.push({ t: now, value });
    telemetry[name] = history;
  }
  return { ...model, telemetry };
}

function reduceEvent(model: PanelModel, p: EventPayload): PanelModel {
  if (typeof p.state === "string") {
    const m = {
      ...model,
      badge: { ...model.badge, state: p.state, connected: true },
      progress: { ...model.progress, phase: phaseFor(p.state) },
    };
    return withLog(m, `state ${p.state}`);
  }
  if (p.readout_complete) {
    const m = { ...model, lastFile: p.file ?? "" };
    return withLog(m, `readout complete ${p.file ?? ""} (${p.frames_done ?? "?"})`);
  }
  if (typeof p.reply === "string") return withLog(model, p.reply);
  if (typeof p.error === "string") {
    return withLog(model, `error ${p.error}${p.code ? " " + p.code : ""}`);
  }
  return model;
}

function reducePreview(model: PanelModel, p: PreviewPayload): PanelModel {
  return {
    ...model,
    preview: {
      file: p.file,
      width: p.width,
      height: p.height,
      factor: p.factor,
      data: p.data,
    },
  };
}

export function reduce(model: PanelModel, record: GatewayRecord, now: number): PanelModel {
  let next = model;
  // a jump in seq means records were lost; ask for a full status resync
  if (model.lastSeq >= 0 && record.seq > model.lastSeq + 1) {
    next = { ...next, resyncNeeded: true };
  }
  next = { ...next, lastSeq: record.seq };

  switch (record.type) {
    case "status":
      return reduceStatus(next, record.payload as StatusPayload);
    case "telemetry":
      return reduceTelemetry(next, record.payload as TelemetryPayload, now);
    case "preview":
      return reducePreview(next, record.payload as PreviewPayload);
    case "event":
      return reduceEvent(next, record.payload as EventPayload);
  }
}

export function markDisconnected(model: PanelModel): PanelModel {
  return { ...model, badge: { ...model.badge, connected: false } };
}

export function clearResync(model: PanelModel): PanelModel {
  return { ...model, resyncNeeded: false };
}

/** Temperature / Wave Levels / Output Node Levels tab membership. */
export function telemetryTab(register: string): "temperature" | "wave-levels" | "node-levels" | "other" {
  if (register.startsWith("ccd-temp")) return "temperature";
  if (register.startsWith("clk.")) return "wave-levels";
  if (register.startsWith("node.")) return "node-levels";
  return "other";
}
