/**
 * Exposure form: client-side mirror of the server's parameter checks
 * plus the mapping from form state to gateway `setup` / `observe`
 * commands. Validation here is a strict subset of server validation:
 * anything accepted locally must be accepted by the server.
 */

import { CommandRecord } from "./records.js";

export interface DetectorInfo {
  name: string;
  rows: number;
  cols: number;
  outputNodes: number;
  speeds: number;   // number of readout-speed indices
  gains: number;    // number of gain indices
  filters: number;
}

export const DEFAULT_DETECTOR: DetectorInfo = {
  name: "ccd42-40",
  rows: 2048,
  cols: 2048,
  outputNodes: 2,
  speeds: 2,
  gains: 2,
  filters: 8,
};

export const EXPOSURE_TYPES = ["bias", "dark", "object", "neon", "scan", "push_pull"] as const;
export type ExposureType = (typeof EXPOSURE_TYPES)[number];

export interface ExposureForm {
  exposureType: ExposureType;
  exptime: number;
  flushBefore: boolean;
  shutter: boolean;
  filter: number;
  speed: number;
  binX: number;
  binY: number;
  gainIndex: number;
  node: number;            // -1 = all nodes
  roi: { x0: number; y0: number; width: number; height: number } | null;
  nExposures: number;
  // scan
  scanRows: number | null;
  rowPeriod: number | null;
  // push_pull
  elementaryExptime: number | null;
  nTransfers: number | null;
  rowsPerTransfer: number | null;
  // local-only toggles
  visualize: boolean;
  writeToFile: boolean;
  seed: number | null;
}

export function defaultForm(): ExposureForm {
  return {
    exposureType: "object",
    exptime: 1.0,
    flushBefore: true,
    shutter: true,
    filter: 0,
    speed: 0,
    binX: 1,
    binY: 1,
    gainIndex: 0,
    node: -1,
    roi: null,
    nExposures: 1,
    scanRows: null,
    rowPeriod: null,
    elementaryExptime: null,
    nTransfers: null,
    rowsPerTransfer: null,
    visualize: true,
    writeToFile: true,
    seed: null,
  };
}

/** field name -> message; empty object means the form is valid. */
export type FormErrors = Record<string, string>;

export function validateForm(form: ExposureForm, det: DetectorInfo): FormErrors {
  const errors: FormErrors = {};
  const err = (field: string, msg: string) => {
    if (!(field in errors)) errors[field] = msg;
  };

  if (!EXPOSURE_TYPES.includes(form.exposureType)) {
    err("exposureType", "unknown exposure type");
  }
  if (!(form.exptime >= 0)) err("exptime", "integration time must be >= 0");
  if (form.exposureType === "bias" && form.exptime !== 0) {
    err("exptime", "bias frames have zero integration time");
  }
  if (!Number.isInteger(form.nExposures) || form.nExposures < 1) {
    err("nExposures", "number of exposures must be a positive integer");
  }
  if (!Number.isInteger(form.filter) || form.filter < 0 || form.filter >= det.filters) {
    err("filter", `filter index 0..${det.filters - 1}`);
  }
  if (!Number.isInteger(form.speed) || form.speed < 0 || form.speed >= det.speeds) {
    err("speed", `readout speed index 0..${det.speeds - 1}`);
  }
  if (!Number.isInteger(form.gainIndex) || form.gainIndex < 0 || form.gainIndex >= det.gains) {
    err("gainIndex", `gain index 0..${det.gains - 1}`);
  }
  if (form.node !== -1 && (!Number.isInteger(form.node) || form.node < 0 || form.node >= det.outputNodes)) {
    err("node", `output node 0..${det.outputNodes - 1} or all`);
  }
  if (!Number.isInteger(form.binX) || form.binX < 1) err("binX", "binning must be >= 1");
  if (!Number.isInteger(form.binY) || form.binY < 1) err("binY", "binning must be >= 1");

  const roi = form.roi ?? { x0: 0, y0: 0, width: det.cols, height: det.rows };
  if (form.roi) {
    const { x0, y0, width, height } = form.roi;
    if (![x0, y0, width, height].every(Number.isInteger) || width < 1 || height < 1 || x0 < 0 || y0 < 0) {
      err("roi", "region must have positive integer size and offsets");
    } else if (x0 + width > det.cols || y0 + height > det.rows) {
      err("roi", `region exceeds the ${det.cols}x${det.rows} detector`);
    }
  }
  if (!("roi" in errors) && !("binX" in errors) && !("binY" in errors)) {
    if (roi.width % form.binX !== 0 || roi.height % form.binY !== 0) {
      err("binX", "binning must divide the region size");
    }
  }

  if (form.exposureType === "scan") {
    if (!form.scanRows || !Number.isInteger(form.scanRows) || form.scanRows < 1) {
      err("scanRows", "scan needs a positive row count");
    }
    if (!form.rowPeriod || form.rowPeriod <= 0) {
      err("rowPeriod", "scan needs a positive row period");
    }
  }
  if (form.exposureType === "push_pull") {
    if (!form.elementaryExptime || form.elementaryExptime <= 0) {
      err("elementaryExptime", "elementary exposure must be > 0");
    }
    if (!form.nTransfers || !Number.isInteger(form.nTransfers) || form.nTransfers < 1) {
      err("nTransfers", "transfer count must be a positive integer");
    }
    const rpt = form.rowsPerTransfer;
    if (!rpt || !Number.isInteger(rpt) || rpt < 1) {
      err("rowsPerTransfer", "rows per transfer must be a positive integer");
    } else if (form.nTransfers && rpt * form.nTransfers >= det.rows) {
      err("rowsPerTransfer", "total shift must stay inside the detector");
    }
  }
  return errors;
}

export function formToSetupArgs(form: ExposureForm): Record<string, string> {
  const args: Record<string, string> = {
    exposure_type: form.exposureType,
    exptime: String(form.exptime),
    flush_before: form.flushBefore ? "true" : "false",
    shutter: form.shutter ? "true" : "false",
    filter: String(form.filter),
    speed: String(form.speed),
    bin_x: String(form.binX),
    bin_y: String(form.binY),
    gain_index: String(form.gainIndex),
    node: String(form.node),
    n_exposures: String(form.nExposures),
  };
  if (form.roi) {
    args.roi = [form.roi.x0, form.roi.y0, form.roi.width, form.roi.height].join(",");
  }
  if (form.exposureType === "scan") {
    args.scan_rows = String(form.scanRows);
    args.row_period = String(form.rowPeriod);
  }
  if (form.exposureType === "push_pull") {
    args.elementary_exptime = String(form.elementaryExptime);
    args.n_transfers = String(form.nTransfers);
    args.rows_per_transfer = String(form.rowsPerTransfer);
  }
  if (form.seed !== null) args.seed = String(form.seed);
  return args;
}

/**
 * The Exposure button submits as two gateway commands, exactly the
 * verbs the line-protocol client uses.
 */
export function submitExposure(form: ExposureForm, det: DetectorInfo): CommandRecord[] {
  const errors = validateForm(form, det);
  if (Object.keys(errors).length > 0) {
    throw new FormValidationError(errors);
  }
  return [
    { type: "command", verb: "setup", args: formToSetupArgs(form) },
    { type: "command", verb: "observe", args: {} },
  ];
}

export class FormValidationError extends Error {
  constructor(public errors: FormErrors) {
    super(`invalid form: ${Object.keys(errors).join(", ")}`);
  }
}

/** Button gating from the state badge. */
export function canSubmit(state: string): boolean {
  return state === "Ready";
}

export function canStopAbort(state: string): boolean {
  return state === "Exposing" || state === "Reading";
}
