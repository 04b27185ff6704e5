/** Browser entry point: wire the gateway client to the document. */

import { ConsoleClient } from "./client.js";
import {
  DEFAULT_DETECTOR,
  defaultForm,
  ExposureForm,
  ExposureType,
  FormValidationError,
  submitExposure,
  validateForm,
} from "./form.js";
import { renderAll } from "./render.js";

function wsUrl(): string {
  const proto = location.protocol === "https:" ? "wss:" : "ws:";
  return `${proto}//${location.host}/ws`;
}

function num(id: string): number {
  return Number((document.getElementById(id) as HTMLInputElement).value);
}

function checked(id: string): boolean {
  return (document.getElementById(id) as HTMLInputElement).checked;
}

function readForm(): ExposureForm {
  const form = defaultForm();
  form.exposureType = (document.getElementById("f-type") as HTMLSelectElement).value as ExposureType;
  form.exptime = num("f-exptime");
  form.flushBefore = checked("f-flush");
  form.shutter = checked("f-shutter");
  form.filter = num("f-filter");
  form.speed = num("f-speed");
  form.binX = num("f-binx");
  form.binY = num("f-biny");
  form.gainIndex = num("f-gain");
  form.node = num("f-node");
  form.nExposures = num("f-nexp");
  const roiText = (document.getElementById("f-roi") as HTMLInputElement).value.trim();
  if (roiText) {
    const [x0, y0, width, height] = roiText.split(",").map(Number);
    form.roi = { x0, y0, width, height };
  }
  if (form.exposureType === "scan") {
    form.scanRows = num("f-scan-rows");
    form.rowPeriod = num("f-row-period");
  }
  if (form.exposureType === "push_pull") {
    form.elementaryExptime = num("f-elem-exptime");
    form.nTransfers = num("f-ntransfers");
    form.rowsPerTransfer = num("f-rows-per-transfer");
  }
  return form;
}

function showFormErrors(errors: Record<string, string>): void {
  const box = document.getElementById("form-errors")!;
  box.textContent = Object.entries(errors)
    .map(([field, msg]) => `${field}: ${msg}`)
    .join("\n");
}

function start(): void {
  const client = new ConsoleClient({
    url: wsUrl(),
    socketFactory: (url) => new WebSocket(url) as unknown as import("./client.js").SocketLike,
    onChange: renderAll,
  });
  client.connect();

  document.getElementById("btn-expose")!.addEventListener("click", () => {
    const form = readForm();
    const errors = validateForm(form, DEFAULT_DETECTOR);
    showFormErrors(errors);
    if (Object.keys(errors).length > 0) return;
    try {
      for (const cmd of submitExposure(form, DEFAULT_DETECTOR)) client.sendCommand(cmd);
    } catch (e) {
      if (e instanceof FormValidationError) showFormErrors(e.errors);
      else throw e;
    }
  });
  document.getElementById("btn-stop")!.addEventListener("click", () => {
    client.sendCommand({ type: "command", verb: "stop", args: {} });
  });
  document.getElementById("btn-abort")!.addEventListener("click", () => {
    client.sendCommand({ type: "command", verb: "abort", args: {} });
  });
  document.getElementById("btn-set-register")!.addEventListener("click", () => {
    const register = (document.getElementById("t-register") as HTMLInputElement).value.trim();
    const value = (document.getElementById("t-value") as HTMLInputElement).value.trim();
    if (register && value) {
      client.sendCommand({ type: "command", verb: "set", args: { register, value } });
    }
  });
}

window.addEventListener("DOMContentLoaded", start);
