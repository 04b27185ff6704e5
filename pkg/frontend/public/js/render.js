/** DOM bindings: pure model in, document mutations out. Browser only. */
import { canStopAbort, canSubmit } from "./form.js";
import { telemetryTab } from "./model.js";
import { minMaxStretch, toGrayscale } from "./preview.js";
function el(id) {
    const node = document.getElementById(id);
    if (!node)
        throw new Error(`missing element #${id}`);
    return node;
}
export function renderBadge(model) {
    const badge = el("state-badge");
    const text = model.badge.connected ? model.badge.state : "disconnected";
    badge.textContent = `${text} (power ${model.badge.power})`;
    badge.className = `badge badge-${text.toLowerCase()}`;
    el("btn-expose").disabled = !canSubmit(model.badge.state) || !model.badge.connected;
    const stoppable = canStopAbort(model.badge.state) && model.badge.connected;
    el("btn-stop").disabled = !stoppable;
    el("btn-abort").disabled = !stoppable;
}
export function renderProgress(model) {
    const p = model.progress;
    el("progress-text").textContent =
        `${p.framesDone}/${p.framesTotal} frames, ${p.phase}, eta ${p.eta}s`;
    const bar = el("progress-bar");
    bar.value = p.percent;
    bar.classList.toggle("reading", p.phase === "reading");
}
export function renderEventLog(model) {
    const log = el("event-log");
    log.textContent = model.eventLog.slice(-40).join("\n");
    log.scrollTop = log.scrollHeight;
}
export function renderPreview(model) {
    if (!model.preview)
        return;
    const canvas = el("preview-canvas");
    const img = model.preview;
    canvas.width = img.width;
    canvas.height = img.height;
    const ctx = canvas.getContext("2d");
    if (!ctx)
        return;
    const gray = toGrayscale(img, minMaxStretch(img));
    const rgba = ctx.createImageData(img.width, img.height);
    for (let i = 0; i < gray.length; i++) {
        rgba.data[4 * i] = gray[i];
        rgba.data[4 * i + 1] = gray[i];
        rgba.data[4 * i + 2] = gray[i];
        rgba.data[4 * i + 3] = 255;
    }
    ctx.putImageData(rgba, 0, 0);
    el("preview-label").textContent = `${img.file} (1:${img.factor})`;
}
export function renderTelemetry(model) {
    const tabs = {
        temperature: [],
        "wave-levels": [],
        "node-levels": [],
    };
    for (const [name, history] of Object.entries(model.telemetry)) {
        const tab = telemetryTab(name);
        if (tab === "other" || history.length === 0)
            continue;
        const last = history[history.length - 1];
        tabs[tab].push(`${name} = ${last.value.toFixed(4)} (${history.length} pts)`);
    }
    el("tab-temperature").textContent = tabs.temperature.sort().join("\n");
    el("tab-wave-levels").textContent = tabs["wave-levels"].sort().join("\n");
    el("tab-node-levels").textContent = tabs["node-levels"].sort().join("\n");
}
export function renderAll(model) {
    renderBadge(model);
    renderProgress(model);
    renderEventLog(model);
    renderPreview(model);
    renderTelemetry(model);
}
