/** Gateway record schema: the JSON frames the control server pushes. */
const KNOWN_TYPES = new Set(["status", "telemetry", "preview", "event"]);
/**
 * Validate one incoming message. Returns null (with a console warning)
 * for anything malformed or of an unknown type; the stream keeps going.
 */
export function parseRecord(raw) {
    let obj;
    try {
        obj = JSON.parse(raw);
    }
    catch {
        console.warn("console: discarding unparseable gateway message");
        return null;
    }
    if (typeof obj !== "object" || obj === null)
        return null;
    const rec = obj;
    if (typeof rec.type !== "string" || !KNOWN_TYPES.has(rec.type)) {
        console.warn(`console: ignoring record of unknown type ${String(rec.type)}`);
        return null;
    }
    if (typeof rec.seq !== "number" || typeof rec.payload !== "object" || rec.payload === null) {
        console.warn("console: ignoring malformed gateway record");
        return null;
    }
    return rec;
}
