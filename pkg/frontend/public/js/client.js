/**
 * Gateway connection: a WebSocket feeding the reducer, with
 * auto-reconnect (exponential backoff), seq-gap resync, and a command
 * queue. Works with the browser WebSocket and with `ws` under node,
 * as long as the object has send/close and the usual event handlers.
 */
import { clearResync, initialModel, markDisconnected, reduce } from "./model.js";
import { parseRecord } from "./records.js";
export class ConsoleClient {
    constructor(opts) {
        this.opts = opts;
        this.model = initialModel();
        this.sock = null;
        this.attempts = 0;
        this.closed = false;
        this.timer = null;
        this.now = opts.now ?? Date.now;
    }
    connect() {
        this.closed = false;
        this.open();
    }
    open() {
        const sock = this.opts.socketFactory(this.opts.url);
        this.sock = sock;
        sock.onopen = () => {
            this.attempts = 0;
        };
        sock.onmessage = (ev) => this.onMessage(String(ev.data));
        sock.onerror = () => {
            /* the close handler decides what to do */
        };
        sock.onclose = () => {
            this.update(markDisconnected(this.model));
            this.sock = null;
            if (!this.closed && this.opts.reconnect !== false)
                this.scheduleReconnect();
        };
    }
    scheduleReconnect() {
        const base = this.opts.backoffBaseMs ?? 500;
        const max = this.opts.backoffMaxMs ?? 15000;
        const delay = Math.min(max, base * 2 ** this.attempts);
        this.attempts += 1;
        this.timer = setTimeout(() => this.open(), delay);
    }
    onMessage(data) {
        const record = parseRecord(data);
        if (record === null)
            return;
        let next = reduce(this.model, record, this.now());
        if (next.resyncNeeded) {
            // records were lost; ask the server for fresh full state
            this.sendCommand({ type: "command", verb: "status", args: {} });
            next = clearResync(next);
        }
        this.update(next);
    }
    sendCommand(cmd) {
        if (this.sock === null)
            throw new Error("not connected");
        this.sock.send(JSON.stringify(cmd));
    }
    close() {
        this.closed = true;
        if (this.timer !== null)
            clearTimeout(this.timer);
        this.sock?.close();
    }
    update(model) {
        this.model = model;
        this.opts.onChange?.(model);
    }
}
