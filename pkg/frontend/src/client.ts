/**
 * Gateway connection: a WebSocket feeding the reducer, with
 * auto-reconnect (exponential backoff), seq-gap resync, and a command
 * queue. Works with the browser WebSocket and with `ws` under node,
 * as long as the object has send/close and the usual event handlers.
 */

import { clearResync, initialModel, markDisconnected, PanelModel, reduce } from "./model.js";
import { CommandRecord, parseRecord } from "./records.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface ClientOptions {
  url: string;
  socketFactory: SocketFactory;
  now?: () => number;
  /** called after every model change */
  onChange?: (model: PanelModel) => void;
  reconnect?: boolean;
  backoffBaseMs?: number;
  backoffMaxMs?: number;
}

export class ConsoleClient {
  model: PanelModel = initialModel();
  private sock: SocketLike | null = null;
  private attempts = 0;
  private closed = false;
  private readonly now: () => number;
  private timer: ReturnType<typeof setTimeout> | null = null;

  constructor(private readonly opts: ClientOptions) {
    this.now = opts.now ?? Date.now;
  }

  connect(): void {
    this.closed = false;
    this.open();
  }

  private open(): void {
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
      if (!this.closed && this.opts.reconnect !== false) this.scheduleReconnect();
    };
  }

  private scheduleReconnect(): void {
    const base = this.opts.backoffBaseMs ?? 500;
    const max = this.opts.backoffMaxMs ?? 15000;
    const delay = Math.min(max, base * 2 ** this.attempts);
    this.attempts += 1;
    this.timer = setTimeout(() => this.open(), delay);
  }

  private onMessage(data: string): void {
    const record = parseRecord(data);
    if (record === null) return;
    let next = reduce(this.model, record, this.now());
    if (next.resyncNeeded) {
      // records were lost; ask the server for fresh full state
      this.sendCommand({ type: "command", verb: "status", args: {} });
      next = clearResync(next);
    }
    this.update(next);
  }

  sendCommand(cmd: CommandRecord): void {
    if (this.sock === null) throw new Error("not connected");
    this.sock.send(JSON.stringify(cmd));
  }

  close(): void {
    this.closed = true;
    if (this.timer !== null) clearTimeout(this.timer);
    this.sock?.close();
  }

  private update(model: PanelModel): void {
    this.model = model;
    this.opts.onChange?.(model);
  }
}
