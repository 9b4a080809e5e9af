/**
 * Reconnecting WebSocket wrapper around the engine's /ws endpoint.
 * Exponential backoff with a cap; the socket constructor and timer
 * functions are injectable so tests can script connection loss and
 * engine restarts without a network.
 */

import type { ServerMessage, SetMessage } from "./protocol.js";
import type { ConnectionStatus } from "./store.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface EngineSocketOptions {
  factory?: SocketFactory;
  baseDelayMs?: number;
  maxDelayMs?: number;
  setTimeoutFn?: (fn: () => void, ms: number) => ReturnType<typeof setTimeout>;
  clearTimeoutFn?: (id: ReturnType<typeof setTimeout>) => void;
}

export class EngineSocket {
  readonly url: string;

  private readonly factory: SocketFactory;
  private readonly baseDelayMs: number;
  private readonly maxDelayMs: number;
  private readonly setTimeoutFn: (
    fn: () => void,
    ms: number,
  ) => ReturnType<typeof setTimeout>;
  private readonly clearTimeoutFn: (id: ReturnType<typeof setTimeout>) => void;

  private socket: SocketLike | null = null;
  private attempts = 0;
  private closedByUser = false;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;
  private messageHandlers: Array<(msg: ServerMessage) => void> = [];
  private statusHandlers: Array<(status: ConnectionStatus) => void> = [];

  constructor(url: string, opts: EngineSocketOptions = {}) {
    this.url = url;
    this.factory =
      opts.factory ?? ((u) => new WebSocket(u) as unknown as SocketLike);
    this.baseDelayMs = opts.baseDelayMs ?? 250;
    this.maxDelayMs = opts.maxDelayMs ?? 4000;
    this.setTimeoutFn = opts.setTimeoutFn ?? ((fn, ms) => setTimeout(fn, ms));
    this.clearTimeoutFn = opts.clearTimeoutFn ?? ((id) => clearTimeout(id));
  }

  onMessage(fn: (msg: ServerMessage) => void): void {
    this.messageHandlers.push(fn);
  }

  onStatus(fn: (status: ConnectionStatus) => void): void {
    this.statusHandlers.push(fn);
  }

  /** Delay before reconnect attempt n (0-based): base * 2^n, capped. */
  backoffDelayMs(attempt: number): number {
    return Math.min(this.maxDelayMs, this.baseDelayMs * 2 ** attempt);
  }

  connect(): void {
    this.closedByUser = false;
    this.open();
  }

  /** Send a set message; false (and no throw) when not connected. */
  send(msg: SetMessage): boolean {
    if (!this.socket) return false;
    try {
      this.socket.send(JSON.stringify(msg));
      return true;
    } catch {
      return false;
    }
  }

  get connected(): boolean {
    return this.socket !== null;
  }

  close(): void {
    this.closedByUser = true;
    if (this.reconnectTimer !== null) {
      this.clearTimeoutFn(this.reconnectTimer);
      this.reconnectTimer = null;
    }
    const socket = this.socket;
    this.socket = null;
    if (socket) {
      socket.onclose = null;
      socket.onerror = null;
      socket.close();
    }
    this.notifyStatus("disconnected");
  }

  private open(): void {
    this.notifyStatus("connecting");
    let socket: SocketLike;
    try {
      socket = this.factory(this.url);
    } catch {
      this.scheduleReconnect();
      return;
    }
    socket.onopen = () => {
      this.socket = socket;
      this.attempts = 0;
      this.notifyStatus("connected");
    };
    socket.onmessage = (ev) => {
      let parsed: ServerMessage;
      try {
        parsed = JSON.parse(String(ev.data)) as ServerMessage;
      } catch {
        return; // not ours; ignore
      }
      for (const fn of this.messageHandlers) fn(parsed);
    };
    // Browsers fire close after error, but some stacks (embedded views,
    // node) only fire error on a refused connection. Either event settles
    // the attempt exactly once so the backoff chain never stalls.
    let settled = false;
    const settle = () => {
      if (settled) return;
      settled = true;
      const wasConnected = this.socket === socket;
      this.socket = null;
      socket.onclose = null;
      socket.onerror = null;
      try {
        socket.close();
      } catch {
        // already closed
      }
      if (this.closedByUser) return;
      if (wasConnected) this.notifyStatus("disconnected");
      this.scheduleReconnect();
    };
    socket.onclose = settle;
    socket.onerror = settle;
  }

  private scheduleReconnect(): void {
    if (this.closedByUser || this.reconnectTimer !== null) return;
    const delay = this.backoffDelayMs(this.attempts);
    this.attempts += 1;
    this.reconnectTimer = this.setTimeoutFn(() => {
      this.reconnectTimer = null;
      this.open();
    }, delay);
  }

  private notifyStatus(status: ConnectionStatus): void {
    for (const fn of this.statusHandlers) fn(status);
  }
}
