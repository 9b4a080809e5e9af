/**
 * Client-side state: the last engine snapshot plus applied diffs, with an
 * optimistic overlay for in-flight edits. Controls read through the
 * overlay so faders feel instant; the matching diff (or an error)
 * reconciles the overlay back out.
 */

import type {
  EngineSnapshot,
  Level,
  MeterReading,
  ServerMessage,
} from "./protocol.js";
import { parseAddress } from "./protocol.js";

export type ConnectionStatus = "connecting" | "connected" | "disconnected";

export interface MeterFrame {
  strips: Record<string, MeterReading>;
  master: MeterReading;
  levels: Record<string, Level>;
  receivedAtMs: number;
}

export interface UiState {
  status: ConnectionStatus;
  engine: EngineSnapshot | null;
  meters: MeterFrame | null;
  /** Optimistic edits awaiting their confirming diff. */
  pending: Map<string, number | boolean | string>;
  lastError: string | null;
}

type Listener = (state: UiState) => void;

export class Store {
  readonly state: UiState = {
    status: "disconnected",
    engine: null,
    meters: null,
    pending: new Map(),
    lastError: null,
  };

  private listeners: Listener[] = [];

  subscribe(fn: Listener): () => void {
    this.listeners.push(fn);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== fn);
    };
  }

  private emit(): void {
    for (const fn of this.listeners) fn(this.state);
  }

  setStatus(status: ConnectionStatus): void {
    this.state.status = status;
    if (status !== "connected") this.state.pending.clear();
    this.emit();
  }

  /** Feed every server message through here. */
  handleMessage(msg: ServerMessage, nowMs: number): void {
    switch (msg.type) {
      case "snapshot":
        // A snapshot is authoritative: it resolves every in-flight edit,
        // which is what makes reconnect-after-restart a clean resync.
        this.state.engine = msg.state;
        this.state.pending.clear();
        break;
      case "diff":
        this.applyDiff(msg.changes, msg.seq);
        break;
      case "meters":
        this.state.meters = {
          strips: msg.strips,
          master: msg.master,
          levels: msg.levels,
          receivedAtMs: nowMs,
        };
        break;
      case "error":
        this.state.lastError = msg.message;
        if (msg.address) this.state.pending.delete(msg.address);
        break;
    }
    this.emit();
  }

  /** Record a local edit and apply it to the visible state immediately. */
  optimisticSet(address: string, value: number | boolean | string): void {
    this.state.pending.set(address, value);
    this.emit();
  }

  clearError(): void {
    this.state.lastError = null;
    this.emit();
  }

  /** Value a control should display: pending overlay over engine state. */
  valueAt(address: string): number | boolean | string | undefined {
    const pending = this.state.pending.get(address);
    if (pending !== undefined) return pending;
    return this.engineValueAt(address);
  }

  engineValueAt(address: string): number | boolean | string | undefined {
    const engine = this.state.engine;
    const parsed = parseAddress(address);
    if (!engine || !parsed) return undefined;
    switch (parsed.kind) {
      case "strip": {
        const strip = engine.mixer.strips[parsed.strip];
        return strip ? strip[parsed.field] : undefined;
      }
      case "master":
        return engine.mixer.master_gain_db;
      case "breath":
        return engine.breath_fx[parsed.field];
      case "edge":
        return engine.mapping.edges[parsed.index]?.weight;
      case "scene":
        return engine.scene;
    }
  }

  private applyDiff(
    changes: Record<string, number | string>,
    seq: number,
  ): void {
    const engine = this.state.engine;
    if (!engine) return;
    for (const [address, value] of Object.entries(changes)) {
      const parsed = parseAddress(address);
      if (!parsed) continue;
      switch (parsed.kind) {
        case "strip": {
          const strip = engine.mixer.strips[parsed.strip];
          if (!strip) break;
          if (parsed.field === "mute") {
            strip.mute = typeof value === "number" ? value >= 0.5 : !!value;
          } else if (typeof value === "number") {
            strip[parsed.field] = value;
          }
          break;
        }
        case "master":
          if (typeof value === "number") engine.mixer.master_gain_db = value;
          break;
        case "breath":
          if (typeof value === "number") engine.breath_fx[parsed.field] = value;
          break;
        case "edge": {
          const edge = engine.mapping.edges[parsed.index];
          if (edge && typeof value === "number") edge.weight = value;
          break;
        }
        case "scene":
          if (typeof value === "string") engine.scene = value;
          break;
      }
      // The echoed value is the server's (clamped) truth; the optimistic
      // entry has served its purpose whether or not they agree.
      this.state.pending.delete(address);
    }
    engine.seq = seq;
  }
}
