/**
 * Wire types and control-address helpers for the engine's WebSocket
 * protocol. The server sends a full snapshot on connect, then diffs,
 * meters, and heartbeat snapshots; the client only ever sends `set`.
 */

export const STRIP_IDS = [
  "bubble", "fluidflow", "friction", "nonlinear", "scraping",
] as const;
export type StripId = (typeof STRIP_IDS)[number];

export const STRIP_FIELDS = ["gain_db", "pan", "send_breath", "mute"] as const;
export type StripField = (typeof STRIP_FIELDS)[number];

export const BREATH_FIELDS = ["rt60_s", "feedback", "mix"] as const;
export type BreathField = (typeof BREATH_FIELDS)[number];

export const DEVICE_IDS = ["left_arm", "right_calf"] as const;
export type DeviceId = (typeof DEVICE_IDS)[number];

export type Level = "micro" | "meso" | "macro";

export interface StripState {
  gain_db: number;
  pan: number;
  send_breath: number;
  mute: boolean;
}

export interface EdgeSummary {
  index: number;
  source: string;
  destination: string;
  weight: number;
  curve: string;
  k: number;
  out_range: [number, number];
}

/** Full engine state as carried by snapshot messages and GET /state. */
export interface EngineSnapshot {
  scene: string;
  scenes: string[];
  mixer: {
    strips: Record<string, StripState>;
    master_gain_db: number;
  };
  breath_fx: Record<BreathField, number>;
  mapping: { edges: EdgeSummary[] };
  levels: Record<string, Level>;
  calibration: { devices: string[] };
  seq: number;
}

export interface MeterReading {
  peak: number;
  rms: number;
}

export type ServerMessage =
  | { type: "snapshot"; state: EngineSnapshot }
  | { type: "diff"; changes: Record<string, number | string>; seq: number }
  | {
      type: "meters";
      strips: Record<string, MeterReading>;
      master: MeterReading;
      levels: Record<string, Level>;
      t_us: number;
    }
  | { type: "error"; message: string; address?: string };

export interface SetMessage {
  type: "set";
  address: string;
  value: number | boolean | string;
}

// Numeric ranges per address kind; must match the server's clamps so the
// UI never originates an out-of-range value.
export const GAIN_DB_RANGE: [number, number] = [-60, 6];
export const PAN_RANGE: [number, number] = [-1, 1];
export const SEND_RANGE: [number, number] = [0, 1];
export const EDGE_WEIGHT_RANGE: [number, number] = [-1, 1];
export const BREATH_RANGES: Record<BreathField, [number, number]> = {
  rt60_s: [0.2, 6],
  feedback: [0, 0.95],
  mix: [0, 1],
};

export function stripAddress(strip: string, field: StripField): string {
  return `/mix/strip/${strip}/${field}`;
}

export const MASTER_ADDRESS = "/mix/master/gain_db";
export const SCENE_ADDRESS = "/scene";

export function breathAddress(field: BreathField): string {
  return `/fx/breath/${field}`;
}

export function edgeWeightAddress(index: number): string {
  return `/map/edge/${index}/weight`;
}

const STRIP_RE = /^\/mix\/strip\/([a-z0-9_]+)\/(gain_db|pan|send_breath|mute)$/;
const BREATH_RE = /^\/fx\/breath\/(rt60_s|feedback|mix)$/;
const EDGE_RE = /^\/map\/edge\/(\d+)\/weight$/;

export type ParsedAddress =
  | { kind: "strip"; strip: string; field: StripField }
  | { kind: "master" }
  | { kind: "breath"; field: BreathField }
  | { kind: "edge"; index: number }
  | { kind: "scene" };

/** Split a control address; returns null outside the namespace. */
export function parseAddress(address: string): ParsedAddress | null {
  const s = STRIP_RE.exec(address);
  if (s) return { kind: "strip", strip: s[1]!, field: s[2] as StripField };
  if (address === MASTER_ADDRESS) return { kind: "master" };
  const b = BREATH_RE.exec(address);
  if (b) return { kind: "breath", field: b[1] as BreathField };
  const e = EDGE_RE.exec(address);
  if (e) return { kind: "edge", index: Number(e[1]) };
  if (address === SCENE_ADDRESS) return { kind: "scene" };
  return null;
}

export function rangeFor(address: string): [number, number] | null {
  const parsed = parseAddress(address);
  if (!parsed) return null;
  switch (parsed.kind) {
    case "strip":
      if (parsed.field === "gain_db") return GAIN_DB_RANGE;
      if (parsed.field === "pan") return PAN_RANGE;
      if (parsed.field === "send_breath") return SEND_RANGE;
      return null; // mute is boolean
    case "master":
      return GAIN_DB_RANGE;
    case "breath":
      return BREATH_RANGES[parsed.field];
    case "edge":
      return EDGE_WEIGHT_RANGE;
    case "scene":
      return null;
  }
}

/** Clamp a numeric value into its address range (client-side mirror of
 * the server clamp; strings and bools pass through). */
export function clampForAddress(
  address: string,
  value: number | boolean | string,
): number | boolean | string {
  if (typeof value !== "number") return value;
  const range = rangeFor(address);
  if (!range) return value;
  return Math.min(range[1], Math.max(range[0], value));
}

/**
 * Every control address this client can emit, with an in-range sample
 * value, as an ordered script: later entries may rely on earlier ones
 * (the scene switch precedes edge writes so all edge indices exist).
 * frontend/addresses.json is the committed copy of exactly this list.
 */
export function emittableAddresses(): Array<{
  address: string;
  value: number | boolean | string;
}> {
  const entries: Array<{ address: string; value: number | boolean | string }> =
    [];
  // musicking is the largest scene: 17 mapping edges, all strips active.
  entries.push({ address: SCENE_ADDRESS, value: "musicking" });
  for (const strip of STRIP_IDS) {
    entries.push({ address: stripAddress(strip, "gain_db"), value: -6 });
    entries.push({ address: stripAddress(strip, "pan"), value: 0.25 });
    entries.push({ address: stripAddress(strip, "send_breath"), value: 0.5 });
    entries.push({ address: stripAddress(strip, "mute"), value: false });
  }
  entries.push({ address: MASTER_ADDRESS, value: -3 });
  entries.push({ address: breathAddress("rt60_s"), value: 1.5 });
  entries.push({ address: breathAddress("feedback"), value: 0.25 });
  entries.push({ address: breathAddress("mix"), value: 0.4 });
  for (let i = 0; i < 17; i++) {
    entries.push({ address: edgeWeightAddress(i), value: 0.75 });
  }
  entries.push({ address: SCENE_ADDRESS, value: "standstill" });
  entries.push({ address: SCENE_ADDRESS, value: "breath" });
  return entries;
}
