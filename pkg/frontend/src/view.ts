/**
 * DOM panel: one column per sound object (meter, fader, pan, breath
 * send, mute), a master strip, the breath effect panel, scene buttons,
 * the routing-weight grid, and per-device level lamps. The view owns no
 * state; it renders a Store snapshot and forwards edits to a callback.
 */

import { dbToFraction, formatDb, MeterChannel } from "./meters.js";
import type { BreathField, StripField } from "./protocol.js";
import {
  breathAddress,
  BREATH_RANGES,
  edgeWeightAddress,
  GAIN_DB_RANGE,
  MASTER_ADDRESS,
  PAN_RANGE,
  SCENE_ADDRESS,
  SEND_RANGE,
  stripAddress,
} from "./protocol.js";
import type { UiState } from "./store.js";
import type { Store } from "./store.js";

export type SetFn = (address: string, value: number | boolean | string) => void;

const LEVELS = ["micro", "meso", "macro"] as const;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function slider(
  min: number,
  max: number,
  step: number,
  className: string,
): HTMLInputElement {
  const input = el("input", className);
  input.type = "range";
  input.min = String(min);
  input.max = String(max);
  input.step = String(step);
  return input;
}

/** Update a slider unless the user is mid-drag on it. */
function syncSlider(input: HTMLInputElement, value: number): void {
  if (document.activeElement === input) return;
  const next = String(value);
  if (input.value !== next) input.value = next;
}

interface StripWidgets {
  meterBar: HTMLDivElement;
  peakTick: HTMLDivElement;
  meterWrap: HTMLDivElement;
  readout: HTMLSpanElement;
  gain: HTMLInputElement;
  pan: HTMLInputElement;
  send: HTMLInputElement;
  mute: HTMLButtonElement;
  meter: MeterChannel;
}

export class Panel {
  readonly root: HTMLElement;

  private readonly store: Store;
  private readonly onSet: SetFn;
  private readonly strips = new Map<string, StripWidgets>();
  private readonly masterMeter = new MeterChannel();
  private masterBar!: HTMLDivElement;
  private masterTick!: HTMLDivElement;
  private masterWrap!: HTMLDivElement;
  private masterGain!: HTMLInputElement;
  private masterReadout!: HTMLSpanElement;
  private breathSliders = new Map<BreathField, HTMLInputElement>();
  private breathReadouts = new Map<BreathField, HTMLSpanElement>();
  private statusBanner!: HTMLDivElement;
  private errorToast!: HTMLDivElement;
  private sceneRow!: HTMLDivElement;
  private lampRows = new Map<string, Map<string, HTMLSpanElement>>();
  private edgeBody!: HTMLTableSectionElement;
  private edgeInputs: HTMLInputElement[] = [];
  private builtSceneList = "";
  private builtEdgeSig = "";
  private builtStripIds = "";

  constructor(mount: HTMLElement, store: Store, onSet: SetFn) {
    this.store = store;
    this.onSet = onSet;
    this.root = mount;
    this.buildShell();
  }

  /** Re-render controls from state (cheap; call on every store change). */
  render(state: UiState): void {
    this.statusBanner.textContent = state.status;
    this.statusBanner.dataset.status = state.status;
    this.root.classList.toggle("disconnected", state.status !== "connected");
    this.errorToast.textContent = state.lastError ?? "";
    this.errorToast.hidden = state.lastError === null;

    const engine = state.engine;
    if (!engine) {
      this.applyEnabled(state);
      return;
    }
    const stripIds = Object.keys(engine.mixer.strips).sort().join(",");
    if (stripIds !== this.builtStripIds) {
      this.buildStrips(Object.keys(engine.mixer.strips).sort());
      this.builtStripIds = stripIds;
    }
    const sceneList = engine.scenes.join(",");
    if (sceneList !== this.builtSceneList) {
      this.buildScenes(engine.scenes, engine.scene);
      this.builtSceneList = sceneList;
    }
    // A scene-switch diff renames the scene before the next heartbeat
    // snapshot delivers the new edge list, so key the grid on the routes.
    const edgeSig = engine.mapping.edges
      .map((e) => `${e.index}:${e.source}>${e.destination}`)
      .join("|");
    if (edgeSig !== this.builtEdgeSig) {
      this.buildEdges();
      this.builtEdgeSig = edgeSig;
    }

    for (const [strip, w] of this.strips) {
      const gain = this.store.valueAt(stripAddress(strip, "gain_db"));
      const pan = this.store.valueAt(stripAddress(strip, "pan"));
      const send = this.store.valueAt(stripAddress(strip, "send_breath"));
      const mute = this.store.valueAt(stripAddress(strip, "mute"));
      if (typeof gain === "number") {
        syncSlider(w.gain, gain);
        w.readout.textContent = `${gain.toFixed(1)} dB`;
      }
      if (typeof pan === "number") syncSlider(w.pan, pan);
      if (typeof send === "number") syncSlider(w.send, send);
      const muted = mute === true || (typeof mute === "number" && mute >= 0.5);
      w.mute.classList.toggle("active", muted);
    }
    const master = this.store.valueAt(MASTER_ADDRESS);
    if (typeof master === "number") {
      syncSlider(this.masterGain, master);
      this.masterReadout.textContent = `${master.toFixed(1)} dB`;
    }
    for (const field of Object.keys(BREATH_RANGES) as BreathField[]) {
      const value = this.store.valueAt(breathAddress(field));
      const input = this.breathSliders.get(field);
      const readout = this.breathReadouts.get(field);
      if (typeof value === "number" && input && readout) {
        syncSlider(input, value);
        readout.textContent = value.toFixed(2);
      }
    }
    for (const button of this.sceneRow.querySelectorAll("button")) {
      button.classList.toggle("active", button.dataset.scene === engine.scene);
    }
    this.edgeInputs.forEach((input, i) => {
      const weight = this.store.valueAt(edgeWeightAddress(i));
      if (typeof weight === "number") syncSlider(input, weight);
    });
    this.renderLamps(state);
    // Last, so controls created by the build steps above are included.
    this.applyEnabled(state);
  }

  private applyEnabled(state: UiState): void {
    const disabled = state.status !== "connected";
    for (const node of this.root.querySelectorAll("input, button")) {
      (node as HTMLInputElement | HTMLButtonElement).disabled = disabled;
    }
  }

  /** Advance meter ballistics; call once per animation frame. */
  renderMeters(nowMs: number): void {
    const meters = this.store.state.meters;
    for (const [strip, w] of this.strips) {
      const reading = meters?.strips[strip];
      if (reading && meters.receivedAtMs > nowMs - 50) {
        w.meter.feed(reading.peak, meters.receivedAtMs);
      }
      this.drawMeter(w.meterWrap, w.meterBar, w.peakTick, w.meter, nowMs);
    }
    const master = meters?.master;
    if (master && meters.receivedAtMs > nowMs - 50) {
      this.masterMeter.feed(master.peak, meters.receivedAtMs);
    }
    this.drawMeter(
      this.masterWrap,
      this.masterBar,
      this.masterTick,
      this.masterMeter,
      nowMs,
    );
  }

  private drawMeter(
    wrap: HTMLDivElement,
    bar: HTMLDivElement,
    tick: HTMLDivElement,
    meter: MeterChannel,
    nowMs: number,
  ): void {
    const db = meter.displayDb(nowMs);
    bar.style.height = `${dbToFraction(db) * 100}%`;
    tick.style.bottom = `${dbToFraction(meter.peakHoldDb(nowMs)) * 100}%`;
    wrap.classList.toggle("stale", meter.isStale(nowMs));
    wrap.title = `${formatDb(db)} dBFS`;
  }

  private buildShell(): void {
    this.root.replaceChildren();
    const header = el("header", "topbar");
    this.statusBanner = el("div", "status", "disconnected");
    this.sceneRow = el("div", "scenes");
    const lamps = el("div", "lamps");
    for (const device of ["left_arm", "right_calf"]) {
      const row = el("div", "lamp-row");
      row.append(el("span", "lamp-label", device));
      const cells = new Map<string, HTMLSpanElement>();
      for (const level of LEVELS) {
        const lamp = el("span", "lamp", level);
        lamp.dataset.level = level;
        cells.set(level, lamp);
        row.append(lamp);
      }
      this.lampRows.set(device, cells);
      lamps.append(row);
    }
    header.append(this.statusBanner, this.sceneRow, lamps);

    this.errorToast = el("div", "toast");
    this.errorToast.hidden = true;
    this.errorToast.addEventListener("click", () => this.store.clearError());

    const mixer = el("section", "mixer");
    mixer.append(el("div", "strips"));
    const master = this.buildMaster();
    mixer.append(master);

    const side = el("section", "side");
    side.append(this.buildBreath(), this.buildRouting());

    this.root.append(header, this.errorToast, mixer, side);
  }

  private buildStrips(stripIds: string[]): void {
    const host = this.root.querySelector(".strips") as HTMLDivElement;
    host.replaceChildren();
    this.strips.clear();
    for (const strip of stripIds) {
      const col = el("div", "strip");
      col.append(el("h3", "strip-name", strip));

      const meterWrap = el("div", "meter");
      const meterBar = el("div", "meter-bar");
      const peakTick = el("div", "meter-peak");
      meterWrap.append(meterBar, peakTick);

      const gain = slider(GAIN_DB_RANGE[0], GAIN_DB_RANGE[1], 0.1, "fader");
      const readout = el("span", "readout", "");
      gain.addEventListener("input", () =>
        this.onSet(stripAddress(strip, "gain_db"), Number(gain.value)),
      );
      const pan = slider(PAN_RANGE[0], PAN_RANGE[1], 0.01, "pan");
      pan.addEventListener("input", () =>
        this.onSet(stripAddress(strip, "pan"), Number(pan.value)),
      );
      const send = slider(SEND_RANGE[0], SEND_RANGE[1], 0.01, "send");
      send.addEventListener("input", () =>
        this.onSet(stripAddress(strip, "send_breath"), Number(send.value)),
      );
      const mute = el("button", "mute", "mute");
      mute.addEventListener("click", () =>
        this.onSet(
          stripAddress(strip, "mute"),
          !(this.store.valueAt(stripAddress(strip, "mute")) === true),
        ),
      );

      const row = el("div", "strip-main");
      row.append(meterWrap, gain);
      col.append(row, readout, this.labeled("pan", pan),
                 this.labeled("breath", send), mute);
      host.append(col);
      this.strips.set(strip, {
        meterBar, peakTick, meterWrap, readout,
        gain, pan, send, mute,
        meter: new MeterChannel(),
      });
    }
  }

  private buildMaster(): HTMLDivElement {
    const col = el("div", "strip master");
    col.append(el("h3", "strip-name", "master"));
    this.masterWrap = el("div", "meter");
    this.masterBar = el("div", "meter-bar");
    this.masterTick = el("div", "meter-peak");
    this.masterWrap.append(this.masterBar, this.masterTick);
    this.masterGain = slider(GAIN_DB_RANGE[0], GAIN_DB_RANGE[1], 0.1, "fader");
    this.masterReadout = el("span", "readout", "");
    this.masterGain.addEventListener("input", () =>
      this.onSet(MASTER_ADDRESS, Number(this.masterGain.value)),
    );
    const row = el("div", "strip-main");
    row.append(this.masterWrap, this.masterGain);
    col.append(row, this.masterReadout);
    return col;
  }

  private buildBreath(): HTMLElement {
    const panel = el("div", "breath-panel");
    panel.append(el("h3", undefined, "breath fx"));
    for (const field of Object.keys(BREATH_RANGES) as BreathField[]) {
      const [lo, hi] = BREATH_RANGES[field];
      const input = slider(lo, hi, 0.01, "breath-slider");
      input.addEventListener("input", () =>
        this.onSet(breathAddress(field), Number(input.value)),
      );
      const readout = el("span", "readout", "");
      this.breathSliders.set(field, input);
      this.breathReadouts.set(field, readout);
      const row = this.labeled(field, input);
      row.append(readout);
      panel.append(row);
    }
    return panel;
  }

  private buildRouting(): HTMLElement {
    const panel = el("div", "routing-panel");
    panel.append(el("h3", undefined, "routing"));
    const table = el("table", "routing");
    this.edgeBody = document.createElement("tbody");
    table.append(this.edgeBody);
    panel.append(table);
    return panel;
  }

  private buildScenes(scenes: string[], current: string): void {
    this.sceneRow.replaceChildren();
    for (const scene of scenes) {
      const button = el("button", "scene", scene);
      button.dataset.scene = scene;
      button.classList.toggle("active", scene === current);
      button.addEventListener("click", () =>
        this.onSet(SCENE_ADDRESS, scene),
      );
      this.sceneRow.append(button);
    }
  }

  private buildEdges(): void {
    const edges = this.store.state.engine?.mapping.edges ?? [];
    this.edgeBody.replaceChildren();
    this.edgeInputs = [];
    for (const edge of edges) {
      const tr = document.createElement("tr");
      const route = el("td", "edge-route",
                       `${edge.source} → ${edge.destination}`);
      const cell = el("td", "edge-weight");
      const input = slider(-1, 1, 0.01, "edge-slider");
      input.value = String(edge.weight);
      input.addEventListener("input", () =>
        this.onSet(edgeWeightAddress(edge.index), Number(input.value)),
      );
      cell.append(input);
      tr.append(route, cell);
      this.edgeBody.append(tr);
      this.edgeInputs.push(input);
    }
  }

  private renderLamps(state: UiState): void {
    const levels = state.meters?.levels ?? state.engine?.levels ?? {};
    for (const [device, cells] of this.lampRows) {
      const active = levels[device];
      for (const [level, lamp] of cells) {
        lamp.classList.toggle("on", level === active);
      }
    }
  }

  private labeled(text: string, input: HTMLElement): HTMLDivElement {
    const row = el("div", "labeled");
    row.append(el("label", undefined, text), input);
    return row;
  }
}
