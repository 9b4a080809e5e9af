/**
 * Entry point: wire socket, store, and panel together. Message handling
 * mutates the store; rendering is coalesced to one pass per animation
 * frame so a burst of diffs or meter frames never stacks layout work.
 */

import { clampForAddress } from "./protocol.js";
import { Store } from "./store.js";
import { Panel } from "./view.js";
import { EngineSocket } from "./ws.js";

function wsUrl(): string {
  const params = new URLSearchParams(location.search);
  const override = params.get("ws");
  if (override) return override;
  const scheme = location.protocol === "https:" ? "wss" : "ws";
  const host = location.hostname || "127.0.0.1";
  return `${scheme}://${host}:9130/ws`;
}

export function boot(mount: HTMLElement): {
  store: Store;
  socket: EngineSocket;
  panel: Panel;
} {
  const store = new Store();
  const socket = new EngineSocket(wsUrl());

  const panel = new Panel(mount, store, (address, value) => {
    const clamped = clampForAddress(address, value);
    store.optimisticSet(address, clamped);
    socket.send({ type: "set", address, value: clamped });
  });

  let dirty = false;
  const scheduleRender = () => {
    if (dirty) return;
    dirty = true;
    requestAnimationFrame(() => {
      dirty = false;
      panel.render(store.state);
    });
  };

  store.subscribe(scheduleRender);
  socket.onStatus((status) => store.setStatus(status));
  socket.onMessage((msg) => store.handleMessage(msg, performance.now()));
  socket.connect();

  const meterLoop = (nowMs: number) => {
    panel.renderMeters(nowMs);
    requestAnimationFrame(meterLoop);
  };
  requestAnimationFrame(meterLoop);

  return { store, socket, panel };
}

const mount = document.getElementById("app");
if (mount) boot(mount);
