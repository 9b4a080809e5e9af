/** Shared test fixtures: engine snapshots shaped like the wire state. */

import type { EngineSnapshot } from "../src/protocol.js";

export function makeSnapshot(
  overrides: Partial<EngineSnapshot> = {},
): EngineSnapshot {
  const strips: EngineSnapshot["mixer"]["strips"] = {};
  for (const [name, gain, pan] of [
    ["bubble", -6, -0.2],
    ["fluidflow", -6, 0.35],
    ["friction", -4, -0.4],
    ["nonlinear", -14, 0],
    ["scraping", -8, 0.6],
  ] as const) {
    strips[name] = { gain_db: gain, pan, send_breath: 0.2, mute: false };
  }
  return {
    scene: "musicking",
    scenes: ["breath", "musicking", "standstill"],
    mixer: { strips, master_gain_db: 0 },
    breath_fx: { rt60_s: 2, feedback: 0, mix: 0.3 },
    mapping: {
      edges: [
        {
          index: 0,
          source: "left_arm/aggregate",
          destination: "fluidflow/speed",
          weight: 1,
          curve: "exponential",
          k: 1.5,
          out_range: [0, 1],
        },
        {
          index: 1,
          source: "right_calf/aggregate",
          destination: "friction/force",
          weight: 0.5,
          curve: "linear",
          k: 1,
          out_range: [0, 0.8],
        },
      ],
    },
    levels: { left_arm: "micro", right_calf: "micro" },
    calibration: { devices: ["left_arm", "right_calf"] },
    seq: 0,
    ...overrides,
  };
}
