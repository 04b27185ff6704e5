/**
 * Stream replay: folding a captured gateway stream into the panels is
 * deterministic, and the intermediate panel states are pinned as
 * snapshots so a rendering change shows up as a diff.
 */

import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { initialModel, PanelModel, reduce } from "../src/model.js";
import { GatewayRecord } from "../src/records.js";

interface Step {
  now: number;
  record: GatewayRecord;
}

const STREAM: Step[] = JSON.parse(
  readFileSync(new URL("./fixtures/captured-stream.json", import.meta.url), "utf-8"),
);

function replay(): PanelModel[] {
  const states: PanelModel[] = [];
  let model = initialModel();
  for (const step of STREAM) {
    model = reduce(model, step.record, step.now);
    states.push(model);
  }
  return states;
}

describe("captured stream replay", () => {
  it("reproduces identical panel states on every replay", () => {
    expect(replay()).toEqual(replay());
  });

  it("matches the pinned panel snapshots", () => {
    const states = replay();
    // pin the panels at the interesting points of the session
    expect(states[2].badge).toMatchSnapshot("badge after setup");
    expect(states[5].badge.state).toBe("Exposing");
    expect(states[8]).toMatchSnapshot("mid-readout panel");
    expect(states[11].preview).toMatchSnapshot("first preview tile");
    expect(states.at(-1)).toMatchSnapshot("final panel");
  });

  it("walks the expected badge sequence", () => {
    const badges = replay().map((s) => s.badge.state);
    expect(badges[0]).toBe("Standby");
    expect(badges.at(-1)).toBe("Ready");
    expect(badges).toContain("Exposing");
    expect(badges).toContain("Reading");
  });

  it("flags the seq gap in the captured stream", () => {
    // the capture is missing seq 12; the reducer must notice
    const states = replay();
    const gapIndex = STREAM.findIndex((s) => s.record.seq === 13);
    expect(states[gapIndex].resyncNeeded).toBe(true);
  });
});
