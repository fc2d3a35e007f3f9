import { describe, expect, it } from "vitest";

import { replayView } from "../src/replay.js";
import type { ModelPayload, StatePayload, WitnessPayload } from "../src/types.js";
import { buildViewModel } from "../src/viewmodel.js";

const MODEL: ModelPayload = {
  v: 1,
  servers: [
    { name: "sem1", states: ["state_up", "state_down"], services: ["wait", "signal"], vars: ["state"] },
    { name: "S_p", states: ["ini", "stop"], services: ["start", "ok"], vars: null },
  ],
  agents: ["A_p"],
  initial: {
    servers: { sem1: "state_up", S_p: "ini" },
    pending: { A_p: { server: "S_p", service: "start" } },
    terminated: [],
  },
};

const STATE: StatePayload = {
  v: 1,
  session: "s1",
  configuration: {
    servers: { sem1: "state_down", S_p: "ini" },
    pending: { A_p: { server: "sem1", service: "wait" } },
    terminated: [],
  },
  decomposed: { sem1: { state: "down" } },
  enabled: [
    {
      id: 4,
      agent: "A_p",
      server: "sem1",
      service: "wait",
      in_state: "state_down",
      out_state: "state_up",
      out: { server: "S_p", service: "ok" },
      preview: {
        servers: { sem1: "state_up", S_p: "ini" },
        pending: { A_p: { server: "S_p", service: "ok" } },
        terminated: [],
      },
    },
  ],
  deadlock: false,
  blocked: [],
  history_length: 2,
};

describe("buildViewModel", () => {
  it("builds server cards in model order with decomposed values", () => {
    const vm = buildViewModel(STATE, MODEL);
    expect(vm.serverCards.map((c) => c.name)).toEqual(["sem1", "S_p"]);
    expect(vm.serverCards[0].state).toBe("state_down");
    expect(vm.serverCards[0].vars).toEqual([{ name: "state", value: "down" }]);
    expect(vm.serverCards[1].vars).toBeNull();
  });

  it("shows one lane per agent with its pending call", () => {
    const vm = buildViewModel(STATE, MODEL);
    expect(vm.agentLanes).toEqual([
      { agent: "A_p", status: { kind: "pending", server: "sem1", service: "wait" } },
    ]);
  });

  it("marks terminated agents", () => {
    const state = structuredClone(STATE);
    state.configuration.pending = {};
    state.configuration.terminated = ["A_p"];
    state.enabled = [];
    const vm = buildViewModel(state, MODEL);
    expect(vm.agentLanes[0].status).toEqual({ kind: "terminated" });
    expect(vm.deadlock).toBeNull(); // proper termination is not a deadlock
  });

  it("describes enabled actions with preview and reply", () => {
    const vm = buildViewModel(STATE, MODEL);
    expect(vm.enabledActions).toHaveLength(1);
    const entry = vm.enabledActions[0];
    expect(entry.id).toBe(4);
    expect(entry.label).toBe("sem1.wait");
    expect(entry.stateChange).toBe("sem1: state_down -> state_up");
    expect(entry.reply).toBe("-> S_p.ok");
    expect(entry.preview).toBe(STATE.enabled[0].preview);
  });

  it("raises the deadlock badge with the blocked agents", () => {
    const state = structuredClone(STATE);
    state.enabled = [];
    state.deadlock = true;
    state.blocked = ["A_p"];
    const vm = buildViewModel(state, MODEL);
    expect(vm.deadlock).toEqual({ blocked: ["A_p"] });
    expect(vm.enabledActions).toEqual([]);
  });

  it("passes the configuration through untouched", () => {
    const vm = buildViewModel(STATE, MODEL);
    expect(vm.configuration).toBe(STATE.configuration);
  });
});

const WITNESS: WitnessPayload = {
  v: 1,
  initial: {
    servers: { sem1: "state_up", S_p: "ini" },
    pending: { A_p: { server: "S_p", service: "start" } },
    terminated: [],
  },
  steps: [
    {
      action: {
        id: 0,
        agent: "A_p",
        server: "S_p",
        service: "start",
        in_state: "ini",
        out_state: "s0",
        out: { server: "sem1", service: "wait" },
      },
      after: {
        servers: { sem1: "state_up", S_p: "s0" },
        pending: { A_p: { server: "sem1", service: "wait" } },
        terminated: [],
      },
    },
    {
      action: {
        id: 1,
        agent: "A_p",
        server: "sem1",
        service: "wait",
        in_state: "state_up",
        out_state: "state_down",
        out: null,
      },
      after: {
        servers: { sem1: "state_down", S_p: "s0" },
        pending: {},
        terminated: ["A_p"],
      },
    },
  ],
  final: {
    servers: { sem1: "state_down", S_p: "s0" },
    pending: {},
    terminated: ["A_p"],
  },
};

describe("replayView", () => {
  it("is a pure function of the index: forward then back is identical", () => {
    const before = replayView(WITNESS, 1);
    replayView(WITNESS, 2);
    const again = replayView(WITNESS, 1);
    expect(again).toEqual(before);
  });

  it("starts at the initial configuration with no highlight", () => {
    const view = replayView(WITNESS, 0);
    expect(view.config).toBe(WITNESS.initial);
    expect(view.highlight).toBeNull();
    expect(view.index).toBe(0);
  });

  it("highlights the acting agent, consumed message and state change", () => {
    const view = replayView(WITNESS, 1);
    expect(view.highlight).toEqual({
      agent: "A_p",
      consumed: "S_p.start",
      stateChange: "S_p: ini -> s0",
      emitted: "sem1.wait",
    });
    expect(view.config).toBe(WITNESS.steps[0].after);
  });

  it("renders termination as such", () => {
    const view = replayView(WITNESS, 2);
    expect(view.highlight?.emitted).toBe("TERMINATES");
    expect(view.atEnd).toBe(true);
  });

  it("clamps out-of-range indices", () => {
    expect(replayView(WITNESS, -5).index).toBe(0);
    expect(replayView(WITNESS, 99).index).toBe(2);
  });

  it("has as many steps as the witness", () => {
    expect(replayView(WITNESS, 0).total).toBe(WITNESS.steps.length);
  });
});
