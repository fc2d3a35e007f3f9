import type { ActionPayload, ConfigPayload, WitnessPayload } from "./types.js";

export interface ReplayHighlight {
  agent: string;
  consumed: string; // server.service of the consumed message
  stateChange: string; // "server: old -> new"
  emitted: string; // "server.service" or "TERMINATES"
}

export interface ReplayView {
  index: number; // 0 = initial configuration
  total: number;
  config: ConfigPayload;
  action: ActionPayload | null; // the action that produced `config`
  highlight: ReplayHighlight | null;
  atEnd: boolean;
}

/** Pure function of (witness, index): stepping forward then back lands on
 *  an identical view. Configurations come verbatim from the witness. */
export function replayView(witness: WitnessPayload, index: number): ReplayView {
  const total = witness.steps.length;
  const clamped = Math.max(0, Math.min(index, total));
  if (clamped === 0) {
    return {
      index: 0,
      total,
      config: witness.initial,
      action: null,
      highlight: null,
      atEnd: total === 0,
    };
  }
  const step = witness.steps[clamped - 1];
  const before = clamped === 1 ? witness.initial : witness.steps[clamped - 2].after;
  const action = step.action;
  return {
    index: clamped,
    total,
    config: step.after,
    action,
    highlight: {
      agent: action.agent,
      consumed: `${action.server}.${action.service}`,
      stateChange: `${action.server}: ${before.servers[action.server]} -> ${action.out_state}`,
      emitted: action.out === null ? "TERMINATES" : `${action.out.server}.${action.out.service}`,
    },
    atEnd: clamped === total,
  };
}
