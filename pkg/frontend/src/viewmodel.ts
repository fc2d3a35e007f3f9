import type {
  ConfigPayload,
  EnabledActionPayload,
  ModelPayload,
  StatePayload,
} from "./types.js";

export interface ServerCard {
  name: string;
  state: string;
  /** Decomposed variable values when the model carries a schema for them. */
  vars: { name: string; value: string }[] | null;
}

export type AgentStatus =
  | { kind: "pending"; server: string; service: string }
  | { kind: "terminated" };

export interface AgentLane {
  agent: string;
  status: AgentStatus;
}

export interface EnabledEntry {
  id: number;
  agent: string;
  label: string; // server.service
  stateChange: string; // "server: old -> new"
  reply: string; // "-> server.service" or "TERMINATES"
  preview: ConfigPayload;
}

export interface ViewModel {
  serverCards: ServerCard[];
  agentLanes: AgentLane[];
  enabledActions: EnabledEntry[];
  deadlock: { blocked: string[] } | null;
  historyLength: number;
  /** The payload's configuration, untouched; rendering and parity checks
   *  both read it so the UI can never drift from the engine. */
  configuration: ConfigPayload;
}

function renderValue(value: unknown): string {
  if (Array.isArray(value)) {
    return `[${value.map(renderValue).join(", ")}]`;
  }
  return String(value);
}

/** Pure: the view is a function of the latest /state payload (plus the
 *  immutable model description); nothing here advances any state. */
export function buildViewModel(state: StatePayload, model: ModelPayload): ViewModel {
  const order = model.servers.map((s) => s.name);
  const serverCards: ServerCard[] = order.map((name) => {
    const decomposed = state.decomposed[name];
    return {
      name,
      state: state.configuration.servers[name],
      vars:
        decomposed === undefined
          ? null
          : Object.entries(decomposed).map(([varName, value]) => ({
              name: varName,
              value: renderValue(value),
            })),
    };
  });

  const agentLanes: AgentLane[] = model.agents.map((agent) => {
    const pending = state.configuration.pending[agent];
    if (pending !== undefined) {
      return { agent, status: { kind: "pending", ...pending } };
    }
    return { agent, status: { kind: "terminated" } };
  });

  const enabledActions = state.enabled.map(describeAction);

  return {
    serverCards,
    agentLanes,
    enabledActions,
    deadlock: state.deadlock ? { blocked: state.blocked } : null,
    historyLength: state.history_length,
    configuration: state.configuration,
  };
}

export function describeAction(action: EnabledActionPayload): EnabledEntry {
  return {
    id: action.id,
    agent: action.agent,
    label: `${action.server}.${action.service}`,
    stateChange: `${action.server}: ${action.in_state} -> ${action.out_state}`,
    reply: action.out === null ? "TERMINATES" : `-> ${action.out.server}.${action.out.service}`,
    preview: action.preview,
  };
}
