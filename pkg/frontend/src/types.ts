// JSON schema (v1) of the local API. The UI consumes these payloads
// verbatim; it never derives configurations on its own.

export interface ConfigPayload {
  servers: Record<string, string>;
  pending: Record<string, { server: string; service: string }>;
  terminated: string[];
}

export interface ActionPayload {
  id: number;
  agent: string;
  server: string;
  service: string;
  in_state: string;
  out_state: string;
  out: { server: string; service: string } | null;
}

export interface EnabledActionPayload extends ActionPayload {
  preview: ConfigPayload;
}

export interface StatePayload {
  v: number;
  session: string;
  configuration: ConfigPayload;
  decomposed: Record<string, Record<string, unknown>>;
  enabled: EnabledActionPayload[];
  deadlock: boolean;
  blocked: string[];
  history_length: number;
}

export interface ModelServerPayload {
  name: string;
  states: string[];
  services: string[];
  vars: string[] | null;
}

export interface ModelPayload {
  v: number;
  servers: ModelServerPayload[];
  agents: string[];
  initial: ConfigPayload;
}

export interface WitnessStepPayload {
  action: ActionPayload;
  after: ConfigPayload;
}

export interface WitnessPayload {
  v: number;
  initial: ConfigPayload;
  steps: WitnessStepPayload[];
  final: ConfigPayload;
}

export interface DeadlockFindingPayload {
  node: number;
  config: ConfigPayload;
  witness: WitnessPayload;
}

export interface PartialFindingPayload extends DeadlockFindingPayload {
  agent: string;
}

export interface VerifyPayload {
  v: number;
  complete: boolean;
  nodes: number;
  edges: number;
  elapsed: number;
  total_deadlocks: DeadlockFindingPayload[];
  partial_deadlocks: PartialFindingPayload[];
}

export interface ApiErrorPayload {
  v: number;
  error: string;
  enabled?: ActionPayload[];
  detail?: string;
}
