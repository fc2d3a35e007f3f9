import type { ReplayView } from "./replay.js";
import type { ViewModel } from "./viewmodel.js";

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

export interface SessionHandlers {
  onChoose(actionId: number): void;
  onUndo(): void;
  onReplayRequest(): void;
}

export function renderSession(
  root: HTMLElement,
  vm: ViewModel,
  handlers: SessionHandlers,
): void {
  root.replaceChildren();

  if (vm.deadlock) {
    const badge = el("div", "deadlock-badge", "DEADLOCK");
    badge.append(
      el("span", "deadlock-agents", ` blocked: ${vm.deadlock.blocked.join(", ")}`),
    );
    root.append(badge);
  }

  const servers = el("section", "server-cards");
  servers.append(el("h2", undefined, "servers"));
  for (const card of vm.serverCards) {
    const box = el("div", "card");
    box.append(el("div", "card-title", card.name));
    box.append(el("div", "card-state", card.state));
    if (card.vars !== null) {
      const list = el("div", "card-vars");
      for (const v of card.vars) {
        list.append(el("div", "card-var", `${v.name} = ${v.value}`));
      }
      box.append(list);
    }
    servers.append(box);
  }
  root.append(servers);

  const agents = el("section", "agent-lanes");
  agents.append(el("h2", undefined, "agents"));
  for (const lane of vm.agentLanes) {
    const row = el("div", "lane");
    row.append(el("span", "lane-agent", lane.agent));
    if (lane.status.kind === "pending") {
      row.append(
        el("span", "lane-pending", `waiting on ${lane.status.server}.${lane.status.service}`),
      );
    } else {
      row.append(el("span", "lane-terminated", "TERMINATED"));
    }
    agents.append(row);
  }
  root.append(agents);

  const actions = el("section", "enabled-actions");
  const header = el("h2", undefined, `enabled actions (${vm.enabledActions.length})`);
  actions.append(header);
  for (const entry of vm.enabledActions) {
    const button = el("button", "action");
    button.append(el("span", "action-agent", entry.agent));
    button.append(el("span", "action-label", ` ${entry.label} `));
    button.append(el("span", "action-change", entry.stateChange));
    button.append(el("span", "action-reply", ` ${entry.reply}`));
    button.addEventListener("click", () => handlers.onChoose(entry.id));
    actions.append(button);
  }
  root.append(actions);

  const controls = el("section", "controls");
  const undo = el("button", "undo", `undo (${vm.historyLength} steps taken)`);
  undo.disabled = vm.historyLength === 0;
  undo.addEventListener("click", () => handlers.onUndo());
  controls.append(undo);
  const replay = el("button", "load-replay", "replay a counterexample");
  replay.addEventListener("click", () => handlers.onReplayRequest());
  controls.append(replay);
  root.append(controls);
}

export interface ReplayHandlers {
  onForward(): void;
  onBack(): void;
  onClose(): void;
}

export function renderReplay(
  root: HTMLElement,
  view: ReplayView,
  handlers: ReplayHandlers,
): void {
  root.replaceChildren();
  const bar = el("div", "replay-bar", `counterexample step ${view.index} of ${view.total}`);
  root.append(bar);

  if (view.highlight) {
    const info = el("div", "replay-highlight");
    info.append(el("span", "replay-agent", view.highlight.agent));
    info.append(el("span", undefined, ` consumed ${view.highlight.consumed}; `));
    info.append(el("span", undefined, `${view.highlight.stateChange}; `));
    info.append(el("span", undefined, `emitted ${view.highlight.emitted}`));
    root.append(info);
  } else {
    root.append(el("div", "replay-highlight", "initial configuration"));
  }

  const config = el("section", "replay-config");
  for (const [server, value] of Object.entries(view.config.servers)) {
    config.append(el("div", "card", `${server} = ${value}`));
  }
  for (const [agent, msg] of Object.entries(view.config.pending)) {
    config.append(el("div", "lane", `${agent} waiting on ${msg.server}.${msg.service}`));
  }
  for (const agent of view.config.terminated) {
    config.append(el("div", "lane lane-terminated", `${agent} TERMINATED`));
  }
  root.append(config);

  if (view.atEnd && view.total > 0) {
    root.append(el("div", "deadlock-badge", "final configuration of the witness"));
  }

  const controls = el("section", "controls");
  const back = el("button", undefined, "back");
  back.disabled = view.index === 0;
  back.addEventListener("click", () => handlers.onBack());
  const forward = el("button", undefined, "forward");
  forward.disabled = view.index >= view.total;
  forward.addEventListener("click", () => handlers.onForward());
  const close = el("button", undefined, "back to simulation");
  close.addEventListener("click", () => handlers.onClose());
  controls.append(back, forward, close);
  root.append(controls);
}

export function renderError(root: HTMLElement, message: string, onRetry: () => void): void {
  const banner = el("div", "error-banner");
  banner.append(el("span", undefined, message));
  const retry = el("button", undefined, "retry");
  retry.addEventListener("click", onRetry);
  banner.append(retry);
  root.prepend(banner);
}
