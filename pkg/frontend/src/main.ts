import { ApiClient, ApiError } from "./client.js";
import { replayView } from "./replay.js";
import { renderError, renderReplay, renderSession } from "./render.js";
import type { ModelPayload, StatePayload, WitnessPayload } from "./types.js";
import { buildViewModel } from "./viewmodel.js";

// The page is a strict mirror of the service: every rendered configuration
// is one the API returned, and the only mutations are explicit user steps.

class App {
  private client = new ApiClient("");
  private model: ModelPayload | null = null;
  private witness: WitnessPayload | null = null;
  private replayIndex = 0;

  constructor(private root: HTMLElement) {}

  async start(): Promise<void> {
    try {
      this.model = await this.client.model();
      const state = await this.client.createSession();
      this.showState(state);
    } catch (error) {
      renderError(this.root, `cannot reach the service: ${error}`, () => void this.start());
    }
  }

  private showState(state: StatePayload): void {
    if (this.model === null) return;
    renderSession(this.root, buildViewModel(state, this.model), {
      onChoose: (actionId) => void this.step(actionId),
      onUndo: () => void this.undo(),
      onReplayRequest: () => void this.loadReplay(),
    });
  }

  private async step(actionId: number): Promise<void> {
    try {
      this.showState(await this.client.step(actionId));
    } catch (error) {
      // A 409 means the choice went stale; surface it and re-render from
      // the service's authoritative state.
      const detail = error instanceof ApiError ? error.payload.error : String(error);
      this.showState(await this.client.state());
      renderError(this.root, `step rejected: ${detail}`, () => void this.refresh());
    }
  }

  private async undo(): Promise<void> {
    this.showState(await this.client.undo());
  }

  private async refresh(): Promise<void> {
    this.showState(await this.client.state());
  }

  private async loadReplay(): Promise<void> {
    try {
      const report = await this.client.verify();
      const finding = report.total_deadlocks[0] ?? report.partial_deadlocks[0];
      if (!finding) {
        renderError(this.root, "verification found no deadlock to replay", () => void this.refresh());
        return;
      }
      this.witness = finding.witness;
      this.replayIndex = 0;
      this.showReplay();
    } catch (error) {
      renderError(this.root, `verify failed: ${error}`, () => void this.refresh());
    }
  }

  private showReplay(): void {
    if (this.witness === null) return;
    renderReplay(this.root, replayView(this.witness, this.replayIndex), {
      onForward: () => {
        this.replayIndex += 1;
        this.showReplay();
      },
      onBack: () => {
        this.replayIndex -= 1;
        this.showReplay();
      },
      onClose: () => void this.refresh(),
    });
  }
}

const root = document.getElementById("app");
if (root !== null) {
  void new App(root).start();
}
