/**
 * Workflow controls: one method per AI action, mapping one-to-one onto
 * protocol messages, plus the autonomous continuation loop that repeats
 * `complete_step` until toggled off or the server reports completion.
 */

import { ProtocolClient } from './protocol.js';

export interface CompleteStepResult {
  ok: boolean;
  committed: number[];
  complete: boolean;
}

export class WorkflowControls {
  private continuationRunning = false;
  private continuationTask: Promise<void> | null = null;

  /** Number of complete_step messages sent; observable for tests and UI. */
  stepMessagesSent = 0;

  constructor(
    private readonly client: ProtocolClient,
    private readonly onUpdate: (status: string) => void = () => {},
  ) {}

  optimizeHistory() {
    return this.client.send({ type: 'optimize_history' });
  }

  completeStep(count = 1) {
    this.stepMessagesSent += 1;
    return this.client.send<CompleteStepResult>({ type: 'complete_step', count });
  }

  inpaint(label: string, seed: number) {
    return this.client.send<{ ok: boolean; stroke_ids: number[] }>({ type: 'inpaint', label, seed });
  }

  refine(strokeId: number) {
    return this.client.send<{ ok: boolean; job_id: number }>({ type: 'refine', stroke_id: strokeId });
  }

  undo() {
    return this.client.send({ type: 'undo' });
  }

  redo() {
    return this.client.send({ type: 'redo' });
  }

  get continuationActive(): boolean {
    return this.continuationRunning;
  }

  /** Start autonomous continuation; no-op when already running. */
  startContinuation(stepsPerMessage = 1): void {
    if (this.continuationRunning) return;
    this.continuationRunning = true;
    this.onUpdate('continuation started');
    this.continuationTask = (async () => {
      while (this.continuationRunning) {
        let result: CompleteStepResult;
        try {
          result = await this.completeStep(stepsPerMessage);
        } catch (err) {
          this.onUpdate(`continuation error: ${String(err)}`);
          break;
        }
        if (result.complete) {
          this.onUpdate('continuation complete');
          break;
        }
      }
      this.continuationRunning = false;
    })();
  }

  /** Stop after the in-flight message settles. */
  async stopContinuation(): Promise<void> {
    this.continuationRunning = false;
    if (this.continuationTask) {
      await this.continuationTask;
      this.continuationTask = null;
    }
    this.onUpdate('continuation stopped');
  }
}
