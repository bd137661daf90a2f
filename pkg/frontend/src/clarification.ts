// Clarification modal flow: fire-and-confirm.
//
// The modal opens on an unanswered ClarificationRequested and closes only
// when the ClarificationAnswered event arrives from the stream, never on
// the local submit. A failed submit keeps the modal up with a retry
// banner and mutates nothing.

import { SessionClient } from './client.js';
import { ClarificationData, KIND, SessionEvent } from './types.js';

export interface ClarificationState {
  open: boolean;
  query: ClarificationData | null;
  selected: number | null;
  submitting: boolean;
  retryBanner: boolean;
}

export class ClarificationController {
  state: ClarificationState = {
    open: false,
    query: null,
    selected: null,
    submitting: false,
    retryBanner: false,
  };

  constructor(
    private client: SessionClient,
    private sessionId: string,
    private onChange: (state: ClarificationState) => void = () => {},
  ) {}

  private set(partial: Partial<ClarificationState>) {
    this.state = { ...this.state, ...partial };
    this.onChange(this.state);
  }

  handleEvents(events: SessionEvent[]): void {
    for (const event of events) {
      if (event.kind === KIND.clarificationRequested) {
        this.set({
          open: true,
          query: event.data as unknown as ClarificationData,
          selected: null,
          retryBanner: false,
        });
      } else if (event.kind === KIND.clarificationAnswered) {
        // answered (possibly by another client): close without submitting
        this.set({ open: false, query: null, selected: null, retryBanner: false });
      }
    }
  }

  select(step: number): void {
    this.set({ selected: step });
  }

  async submit(): Promise<void> {
    if (!this.state.open || this.state.selected === null || this.state.submitting) return;
    this.set({ submitting: true, retryBanner: false });
    try {
      await this.client.postAnswer(this.sessionId, this.state.selected);
      this.set({ submitting: false });
    } catch {
      this.set({ submitting: false, retryBanner: true });
    }
  }
}
