// ViewState: a pure fold over the session event stream.
//
// Events may arrive out of order or twice (stream resume); the fold
// re-sorts by seq and drops duplicates, so replaying a recorded stream
// offline reproduces the identical view.

import { renderTimeline } from './timeline.js';
import { ClarificationData, KIND, SessionEvent, TimelineView } from './types.js';

export interface ViewState {
  sessionId: string;
  connected: boolean;
  events: SessionEvent[];
  lastSeq: number;
  pendingClarification: { seq: number; query: ClarificationData } | null;
  timeline: TimelineView;
  closed: boolean;
}

export function emptyView(sessionId: string): ViewState {
  return {
    sessionId,
    connected: false,
    events: [],
    lastSeq: 0,
    pendingClarification: null,
    timeline: renderTimeline([]),
    closed: false,
  };
}

function mergeEvents(current: SessionEvent[], incoming: SessionEvent[]): SessionEvent[] {
  const bySeq = new Map<number, SessionEvent>();
  for (const event of current) bySeq.set(event.seq, event);
  for (const event of incoming) {
    if (!bySeq.has(event.seq)) bySeq.set(event.seq, event);
  }
  return [...bySeq.values()].sort((a, b) => a.seq - b.seq);
}

function derivePending(
  events: SessionEvent[],
): { seq: number; query: ClarificationData } | null {
  let pending: { seq: number; query: ClarificationData } | null = null;
  for (const event of events) {
    if (event.kind === KIND.clarificationRequested) {
      pending = { seq: event.seq, query: event.data as unknown as ClarificationData };
    } else if (event.kind === KIND.clarificationAnswered) {
      pending = null;
    }
  }
  return pending;
}

export function applyEvents(view: ViewState, incoming: SessionEvent[]): ViewState {
  const events = mergeEvents(view.events, incoming);
  return {
    ...view,
    events,
    lastSeq: events.length ? events[events.length - 1].seq : 0,
    pendingClarification: derivePending(events),
    timeline: renderTimeline(events),
    closed: events.some((e) => e.kind === KIND.sessionClosed),
  };
}

export function setConnected(view: ViewState, connected: boolean): ViewState {
  return { ...view, connected };
}
