// Wire types mirroring the session service JSON bodies field-for-field.

export interface SessionEvent {
  seq: number;
  timestamp: number;
  kind: string;
  data: Record<string, unknown>;
}

export interface ClarificationData {
  frame_index: number;
  last_accepted: number;
  candidates: number[];
  reason: string;
  question: string;
  equipment: string[];
}

export interface GroundedAnswerData {
  text: string;
  citations: number[];
}

export const KIND = {
  sessionStarted: 'SessionStarted',
  frameIngested: 'FrameIngested',
  frameDropped: 'FrameDropped',
  stepConfirmed: 'StepConfirmed',
  clarificationRequested: 'ClarificationRequested',
  clarificationAnswered: 'ClarificationAnswered',
  alertRaised: 'AlertRaised',
  guidanceIssued: 'GuidanceIssued',
  queryAsked: 'QueryAsked',
  queryAnswered: 'QueryAnswered',
  logAppended: 'LogAppended',
  sessionClosed: 'SessionClosed',
} as const;

export interface ChipItem {
  type: 'chip';
  seq: number;
  step: number;
  confidence: number;
  source: 'vote' | 'human';
}

// Consecutive alert events (one confirmation can raise several) group
// into a single banner anchored at the first one's seq.
export interface AlertItem {
  type: 'alert';
  seq: number;
  parameters: string[];
  messages: string[];
}

export interface RawItem {
  type: 'raw';
  seq: number;
  text: string;
}

export type TimelineItem = ChipItem | AlertItem | RawItem;

export interface TimelineView {
  items: TimelineItem[];
  sparkline: number[]; // confidence trace, one point per chip
  // record seq -> event seq of the LogAppended entry, for citation scrolling
  recordAnchors: Record<number, number>;
}
