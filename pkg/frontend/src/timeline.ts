// Timeline derivation: a pure function of the event list.

import {
  AlertItem,
  ChipItem,
  KIND,
  RawItem,
  SessionEvent,
  TimelineItem,
  TimelineView,
} from './types.js';

function chipFrom(event: SessionEvent): ChipItem | null {
  const top = event.data['top'] as { step?: number; aggregated_confidence?: number } | null;
  const source = event.data['source'];
  if (
    !top ||
    typeof top.step !== 'number' ||
    typeof top.aggregated_confidence !== 'number' ||
    (source !== 'vote' && source !== 'human')
  ) {
    return null;
  }
  return {
    type: 'chip',
    seq: event.seq,
    step: top.step,
    confidence: top.aggregated_confidence,
    source,
  };
}

function rawFrom(event: SessionEvent): RawItem {
  return { type: 'raw', seq: event.seq, text: JSON.stringify(event) };
}

/**
 * One chip per confirmed step; alerts inline at their seq positions,
 * consecutive alert events merged into a single banner.
 */
export function renderTimeline(events: SessionEvent[]): TimelineView {
  const ordered = [...events].sort((a, b) => a.seq - b.seq);
  const items: TimelineItem[] = [];
  const sparkline: number[] = [];
  const recordAnchors: Record<number, number> = {};
  let openBanner: AlertItem | null = null;
  for (const event of ordered) {
    if (event.kind === KIND.alertRaised) {
      const parameter = event.data['parameter'];
      const message = event.data['message'];
      if (typeof parameter !== 'string' || typeof message !== 'string') {
        items.push(rawFrom(event));
        continue;
      }
      if (!openBanner) {
        openBanner = { type: 'alert', seq: event.seq, parameters: [], messages: [] };
        items.push(openBanner);
      }
      openBanner.parameters.push(parameter);
      openBanner.messages.push(message);
      continue;
    }
    openBanner = null;
    if (event.kind === KIND.stepConfirmed) {
      const chip = chipFrom(event);
      items.push(chip ?? rawFrom(event));
      if (chip) sparkline.push(chip.confidence);
    } else if (event.kind === KIND.logAppended) {
      const seq = event.data['seq'];
      if (typeof seq === 'number') recordAnchors[seq] = event.seq;
    }
  }
  return { items, sparkline, recordAnchors };
}
