// DOM wiring for the operator console. All behavior lives in the
// controllers and the pure view fold; this file only paints.

import { SessionClient } from './client.js';
import { ClarificationController, ClarificationState } from './clarification.js';
import { AnswerBubble, QueryPanelController } from './queryPanel.js';
import { TimelineItem } from './types.js';
import { ViewState, applyEvents, emptyView, setConnected } from './view.js';

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

function sparklinePoints(values: number[], width: number, height: number): string {
  if (!values.length) return '';
  const step = values.length > 1 ? width / (values.length - 1) : 0;
  return values
    .map((v, i) => `${(i * step).toFixed(1)},${(height - v * height).toFixed(1)}`)
    .join(' ');
}

export class ConsoleApp {
  private view: ViewState;
  private clarification: ClarificationController;
  private queries: QueryPanelController;

  constructor(
    private root: HTMLElement,
    private client: SessionClient,
    sessionId: string,
  ) {
    this.view = emptyView(sessionId);
    this.clarification = new ClarificationController(client, sessionId, () => this.paint());
    this.queries = new QueryPanelController(
      client,
      sessionId,
      (recordSeq) => this.scrollToRecord(recordSeq),
      () => this.paint(),
    );
  }

  start(): void {
    this.client.streamEvents(
      this.view.sessionId,
      (events) => {
        this.view = applyEvents(this.view, events);
        this.clarification.handleEvents(events);
        this.paint();
      },
      {
        onConnected: (up) => {
          this.view = setConnected(this.view, up);
          this.paint();
        },
      },
    );
    this.paint();
  }

  private scrollToRecord(recordSeq: number): void {
    const eventSeq = this.view.timeline.recordAnchors[recordSeq];
    const target = this.root.querySelector(`[data-seq="${eventSeq}"]`);
    target?.scrollIntoView({ behavior: 'smooth', block: 'center' });
  }

  private paintTimelineItem(item: TimelineItem): HTMLElement {
    if (item.type === 'chip') {
      const chip = el('div', `chip chip-${item.source}`);
      chip.dataset.seq = String(item.seq);
      chip.append(
        el('span', 'chip-step', `step ${item.step}`),
        el('span', 'chip-conf', item.confidence.toFixed(2)),
        el('span', 'chip-badge', item.source),
      );
      return chip;
    }
    if (item.type === 'alert') {
      const banner = el('div', 'alert-banner');
      banner.dataset.seq = String(item.seq);
      for (const message of item.messages) {
        banner.append(el('p', 'alert-line', `⚠ ${message}`));
      }
      return banner;
    }
    const raw = el('pre', 'raw-event', item.text);
    raw.dataset.seq = String(item.seq);
    return raw;
  }

  private paintClarification(state: ClarificationState): HTMLElement {
    const modal = el('div', 'modal');
    if (!state.open || !state.query) {
      modal.classList.add('hidden');
      return modal;
    }
    modal.append(el('p', 'modal-question', state.query.question));
    const choices = el('div', 'modal-choices');
    for (const candidate of state.query.candidates) {
      const button = el('button', 'choice', `step ${candidate}`);
      if (state.selected === candidate) button.classList.add('selected');
      button.onclick = () => this.clarification.select(candidate);
      choices.append(button);
    }
    modal.append(choices);
    const submit = el('button', 'submit', state.submitting ? 'sending…' : 'confirm');
    submit.disabled = state.submitting || state.selected === null;
    submit.onclick = () => void this.clarification.submit();
    modal.append(submit);
    if (state.retryBanner) {
      modal.append(el('p', 'retry-banner', 'submit failed, try again'));
    }
    return modal;
  }

  private paintQueryPanel(bubbles: AnswerBubble[]): HTMLElement {
    const panel = el('div', 'query-panel');
    const log = el('div', 'bubbles');
    for (const bubble of bubbles) {
      const entry = el('div', bubble.error ? 'bubble error' : 'bubble');
      entry.append(el('p', 'bubble-q', bubble.question), el('p', 'bubble-a', bubble.text));
      for (const citation of bubble.citations) {
        const chip = el('button', 'citation', `#${citation}`);
        chip.onclick = () => this.queries.clickCitation(citation);
        entry.append(chip);
      }
      log.append(entry);
    }
    panel.append(log);
    const input = el('input');
    input.placeholder = 'ask about the run…';
    const ask = el('button', 'ask', 'ask');
    ask.onclick = () => {
      if (input.value.trim()) void this.queries.ask(input.value.trim());
      input.value = '';
    };
    panel.append(input, ask);
    return panel;
  }

  private paint(): void {
    this.root.replaceChildren();
    const status = el(
      'div',
      this.view.connected ? 'status up' : 'status down',
      `${this.view.sessionId} · ${this.view.connected ? 'live' : 'disconnected'}` +
        (this.view.closed ? ' · closed' : ''),
    );
    const timeline = el('div', 'timeline');
    for (const item of this.view.timeline.items) {
      timeline.append(this.paintTimelineItem(item));
    }
    const spark = document.createElementNS('http://www.w3.org/2000/svg', 'svg');
    spark.setAttribute('class', 'sparkline');
    spark.setAttribute('viewBox', '0 0 120 24');
    const line = document.createElementNS('http://www.w3.org/2000/svg', 'polyline');
    line.setAttribute('points', sparklinePoints(this.view.timeline.sparkline, 120, 24));
    line.setAttribute('fill', 'none');
    line.setAttribute('stroke', 'currentColor');
    spark.append(line);
    this.root.append(
      status,
      spark,
      timeline,
      this.paintClarification(this.clarification.state),
      this.paintQueryPanel(this.queries.bubbles),
    );
  }
}

export function mount(root: HTMLElement, baseUrl: string, sessionId: string): ConsoleApp {
  const app = new ConsoleApp(root, new SessionClient(baseUrl), sessionId);
  app.start();
  return app;
}
