import { readFileSync } from 'node:fs';
import { describe, expect, it } from 'vitest';

import { MemorySeqStorage, SessionClient, SseParser } from '../src/client.js';
import { ClarificationController } from '../src/clarification.js';
import { QueryPanelController } from '../src/queryPanel.js';
import { SessionEvent } from '../src/types.js';
import { applyEvents, emptyView } from '../src/view.js';
import { MockSessionService } from './mockService.js';

const golden: SessionEvent[] = JSON.parse(
  readFileSync(new URL('./fixtures/rie_golden_events.json', import.meta.url), 'utf-8'),
);

function clientFor(service: MockSessionService, storage = new MemorySeqStorage()) {
  return new SessionClient('http://mock', service.fetch, storage);
}

function collectStream(client: SessionClient, sessionId: string): Promise<SessionEvent[]> {
  return new Promise((resolve, reject) => {
    const seen: SessionEvent[] = [];
    const handle = client.streamEvents(sessionId, (events) => {
      seen.push(...events);
      if (events.some((e) => e.kind === 'SessionClosed')) resolve(seen);
    });
    handle.done.catch(reject);
    setTimeout(() => {
      handle.stop();
      reject(new Error(`stream never closed; saw ${seen.length} events`));
    }, 2000);
  });
}

describe('sse parser', () => {
  it('reassembles events across arbitrary chunk boundaries', () => {
    const text = golden
      .slice(0, 5)
      .map((e) => `id: ${e.seq}\ndata: ${JSON.stringify(e)}\n\n`)
      .join('');
    for (const size of [1, 3, 7, 1000]) {
      const parser = new SseParser();
      const out: SessionEvent[] = [];
      for (let i = 0; i < text.length; i += size) {
        out.push(...parser.push(text.slice(i, i + size)));
      }
      expect(out).toEqual(golden.slice(0, 5));
    }
  });
});

describe('event stream client', () => {
  it('receives the full closed-session stream from the mock service', async () => {
    const service = new MockSessionService('s1');
    service.seed(golden);
    const events = await collectStream(clientFor(service), 's1');
    expect(events).toEqual(golden);
  });

  it('resumes from the persisted seq on reconnect', async () => {
    const service = new MockSessionService('s1');
    service.seed(golden);
    const storage = new MemorySeqStorage();
    storage.save('s1', 40); // pretend we already saw seq <= 40
    const events = await collectStream(clientFor(service, storage), 's1');
    expect(events[0].seq).toBe(41);
    expect(storage.load('s1')).toBe(golden[golden.length - 1].seq);
  });
});

describe('clarification modal', () => {
  const query: SessionEvent = {
    seq: 7,
    timestamp: 0,
    kind: 'ClarificationRequested',
    data: {
      frame_index: 12,
      last_accepted: 3,
      candidates: [3, 4, 5],
      reason: 'IllegalTransition',
      question: 'Which step are you on (3..5)?',
      equipment: ['RF power supply'],
    },
  };

  it('posts the selected step and closes on the answered event', async () => {
    const service = new MockSessionService('s1');
    const controller = new ClarificationController(clientFor(service), 's1');
    controller.handleEvents([query]);
    expect(controller.state.open).toBe(true);
    expect(controller.state.query?.candidates).toEqual([3, 4, 5]);

    controller.select(4);
    await controller.submit();
    expect(service.answers).toEqual([4]);
    // modal stays open until the stream delivers the answered event
    expect(controller.state.open).toBe(true);
    controller.handleEvents([
      { seq: 8, timestamp: 0, kind: 'ClarificationAnswered', data: { step: 4 } },
    ]);
    expect(controller.state.open).toBe(false);
  });

  it('keeps the modal up with a retry banner when the submit fails', async () => {
    const service = new MockSessionService('s1', { failAnswers: 1 });
    const controller = new ClarificationController(clientFor(service), 's1');
    controller.handleEvents([query]);
    controller.select(5);
    await controller.submit();
    expect(controller.state.open).toBe(true);
    expect(controller.state.retryBanner).toBe(true);
    expect(service.answers).toEqual([]);
    await controller.submit(); // retry succeeds
    expect(service.answers).toEqual([5]);
    expect(controller.state.retryBanner).toBe(false);
  });

  it('closes without submitting when another client answers', () => {
    const service = new MockSessionService('s1');
    const controller = new ClarificationController(clientFor(service), 's1');
    controller.handleEvents([query]);
    controller.handleEvents([
      { seq: 8, timestamp: 0, kind: 'ClarificationAnswered', data: { step: 3 } },
    ]);
    expect(controller.state.open).toBe(false);
    expect(service.answers).toEqual([]);
  });
});

describe('query panel', () => {
  it('renders the grounded answer with citation chips', async () => {
    const service = new MockSessionService('s1');
    const scrolled: number[] = [];
    const controller = new QueryPanelController(
      clientFor(service),
      's1',
      (seq) => scrolled.push(seq),
    );
    const bubble = await controller.ask('did I set the time?');
    expect(service.queries).toEqual(['did I set the time?']);
    expect(bubble.text).toContain('30 s');
    expect(bubble.citations).toEqual([1]);
    controller.clickCitation(1);
    expect(scrolled).toEqual([1]);
  });

  it('citation chips resolve to timeline anchors from the fold', () => {
    const view = applyEvents(emptyView('s'), golden);
    const anchor = view.timeline.recordAnchors[1];
    const target = golden.find((e) => e.seq === anchor);
    expect(target?.kind).toBe('LogAppended');
  });

  it('surfaces service errors inline', async () => {
    const service = new MockSessionService('s1');
    const broken = new SessionClient('http://mock', async () => new Response('x', { status: 500 }));
    const controller = new QueryPanelController(broken, 's1');
    const bubble = await controller.ask('anything?');
    expect(bubble.error).toBe(true);
    expect(service.queries).toEqual([]);
  });
});
