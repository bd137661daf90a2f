// Session service client: REST calls plus the resumable event stream.

import { SessionEvent } from './types.js';

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface SeqStorage {
  load(sessionId: string): number;
  save(sessionId: string, seq: number): void;
}

/** Keeps the last-seen seq so reconnects resume where they left off. */
export class MemorySeqStorage implements SeqStorage {
  private seqs = new Map<string, number>();
  load(sessionId: string): number {
    return this.seqs.get(sessionId) ?? 0;
  }
  save(sessionId: string, seq: number): void {
    this.seqs.set(sessionId, seq);
  }
}

/** Incremental server-sent-events parser; chunk boundaries fall anywhere. */
export class SseParser {
  private buffer = '';

  push(chunk: string): SessionEvent[] {
    this.buffer += chunk;
    const events: SessionEvent[] = [];
    let boundary: number;
    while ((boundary = this.buffer.indexOf('\n\n')) !== -1) {
      const block = this.buffer.slice(0, boundary);
      this.buffer = this.buffer.slice(boundary + 2);
      for (const line of block.split('\n')) {
        if (line.startsWith('data: ')) {
          try {
            events.push(JSON.parse(line.slice('data: '.length)) as SessionEvent);
          } catch {
            // tolerate malformed frames; the view renders raw entries anyway
          }
        }
      }
    }
    return events;
  }
}

export interface StreamHandle {
  stop(): void;
  done: Promise<void>;
}

export class SessionClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = fetch,
    private storage: SeqStorage = new MemorySeqStorage(),
  ) {}

  private async post(path: string, body?: unknown): Promise<{ events: SessionEvent[] }> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      throw new Error(`POST ${path} failed: ${response.status}`);
    }
    return (await response.json()) as { events: SessionEvent[] };
  }

  async createSession(config: Record<string, unknown>): Promise<string> {
    const response = await this.fetchImpl(`${this.baseUrl}/sessions`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(config),
    });
    if (!response.ok) throw new Error(`create session failed: ${response.status}`);
    const body = (await response.json()) as { session_id: string };
    return body.session_id;
  }

  postFrame(sessionId: string, frame: Record<string, unknown>) {
    return this.post(`/sessions/${sessionId}/frames`, frame);
  }

  postAnswer(sessionId: string, step: number) {
    return this.post(`/sessions/${sessionId}/answer`, { step });
  }

  postQuery(sessionId: string, question: string) {
    return this.post(`/sessions/${sessionId}/query`, { question });
  }

  close(sessionId: string) {
    return this.post(`/sessions/${sessionId}/close`);
  }

  async getLog(sessionId: string): Promise<unknown> {
    const response = await this.fetchImpl(`${this.baseUrl}/sessions/${sessionId}/log`);
    if (!response.ok) throw new Error(`get log failed: ${response.status}`);
    return response.json();
  }

  /**
   * Consume the event stream, resuming from the last persisted seq.
   * Reconnects with ?from=<last-seen> until the session closes or stop()
   * is called.
   */
  streamEvents(
    sessionId: string,
    onEvents: (events: SessionEvent[]) => void,
    options: { onConnected?: (up: boolean) => void; retryDelayMs?: number } = {},
  ): StreamHandle {
    let stopped = false;
    const retryDelay = options.retryDelayMs ?? 1000;

    const run = async () => {
      while (!stopped) {
        const from = this.storage.load(sessionId);
        let sawClose = false;
        try {
          const response = await this.fetchImpl(
            `${this.baseUrl}/sessions/${sessionId}/events?from=${from}`,
          );
          if (!response.ok || !response.body) {
            throw new Error(`stream failed: ${response.status}`);
          }
          options.onConnected?.(true);
          const reader = response.body.getReader();
          const decoder = new TextDecoder();
          const parser = new SseParser();
          while (!stopped) {
            const { done, value } = await reader.read();
            if (done) break;
            const events = parser.push(decoder.decode(value, { stream: true }));
            if (events.length) {
              this.storage.save(sessionId, events[events.length - 1].seq);
              sawClose = sawClose || events.some((e) => e.kind === 'SessionClosed');
              onEvents(events);
            }
          }
        } catch {
          // fall through to reconnect
        }
        options.onConnected?.(false);
        if (stopped || sawClose) return;
        await new Promise((resolve) => setTimeout(resolve, retryDelay));
      }
    };

    const done = run();
    return {
      stop() {
        stopped = true;
      },
      done,
    };
  }
}
