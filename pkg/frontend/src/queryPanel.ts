// Chat-style query panel grounded in the experiment log.

import { SessionClient } from './client.js';
import { GroundedAnswerData, KIND } from './types.js';

export interface AnswerBubble {
  question: string;
  text: string;
  citations: number[];
  error: boolean;
}

export class QueryPanelController {
  bubbles: AnswerBubble[] = [];

  constructor(
    private client: SessionClient,
    private sessionId: string,
    // citation click scrolls the timeline to the cited record's event
    private scrollToRecord: (recordSeq: number) => void = () => {},
    private onChange: (bubbles: AnswerBubble[]) => void = () => {},
  ) {}

  async ask(question: string): Promise<AnswerBubble> {
    let bubble: AnswerBubble;
    try {
      const { events } = await this.client.postQuery(this.sessionId, question);
      const answered = events.find((e) => e.kind === KIND.queryAnswered);
      const data = (answered?.data ?? { text: 'no answer event received', citations: [] }) as
        unknown as GroundedAnswerData;
      bubble = {
        question,
        text: data.text,
        citations: [...(data.citations ?? [])],
        error: false,
      };
    } catch (error) {
      bubble = {
        question,
        text: `query failed: ${(error as Error).message}`,
        citations: [],
        error: true,
      };
    }
    this.bubbles = [...this.bubbles, bubble];
    this.onChange(this.bubbles);
    return bubble;
  }

  clickCitation(recordSeq: number): void {
    this.scrollToRecord(recordSeq);
  }
}
