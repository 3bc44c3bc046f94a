// HTTP client for the service endpoints plus envelope stream sources.
// The console holds no business logic: every decision round-trips here.

import type { ApiSession, Envelope, EnvelopeSource, ExpertiseLevel } from './types.js';

export class ApiClient {
  constructor(private readonly baseUrl: string = '') {}

  async createSession(level: ExpertiseLevel): Promise<ApiSession> {
    return this.post(`/sessions`, { level });
  }

  async postMessage(sessionId: string, text: string): Promise<Envelope> {
    return this.post(`/sessions/${sessionId}/messages`, { text });
  }

  async applyFix(sessionId: string, eventId: string): Promise<Envelope> {
    return this.post(`/sessions/${sessionId}/events/${eventId}/fix`, {});
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const resp = await fetch(this.baseUrl + path, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body),
    });
    if (!resp.ok) {
      const detail = await resp.text();
      throw new Error(`${resp.status}: ${detail}`);
    }
    return (await resp.json()) as T;
  }
}

/**
 * Server-sent-events source with resume-by-sequence. On connection loss it
 * reconnects with `after_seq` set to the last seen envelope, so the stream
 * never gaps; `onStateChange` lets the UI surface the reconnect state.
 */
export class SseSource implements EnvelopeSource {
  private lastSeq = 0;
  private source: EventSource | null = null;
  private handler: ((envelope: Envelope) => void) | null = null;
  private closed = false;

  constructor(
    private readonly baseUrl: string,
    private readonly sessionId: string,
    private readonly onStateChange?: (state: 'open' | 'reconnecting') => void,
    private readonly retryMs: number = 1000,
  ) {}

  subscribe(handler: (envelope: Envelope) => void): void {
    this.handler = handler;
    this.connect();
  }

  private connect(): void {
    const url =
      `${this.baseUrl}/sessions/${this.sessionId}/events` +
      `?after_seq=${this.lastSeq}&wait=true`;
    this.source = new EventSource(url);
    this.source.onopen = () => this.onStateChange?.('open');
    for (const kind of ['diagnosis', 'agent_reply', 'fix_result', 'system']) {
      this.source.addEventListener(kind, (msg) => {
        const envelope = JSON.parse((msg as MessageEvent).data) as Envelope;
        if (envelope.seq <= this.lastSeq) return; // resume overlap guard
        this.lastSeq = envelope.seq;
        this.handler?.(envelope);
      });
    }
    this.source.onerror = () => {
      this.source?.close();
      if (this.closed) return;
      this.onStateChange?.('reconnecting');
      setTimeout(() => {
        if (!this.closed) this.connect();
      }, this.retryMs);
    };
  }

  close(): void {
    this.closed = true;
    this.source?.close();
  }
}

/** Recorded-stream source for tests and offline replay of a session. */
export class ReplaySource implements EnvelopeSource {
  constructor(private readonly envelopes: Envelope[]) {}

  subscribe(handler: (envelope: Envelope) => void): void {
    for (const envelope of [...this.envelopes].sort((a, b) => a.seq - b.seq)) {
      handler(envelope);
    }
  }

  close(): void {}
}
