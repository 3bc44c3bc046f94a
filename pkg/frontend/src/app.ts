// Operator console wiring: expertise selector -> session, envelope stream
// -> chat + toasts, input box -> chat turns, toast actions -> fix/explore.
// The server's envelope sequence is authoritative; nothing renders
// optimistically, so the view is a pure function of (stream, local input).

import { ApiClient } from './api.js';
import { ChatView } from './chat.js';
import { ToastManager } from './toast.js';
import type {
  DiagnosisPayload,
  Envelope,
  EnvelopeSource,
  ExpertiseLevel,
  FixResultPayload,
} from './types.js';

export interface AppElements {
  chat: HTMLElement;
  toasts: HTMLElement;
  input: HTMLInputElement;
  sendButton: HTMLElement;
  levelSelect: HTMLSelectElement;
  startButton: HTMLElement;
  status: HTMLElement;
}

export class App {
  readonly chat: ChatView;
  readonly toasts: ToastManager;
  private sessionId: string | null = null;
  private stream: EnvelopeSource | null = null;
  private lastSeq = 0;

  constructor(
    private readonly elements: AppElements,
    private readonly api: ApiClient,
    private readonly streamFactory: (sessionId: string) => EnvelopeSource,
    toastAutoExpireMs = 0,
  ) {
    this.chat = new ChatView(elements.chat);
    this.toasts = new ToastManager(elements.toasts, {
      onExplore: (payload) => this.explore(payload),
      onFix: (payload) => void this.fix(payload),
    }, toastAutoExpireMs);
    elements.startButton.addEventListener('click', () => void this.start());
    elements.sendButton.addEventListener('click', () => void this.send());
    elements.input.addEventListener('keydown', (ev) => {
      if ((ev as KeyboardEvent).key === 'Enter') void this.send();
    });
  }

  async start(): Promise<void> {
    const level = this.elements.levelSelect.value as ExpertiseLevel;
    const session = await this.api.createSession(level);
    this.sessionId = session.id;
    this.lastSeq = 0;
    this.chat.clear();
    this.setStatus(`session ${session.id} (${session.level})`);
    this.stream?.close();
    this.stream = this.streamFactory(session.id);
    this.stream.subscribe((envelope) => this.dispatch(envelope));
  }

  /** Render one envelope; order and dedupe follow the server sequence. */
  dispatch(envelope: Envelope): void {
    if (envelope.seq <= this.lastSeq) return;
    this.lastSeq = envelope.seq;
    switch (envelope.kind) {
      case 'system':
        this.chat.append('system', String(envelope.payload['text'] ?? ''));
        break;
      case 'agent_reply':
        this.chat.append('agent', String(envelope.payload['text'] ?? ''));
        break;
      case 'diagnosis':
        this.toasts.show(envelope.payload as unknown as DiagnosisPayload);
        break;
      case 'fix_result': {
        const fix = envelope.payload as unknown as FixResultPayload;
        const head = fix.fixed ? 'Fixed' : 'Not fixed';
        this.chat.append('fix', `${head}: ${fix.detail} ${fix.followup}`);
        break;
      }
    }
  }

  async send(): Promise<void> {
    const text = this.elements.input.value.trim();
    if (!text || !this.sessionId) return;
    this.elements.input.value = '';
    this.chat.append('user', text);
    try {
      // The reply renders when its envelope arrives on the stream.
      await this.api.postMessage(this.sessionId, text);
    } catch (err) {
      this.chat.append('system', `send failed: ${(err as Error).message}`);
    }
  }

  explore(payload: DiagnosisPayload): void {
    this.chat.append('diagnosis', payload.text);
    const subject = payload.event.topic || payload.event.suspected_node;
    this.elements.input.value =
      `Tell me more about the ${payload.event.category} on ${subject}`;
  }

  async fix(payload: DiagnosisPayload): Promise<void> {
    if (!this.sessionId) return;
    try {
      await this.api.applyFix(this.sessionId, payload.event.id);
    } catch (err) {
      this.chat.append('system', `fix failed: ${(err as Error).message}`);
    }
  }

  setStatus(text: string): void {
    this.elements.status.textContent = text;
  }
}

export function bindElements(root: Document | HTMLElement): AppElements {
  const get = (id: string) => {
    const el = (root as Document).getElementById
      ? (root as Document).getElementById(id)
      : (root as HTMLElement).querySelector(`#${id}`);
    if (!el) throw new Error(`missing element #${id}`);
    return el as HTMLElement;
  };
  return {
    chat: get('chat'),
    toasts: get('toasts'),
    input: get('message-input') as HTMLInputElement,
    sendButton: get('send-button'),
    levelSelect: get('level-select') as HTMLSelectElement,
    startButton: get('start-button'),
    status: get('status'),
  };
}
