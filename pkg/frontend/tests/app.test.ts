// Console behavior against the recorded envelope stream fixture.

import { beforeEach, describe, expect, it, vi } from 'vitest';

import { ApiClient, ReplaySource } from '../src/api.js';
import { App, bindElements } from '../src/app.js';
import type { Envelope } from '../src/types.js';
import fixture from './fixtures/stream.json';

const envelopes = fixture.envelopes as Envelope[];
const SKELETON = `
  <select id="level-select"><option value="intermediate" selected>i</option></select>
  <button id="start-button">Start</button>
  <span id="status"></span>
  <div id="chat"></div>
  <input id="message-input" type="text">
  <button id="send-button">Send</button>
  <div id="toasts"></div>
`;

interface Harness {
  app: App;
  calls: string[];
}

function mockFetch(calls: string[]): typeof fetch {
  return async (input: RequestInfo | URL): Promise<Response> => {
    const url = String(input);
    calls.push(url);
    let body: unknown = {};
    if (url.endsWith('/sessions')) {
      body = { id: fixture.session_id, level: 'intermediate', created_at: 0, status: 'active' };
    } else if (url.includes('/fix')) {
      body = envelopes.find((e) => e.kind === 'fix_result');
    } else if (url.includes('/messages')) {
      body = envelopes.find((e) => e.kind === 'agent_reply');
    }
    return new Response(JSON.stringify(body), {
      status: url.endsWith('/sessions') ? 201 : 200,
      headers: { 'Content-Type': 'application/json' },
    });
  };
}

async function makeApp(stream: Envelope[] = envelopes): Promise<Harness> {
  document.body.innerHTML = SKELETON;
  const calls: string[] = [];
  vi.stubGlobal('fetch', mockFetch(calls));
  const app = new App(bindElements(document), new ApiClient(''), () => new ReplaySource(stream));
  await app.start();
  return { app, calls };
}

beforeEach(() => {
  vi.unstubAllGlobals();
});

describe('envelope dispatch', () => {
  it('renders a toast within 200ms of a diagnosis envelope', async () => {
    const { app } = await makeApp([]);
    const diagnosis = envelopes.find((e) => e.kind === 'diagnosis')!;
    const started = performance.now();
    app.dispatch(diagnosis);
    const elapsed = performance.now() - started;
    const toast = document.querySelector('.toast') as HTMLElement;
    expect(toast).not.toBeNull();
    expect(toast.dataset.eventId).toBe('evt-1');
    expect(elapsed).toBeLessThan(200);
  });

  it('renders chat bubbles in sequence order', async () => {
    await makeApp();
    const roles = Array.from(document.querySelectorAll('.bubble')).map(
      (b) => (b as HTMLElement).dataset.role,
    );
    // system greeting, agent reply, fix result (diagnosis goes to a toast)
    expect(roles).toEqual(['system', 'agent', 'fix']);
  });

  it('ignores duplicate sequence numbers', async () => {
    const { app } = await makeApp();
    const before = document.querySelectorAll('.bubble').length;
    app.dispatch(envelopes.find((e) => e.kind === 'agent_reply')!);
    expect(document.querySelectorAll('.bubble').length).toBe(before);
  });

  it('one visible toast per open event', async () => {
    const { app } = await makeApp([]);
    const diagnosis = envelopes.find((e) => e.kind === 'diagnosis')!;
    app.dispatch(diagnosis);
    app.dispatch({ ...diagnosis, seq: diagnosis.seq + 100 });
    expect(document.querySelectorAll('.toast').length).toBe(1);
  });
});

describe('toast actions', () => {
  it('Fix click issues exactly one apply_fix call', async () => {
    const { calls } = await makeApp();
    const fixButton = document.querySelector(
      '.toast button[data-action="fix"]',
    ) as HTMLButtonElement;
    fixButton.click();
    fixButton.click(); // double-click guard: button disabled + toast gone
    await Promise.resolve();
    const fixCalls = calls.filter((u) => u.includes('/fix'));
    expect(fixCalls).toHaveLength(1);
    expect(fixCalls[0]).toContain('/sessions/sess-1/events/evt-1/fix');
  });

  it('Explore inserts the diagnosis into the chat thread', async () => {
    await makeApp();
    const explore = document.querySelector(
      '.toast button[data-action="explore"]',
    ) as HTMLButtonElement;
    explore.click();
    const bubbles = Array.from(document.querySelectorAll('.bubble-diagnosis'));
    expect(bubbles).toHaveLength(1);
    expect(bubbles[0].textContent).toContain('lidar_src');
    const input = document.getElementById('message-input') as HTMLInputElement;
    expect(input.value).toContain('node_crash');
  });

  it('Ignore dismisses the toast without any API call', async () => {
    const { calls } = await makeApp();
    const before = calls.length;
    (document.querySelector('.toast button[data-action="ignore"]') as HTMLButtonElement).click();
    expect(document.querySelectorAll('.toast')).toHaveLength(0);
    expect(calls.length).toBe(before);
  });
});

describe('replay determinism', () => {
  it('replaying the fixture reproduces an identical transcript', async () => {
    const first = await makeApp();
    const firstTranscript = first.app.chat.transcriptText();
    const firstToasts = first.app.toasts.openCount();

    const second = await makeApp();
    expect(second.app.chat.transcriptText()).toBe(firstTranscript);
    expect(second.app.toasts.openCount()).toBe(firstToasts);
    expect(firstTranscript.length).toBeGreaterThan(0);
  });
});

describe('local input', () => {
  it('send appends a user bubble and posts the message', async () => {
    const { calls } = await makeApp();
    const input = document.getElementById('message-input') as HTMLInputElement;
    input.value = 'what is the lidar doing?';
    (document.getElementById('send-button') as HTMLButtonElement).click();
    await Promise.resolve();
    const users = Array.from(document.querySelectorAll('.bubble-user'));
    expect(users).toHaveLength(1);
    expect(calls.some((u) => u.includes('/messages'))).toBe(true);
  });
});
