// Browser bootstrap: same-origin API, live SSE stream with resume.

import { ApiClient, SseSource } from './api.js';
import { App, bindElements } from './app.js';

const elements = bindElements(document);
const app = new App(
  elements,
  new ApiClient(''),
  (sessionId) =>
    new SseSource('', sessionId, (state) => {
      app.setStatus(state === 'open' ? 'connected' : 'reconnecting…');
    }),
  15_000, // toasts auto-expire client-side; events stay open server-side
);

app.setStatus('pick an expertise level and press Start');
