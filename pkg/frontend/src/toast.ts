// Error toasts pinned to the bottom of the screen: one visible toast per
// open event, with Explore / Fix / Ignore actions. Ignore only dismisses
// locally; the event stays open server-side.

import type { DiagnosisPayload } from './types.js';

const SEVERITY_COLORS: Record<string, string> = {
  node_crash: '#c0392b',
  drop: '#d35400',
  delay: '#d4a017',
  corrupt: '#8e44ad',
  log_error: '#7f8c8d',
};

export interface ToastActions {
  onExplore(payload: DiagnosisPayload): void;
  onFix(payload: DiagnosisPayload): void;
}

export class ToastManager {
  private readonly visible = new Map<string, HTMLElement>();

  constructor(
    private readonly container: HTMLElement,
    private readonly actions: ToastActions,
    private readonly autoExpireMs: number = 0,
  ) {}

  show(payload: DiagnosisPayload): void {
    const eventId = payload.event.id;
    if (this.visible.has(eventId)) return; // one toast per open event

    const toast = document.createElement('div');
    toast.className = 'toast';
    toast.dataset.eventId = eventId;
    toast.style.borderLeftColor =
      SEVERITY_COLORS[payload.event.category] ?? '#7f8c8d';

    const text = document.createElement('div');
    text.className = 'toast-text';
    text.textContent = payload.text;
    toast.appendChild(text);

    const buttons = document.createElement('div');
    buttons.className = 'toast-actions';
    buttons.appendChild(this.button('Explore', () => {
      this.actions.onExplore(payload);
      this.dismiss(eventId);
    }));
    const fixButton = this.button('Fix', () => {
      fixButton.disabled = true; // one apply_fix call per click path
      this.actions.onFix(payload);
      this.dismiss(eventId);
    });
    buttons.appendChild(fixButton);
    buttons.appendChild(this.button('Ignore', () => this.dismiss(eventId)));
    toast.appendChild(buttons);

    this.container.appendChild(toast);
    this.visible.set(eventId, toast);
    if (this.autoExpireMs > 0) {
      setTimeout(() => this.dismiss(eventId), this.autoExpireMs);
    }
  }

  dismiss(eventId: string): void {
    this.visible.get(eventId)?.remove();
    this.visible.delete(eventId);
  }

  openCount(): number {
    return this.visible.size;
  }

  private button(label: string, onClick: () => void): HTMLButtonElement {
    const btn = document.createElement('button');
    btn.textContent = label;
    btn.dataset.action = label.toLowerCase();
    btn.addEventListener('click', onClick);
    return btn;
  }
}
