// Session transcript pane. Purely additive: every bubble comes from an
// envelope or a local user action, in order, so replaying a recorded
// stream reproduces the same transcript.

export type BubbleRole = 'user' | 'agent' | 'system' | 'diagnosis' | 'fix';

export class ChatView {
  constructor(private readonly container: HTMLElement) {}

  append(role: BubbleRole, text: string): void {
    const bubble = document.createElement('div');
    bubble.className = `bubble bubble-${role}`;
    bubble.dataset.role = role;
    bubble.textContent = text;
    this.container.appendChild(bubble);
    this.container.scrollTop = this.container.scrollHeight;
  }

  /** Canonical text form of the transcript, used by replay checks. */
  transcriptText(): string {
    return Array.from(this.container.querySelectorAll('.bubble'))
      .map((b) => `${(b as HTMLElement).dataset.role}: ${b.textContent}`)
      .join('\n');
  }

  clear(): void {
    this.container.textContent = '';
  }
}
