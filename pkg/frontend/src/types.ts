// Wire types mirroring the service's JSON payloads.

export type EnvelopeKind = 'diagnosis' | 'agent_reply' | 'fix_result' | 'system';

export interface Envelope {
  kind: EnvelopeKind;
  payload: Record<string, unknown>;
  seq: number;
}

export interface DiagnosisEventDoc {
  id: string;
  time: number;
  topic: string;
  suspected_node: string;
  category: string;
  evidence: Record<string, unknown>;
  confidence: number;
}

export interface DiagnosisPayload {
  event: DiagnosisEventDoc;
  text: string;
  fix_token: string;
  actions: string[];
}

export interface FixResultPayload {
  event_id: string;
  fixed: boolean;
  detail: string;
  followup: string;
}

export interface ApiSession {
  id: string;
  level: string;
  created_at: number;
  status: string;
}

export type ExpertiseLevel = 'beginner' | 'intermediate' | 'expert';

/** Anything that feeds envelopes to the app: live SSE or a recorded fixture. */
export interface EnvelopeSource {
  subscribe(handler: (envelope: Envelope) => void): void;
  close(): void;
}
