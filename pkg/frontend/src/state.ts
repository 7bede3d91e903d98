/** In-memory session state. Tokens are deliberately confined to this module's
 * objects; nothing here is ever serialized to browser storage. */

import type { QueryResponse, SourceRef, SummaryResponse } from "./api.js";
import type { SmartSession } from "./smart.js";

export interface ConversationEntry {
  question: string;
  answer: string;
  sources: SourceRef[];
  promptHash: string;
  rating?: number;
}

export class SessionState {
  session: SmartSession | null = null;
  summary: SummaryResponse | null = null;
  conversation: ConversationEntry[] = [];

  get patientId(): string | null {
    return this.session?.patientId ?? null;
  }

  addAnswer(question: string, response: QueryResponse): ConversationEntry {
    const entry: ConversationEntry = {
      question,
      answer: response.answer,
      sources: response.sources,
      promptHash: response.prompt_hash,
    };
    this.conversation.push(entry);
    return entry;
  }
}
