/** Orchestration between the service client, session state and the DOM. */

import { ServiceClient } from "./api.js";
import type { SessionState } from "./state.js";
import type { ConversationEntry } from "./state.js";
import {
  markRated,
  renderConversationEntry,
  renderErrorPanel,
  renderSummaryPanel,
  renderToast,
} from "./ui.js";

/** Fetch and render the patient summary; failures render a retry button. */
export async function showSummary(
  client: ServiceClient,
  state: SessionState,
  container: HTMLElement,
  patientId: string,
): Promise<void> {
  try {
    const summary = await client.patientSummary(patientId);
    state.summary = summary;
    renderSummaryPanel(container, summary);
  } catch (error) {
    renderErrorPanel(container, `Could not load the summary: ${String(error)}`, () => {
      void showSummary(client, state, container, patientId);
    });
  }
}

/** Send the question, render the new conversation entry, clear the input.
 * On failure the input keeps its text and an error toast appears. */
export async function askAndRender(
  client: ServiceClient,
  state: SessionState,
  conversationEl: HTMLElement,
  input: HTMLTextAreaElement | HTMLInputElement,
): Promise<ConversationEntry | null> {
  const question = input.value.trim();
  if (!question) {
    return null;
  }
  try {
    const response = await client.query({
      question,
      ...(state.summary ? { summary: state.summary.summary } : {}),
    });
    const entry = state.addAnswer(question, response);
    renderConversationEntry(conversationEl, entry, {
      onRate: (target, score, comment) => {
        void submitRating(client, state, conversationEl, target, score, comment);
      },
    });
    input.value = "";
    return entry;
  } catch (error) {
    renderToast(conversationEl, `Query failed: ${String(error)}`);
    return null;
  }
}

/** Post a 1..5 rating for an answered entry and mark the entry rated.
 * Re-rating posts again; the service keeps the append-only history. */
export async function submitRating(
  client: ServiceClient,
  state: SessionState,
  conversationEl: HTMLElement,
  entry: ConversationEntry,
  score: number,
  comment?: string,
): Promise<boolean> {
  try {
    await client.submitFeedback({
      prompt_hash: entry.promptHash,
      question: entry.question,
      rater_id: state.session?.patientId ? `clinician@${state.session.fhirBaseUrl}` : "clinician",
      score,
      ...(comment ? { comment } : {}),
    });
  } catch (error) {
    renderToast(conversationEl, `Rating failed: ${String(error)}`);
    return false;
  }
  entry.rating = score;
  const entryEl = conversationEl.ownerDocument.getElementById(
    `entry-${entry.promptHash.slice(0, 12)}`,
  );
  if (entryEl) {
    markRated(entryEl as HTMLElement, score);
  }
  return true;
}
