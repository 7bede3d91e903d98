/** DOM rendering for the clinician workspace.
 *
 * Every function works off the container's ownerDocument, so the same code
 * runs in the browser and under a synthetic DOM in tests.
 */

import type { SourceRef, SummaryResponse } from "./api.js";
import type { ConversationEntry } from "./state.js";

function doc(container: HTMLElement): Document {
  return container.ownerDocument;
}

function el<K extends keyof HTMLElementTagNameMap>(
  container: HTMLElement,
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc(container).createElement(tag);
  if (className) {
    node.className = className;
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

export function renderSummaryPanel(
  container: HTMLElement,
  summary: SummaryResponse,
): HTMLElement {
  container.textContent = "";
  const panel = el(container, "section", "summary-panel");
  const heading = el(container, "h2", undefined, "Patient summary");
  heading.appendChild(el(container, "span", `badge badge-${summary.generated_by}`, summary.generated_by));
  panel.appendChild(heading);
  panel.appendChild(el(container, "p", "summary-text", summary.summary));
  container.appendChild(panel);
  return panel;
}

export function renderErrorPanel(
  container: HTMLElement,
  message: string,
  onRetry?: () => void,
): HTMLElement {
  container.textContent = "";
  const panel = el(container, "section", "error-panel");
  panel.appendChild(el(container, "p", "error-text", message));
  if (onRetry) {
    const retry = el(container, "button", "retry-button", "Retry");
    retry.addEventListener("click", onRetry);
    panel.appendChild(retry);
  }
  container.appendChild(panel);
  return panel;
}

export function renderToast(container: HTMLElement, message: string): HTMLElement {
  const toast = el(container, "div", "toast-error", message);
  container.appendChild(toast);
  return toast;
}

/** Replace excerpt citations like [2] in the answer with links to the
 * matching excerpt element. */
function appendAnswerText(
  target: HTMLElement,
  answer: string,
  entryId: string,
  sourceCount: number,
): void {
  const pattern = /\[(\d+)\]/g;
  let cursor = 0;
  for (const match of answer.matchAll(pattern)) {
    const index = Number(match[1]);
    const start = match.index ?? 0;
    target.appendChild(doc(target).createTextNode(answer.slice(cursor, start)));
    if (index >= 1 && index <= sourceCount) {
      const link = el(target, "a", "excerpt-link", match[0]);
      link.setAttribute("href", `#${entryId}-excerpt-${index}`);
      target.appendChild(link);
    } else {
      target.appendChild(doc(target).createTextNode(match[0]));
    }
    cursor = start + match[0].length;
  }
  target.appendChild(doc(target).createTextNode(answer.slice(cursor)));
}

function renderSource(
  container: HTMLElement,
  source: SourceRef,
  index: number,
  entryId: string,
): HTMLElement {
  const details = el(container, "details", "excerpt");
  details.id = `${entryId}-excerpt-${index}`;
  const summaryLine = el(
    container,
    "summary",
    "excerpt-heading",
    `[${index}] ${source.chunk_id} (score ${source.score.toFixed(4)})`,
  );
  details.appendChild(summaryLine);
  details.appendChild(el(container, "p", "excerpt-text", source.text));
  return details;
}

export interface RenderEntryOptions {
  onRate: (entry: ConversationEntry, score: number, comment?: string) => void;
}

export function renderConversationEntry(
  container: HTMLElement,
  entry: ConversationEntry,
  options: RenderEntryOptions,
): HTMLElement {
  const entryId = `entry-${entry.promptHash.slice(0, 12)}`;
  const article = el(container, "article", "entry");
  article.id = entryId;

  article.appendChild(el(container, "p", "question", entry.question));
  const answer = el(container, "div", "answer");
  appendAnswerText(answer, entry.answer, entryId, entry.sources.length);
  article.appendChild(answer);

  if (entry.sources.length === 0) {
    article.appendChild(
      el(container, "p", "no-excerpts", "No guideline excerpts retrieved."),
    );
  } else {
    const list = el(container, "div", "excerpts");
    entry.sources.forEach((source, i) => {
      list.appendChild(renderSource(container, source, i + 1, entryId));
    });
    article.appendChild(list);
  }

  article.appendChild(renderRatingWidget(container, entry, options.onRate));
  container.appendChild(article);
  return article;
}

export function renderRatingWidget(
  container: HTMLElement,
  entry: ConversationEntry,
  onRate: (entry: ConversationEntry, score: number, comment?: string) => void,
): HTMLElement {
  const widget = el(container, "div", "rating");
  widget.appendChild(el(container, "span", "rating-label", "Rate this answer:"));
  for (let score = 1; score <= 5; score += 1) {
    const button = el(container, "button", "rating-button", String(score));
    button.setAttribute("data-score", String(score));
    button.addEventListener("click", () => {
      const comment = comment_box.value.trim() || undefined;
      onRate(entry, score, comment);
    });
    widget.appendChild(button);
  }
  const comment_box = el(container, "textarea", "rating-comment");
  comment_box.setAttribute("placeholder", "Optional comment");
  widget.appendChild(comment_box);
  return widget;
}

export function markRated(entryElement: HTMLElement, score: number): void {
  const existing = entryElement.querySelector(".rated-badge");
  if (existing) {
    existing.textContent = `rated ${score}/5`;
    return;
  }
  const badge = entryElement.ownerDocument.createElement("span");
  badge.className = "rated-badge";
  badge.textContent = `rated ${score}/5`;
  entryElement.querySelector(".rating")?.appendChild(badge);
}
