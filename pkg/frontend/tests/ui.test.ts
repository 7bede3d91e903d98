import { Window } from "happy-dom";
import { describe, expect, it, vi } from "vitest";

import type { SummaryResponse } from "../src/api.js";
import type { ConversationEntry } from "../src/state.js";
import {
  markRated,
  renderConversationEntry,
  renderErrorPanel,
  renderSummaryPanel,
} from "../src/ui.js";

function container(): HTMLElement {
  const window = new Window({ url: "http://localhost/app" });
  const node = window.document.createElement("div");
  window.document.body.appendChild(node);
  return node as unknown as HTMLElement;
}

const TEMPLATE_SUMMARY: SummaryResponse = {
  summary:
    "Patient is a 85-year-old female patient. Diagnosed conditions: Hypertension. "
    + "No recorded medications. No recorded observations.",
  generated_by: "template",
  source_resource_ids: ["pat-1", "cond-1"],
};

function entryWith(sources: number): ConversationEntry {
  return {
    question: "What is first-line therapy?",
    answer: sources ? "Start an ACE inhibitor [1]." : "No excerpts were retrieved.",
    promptHash: "abcdef0123456789",
    sources: Array.from({ length: sources }, (_, i) => ({
      chunk_id: `htn/guide.txt#000${i}`,
      score: 0.9 - i * 0.1,
      text: `excerpt text ${i + 1}`,
      doc_id: "htn/guide.txt",
    })),
  };
}

describe("summary panel", () => {
  it("renders the template summary verbatim with its badge", () => {
    const root = container();
    renderSummaryPanel(root, TEMPLATE_SUMMARY);
    expect(root.querySelector(".summary-text")?.textContent).toContain("85-year-old female");
    expect(root.querySelector(".summary-text")?.textContent).toContain("No recorded medications.");
    expect(root.querySelector(".badge")?.textContent).toBe("template");
  });

  it("error panel offers a retry affordance", () => {
    const root = container();
    const retry = vi.fn();
    renderErrorPanel(root, "HTTP 503", retry);
    const button = root.querySelector(".retry-button") as HTMLButtonElement;
    expect(button).not.toBeNull();
    button.click();
    expect(retry).toHaveBeenCalledTimes(1);
  });
});

describe("conversation entry", () => {
  it("renders one expandable row per source, in order", () => {
    const root = container();
    renderConversationEntry(root, entryWith(3), { onRate: () => {} });
    const rows = root.querySelectorAll("details.excerpt");
    expect(rows).toHaveLength(3);
    expect(rows[2]?.querySelector(".excerpt-text")?.textContent).toBe("excerpt text 3");
  });

  it("empty sources show the no-excerpts notice", () => {
    const root = container();
    renderConversationEntry(root, entryWith(0), { onRate: () => {} });
    expect(root.querySelector(".no-excerpts")?.textContent).toBe(
      "No guideline excerpts retrieved.",
    );
    expect(root.querySelectorAll("details.excerpt")).toHaveLength(0);
  });

  it("rating widget offers exactly the scores 1..5", () => {
    const root = container();
    const onRate = vi.fn();
    renderConversationEntry(root, entryWith(1), { onRate });
    const buttons = [...root.querySelectorAll(".rating-button")];
    expect(buttons.map((b) => b.getAttribute("data-score"))).toEqual(["1", "2", "3", "4", "5"]);
    (buttons[3] as HTMLButtonElement).click();
    expect(onRate).toHaveBeenCalledWith(expect.anything(), 4, undefined);
  });

  it("long comments pass through unclamped", () => {
    const root = container();
    const onRate = vi.fn();
    renderConversationEntry(root, entryWith(1), { onRate });
    const box = root.querySelector(".rating-comment") as HTMLTextAreaElement;
    box.value = "x".repeat(2000);
    (root.querySelector('.rating-button[data-score="5"]') as HTMLButtonElement).click();
    expect(onRate).toHaveBeenCalledWith(expect.anything(), 5, "x".repeat(2000));
  });

  it("markRated adds then replaces the badge", () => {
    const root = container();
    const element = renderConversationEntry(root, entryWith(1), { onRate: () => {} });
    markRated(element, 3);
    expect(element.querySelector(".rated-badge")?.textContent).toBe("rated 3/5");
    markRated(element, 5);
    expect(element.querySelectorAll(".rated-badge")).toHaveLength(1);
    expect(element.querySelector(".rated-badge")?.textContent).toBe("rated 5/5");
  });
});
