/** Browser entry point: handle the SMART redirect round trip, then wire the
 * summary panel, question form and rating widgets. */

import { ServiceClient } from "./api.js";
import { loadConfig } from "./config.js";
import { askAndRender, showSummary } from "./controller.js";
import { beginLaunch, completeLaunch, LaunchDeniedError } from "./smart.js";
import { SessionState } from "./state.js";
import { renderErrorPanel } from "./ui.js";

async function bootstrap(): Promise<void> {
  const config = await loadConfig();
  const state = new SessionState();
  const summaryEl = document.getElementById("summary") as HTMLElement;
  const conversationEl = document.getElementById("conversation") as HTMLElement;
  const form = document.getElementById("ask-form") as HTMLFormElement;
  const input = document.getElementById("question") as HTMLTextAreaElement;

  const client = new ServiceClient(config.serviceBaseUrl, fetch, config.serviceBearerToken);
  const redirectUri = config.redirectUri ?? window.location.origin + window.location.pathname;
  const params = new URLSearchParams(window.location.search);

  try {
    if (params.has("code") || params.has("error")) {
      state.session = await completeLaunch(window.location.href, {
        clientId: config.clientId,
        redirectUri,
        store: window.sessionStorage,
      });
      // drop code/state from the address bar once the exchange is done
      window.history.replaceState({}, "", redirectUri);
    } else if (params.has("iss") || config.fhirBaseUrl) {
      const authorizeUrl = await beginLaunch({
        iss: params.get("iss") ?? config.fhirBaseUrl,
        launch: params.get("launch"),
        clientId: config.clientId,
        scopes: config.scopes,
        redirectUri,
        store: window.sessionStorage,
      });
      window.location.assign(authorizeUrl);
      return;
    }
  } catch (error) {
    const message =
      error instanceof LaunchDeniedError
        ? `Authorization was denied (${error.message}). No patient context is available.`
        : `Launch failed: ${String(error)}`;
    renderErrorPanel(summaryEl, message, () => window.location.assign(redirectUri));
    return;
  }

  if (state.patientId) {
    await showSummary(client, state, summaryEl, state.patientId);
  } else {
    summaryEl.textContent = "No patient context; questions run against the guidelines only.";
  }

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    void askAndRender(client, state, conversationEl, input);
  });
}

void bootstrap();
