/** SMART on FHIR app launch: discovery, PKCE authorization code flow, and
 * token exchange.
 *
 * Access tokens live only in the returned session object, never in any kind
 * of browser storage. The PKCE verifier and state survive the redirect in an
 * ephemeral store (sessionStorage in the browser) and are removed as soon as
 * the exchange finishes, successfully or not.
 */

export interface SmartSession {
  accessToken: string;
  tokenType: string;
  patientId: string | null;
  scopes: string;
  expiresAt: number | null;
  fhirBaseUrl: string;
}

/** Minimal key-value surface so tests can substitute sessionStorage. */
export interface LaunchStore {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

export class LaunchConfigError extends Error {}

export class LaunchDeniedError extends Error {
  constructor(public oauthError: string, description?: string) {
    super(description ? `${oauthError}: ${description}` : oauthError);
  }
}

const STORE_KEYS = {
  verifier: "smart.pkce_verifier",
  state: "smart.state",
  tokenEndpoint: "smart.token_endpoint",
  iss: "smart.iss",
} as const;

function clearLaunchState(store: LaunchStore): void {
  for (const key of Object.values(STORE_KEYS)) {
    store.removeItem(key);
  }
}

function base64UrlEncode(bytes: Uint8Array): string {
  let binary = "";
  for (const byte of bytes) {
    binary += String.fromCharCode(byte);
  }
  return btoa(binary).replace(/\+/g, "-").replace(/\//g, "_").replace(/=+$/, "");
}

export function generateCodeVerifier(cryptoImpl: Crypto = globalThis.crypto): string {
  const bytes = new Uint8Array(48);
  cryptoImpl.getRandomValues(bytes);
  return base64UrlEncode(bytes);
}

export async function codeChallengeS256(
  verifier: string,
  cryptoImpl: Crypto = globalThis.crypto,
): Promise<string> {
  const digest = await cryptoImpl.subtle.digest(
    "SHA-256",
    new TextEncoder().encode(verifier),
  );
  return base64UrlEncode(new Uint8Array(digest));
}

export interface SmartEndpoints {
  authorizationEndpoint: string;
  tokenEndpoint: string;
}

export async function discoverSmartEndpoints(
  iss: string,
  fetchImpl: typeof fetch = fetch,
): Promise<SmartEndpoints> {
  const url = iss.replace(/\/$/, "") + "/.well-known/smart-configuration";
  let response: Response;
  try {
    response = await fetchImpl(url);
  } catch (error) {
    throw new LaunchConfigError(`SMART discovery failed for ${url}: ${String(error)}`);
  }
  if (!response.ok) {
    throw new LaunchConfigError(`SMART discovery failed for ${url}: HTTP ${response.status}`);
  }
  const data = (await response.json()) as Record<string, string>;
  if (!data.authorization_endpoint || !data.token_endpoint) {
    throw new LaunchConfigError("discovery document lacks authorization/token endpoints");
  }
  return {
    authorizationEndpoint: data.authorization_endpoint,
    tokenEndpoint: data.token_endpoint,
  };
}

export interface BeginLaunchOptions {
  /** FHIR issuer; EHR launch passes it as ?iss=, standalone uses config. */
  iss: string | null | undefined;
  /** Opaque launch context token from the EHR, when present. */
  launch?: string | null;
  clientId: string;
  scopes: string;
  redirectUri: string;
  store: LaunchStore;
  fetchImpl?: typeof fetch;
  cryptoImpl?: Crypto;
}

/** Run discovery, persist the PKCE artifacts, and return the authorize URL
 * the browser should navigate to. */
export async function beginLaunch(options: BeginLaunchOptions): Promise<string> {
  const { iss, launch, clientId, scopes, redirectUri, store } = options;
  if (!iss) {
    throw new LaunchConfigError(
      "no FHIR issuer: launch from an EHR (?iss=...) or configure fhirBaseUrl",
    );
  }
  const fetchImpl = options.fetchImpl ?? fetch;
  const cryptoImpl = options.cryptoImpl ?? globalThis.crypto;

  const endpoints = await discoverSmartEndpoints(iss, fetchImpl);
  const verifier = generateCodeVerifier(cryptoImpl);
  const state = base64UrlEncode(cryptoImpl.getRandomValues(new Uint8Array(16)));

  store.setItem(STORE_KEYS.verifier, verifier);
  store.setItem(STORE_KEYS.state, state);
  store.setItem(STORE_KEYS.tokenEndpoint, endpoints.tokenEndpoint);
  store.setItem(STORE_KEYS.iss, iss);

  const params = new URLSearchParams({
    response_type: "code",
    client_id: clientId,
    redirect_uri: redirectUri,
    scope: scopes,
    state,
    aud: iss,
    code_challenge: await codeChallengeS256(verifier, cryptoImpl),
    code_challenge_method: "S256",
  });
  if (launch) {
    params.set("launch", launch);
  }
  const separator = endpoints.authorizationEndpoint.includes("?") ? "&" : "?";
  return endpoints.authorizationEndpoint + separator + params.toString();
}

export interface CompleteLaunchOptions {
  clientId: string;
  redirectUri: string;
  store: LaunchStore;
  fetchImpl?: typeof fetch;
}

/** Exchange the authorization code in the callback URL for a session.
 * The PKCE artifacts are cleared whatever the outcome. */
export async function completeLaunch(
  callbackUrl: string,
  options: CompleteLaunchOptions,
): Promise<SmartSession> {
  const { clientId, redirectUri, store } = options;
  const fetchImpl = options.fetchImpl ?? fetch;
  const params = new URL(callbackUrl).searchParams;

  try {
    const oauthError = params.get("error");
    if (oauthError) {
      throw new LaunchDeniedError(oauthError, params.get("error_description") ?? undefined);
    }
    const code = params.get("code");
    const state = params.get("state");
    if (!code) {
      throw new LaunchConfigError("callback URL carries no authorization code");
    }
    if (!state || state !== store.getItem(STORE_KEYS.state)) {
      throw new LaunchConfigError("state mismatch on the authorization callback");
    }
    const verifier = store.getItem(STORE_KEYS.verifier);
    const tokenEndpoint = store.getItem(STORE_KEYS.tokenEndpoint);
    const iss = store.getItem(STORE_KEYS.iss);
    if (!verifier || !tokenEndpoint || !iss) {
      throw new LaunchConfigError("no launch in progress");
    }

    const body = new URLSearchParams({
      grant_type: "authorization_code",
      code,
      code_verifier: verifier,
      redirect_uri: redirectUri,
      client_id: clientId,
    });
    const response = await fetchImpl(tokenEndpoint, {
      method: "POST",
      headers: { "Content-Type": "application/x-www-form-urlencoded" },
      body: body.toString(),
    });
    const payload = (await response.json()) as Record<string, unknown>;
    if (!response.ok || typeof payload.access_token !== "string") {
      const code_ = typeof payload.error === "string" ? payload.error : `http_${response.status}`;
      throw new LaunchDeniedError(code_);
    }
    const expiresIn = typeof payload.expires_in === "number" ? payload.expires_in : null;
    return {
      accessToken: payload.access_token,
      tokenType: typeof payload.token_type === "string" ? payload.token_type : "Bearer",
      patientId: typeof payload.patient === "string" ? payload.patient : null,
      scopes: typeof payload.scope === "string" ? payload.scope : "",
      expiresAt: expiresIn === null ? null : Date.now() / 1000 + expiresIn,
      fhirBaseUrl: iss,
    };
  } finally {
    clearLaunchState(store);
  }
}
