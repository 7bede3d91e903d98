/** Static app configuration, loaded from ./config.json next to the page. */

export interface AppConfig {
  /** Base URL of the decision-support service. */
  serviceBaseUrl: string;
  /** OAuth client id registered with the FHIR authorization server. */
  clientId: string;
  /** Space-separated SMART scopes requested at launch. */
  scopes: string;
  /** Redirect URI for the authorization code; defaults to the current page. */
  redirectUri?: string;
  /** Default FHIR issuer for standalone launch (EHR launch passes ?iss=). */
  fhirBaseUrl?: string;
  /** Optional bearer token for the decision-support service itself. */
  serviceBearerToken?: string;
}

export const DEFAULT_CONFIG: AppConfig = {
  serviceBaseUrl: "http://127.0.0.1:8000",
  clientId: "clinrag-ui",
  scopes: "launch launch/patient patient/*.read openid fhirUser",
};

export async function loadConfig(
  fetchImpl: typeof fetch = fetch,
  url = "./config.json",
): Promise<AppConfig> {
  try {
    const response = await fetchImpl(url);
    if (!response.ok) {
      return { ...DEFAULT_CONFIG };
    }
    const data = (await response.json()) as Partial<AppConfig>;
    return { ...DEFAULT_CONFIG, ...data };
  } catch {
    return { ...DEFAULT_CONFIG };
  }
}
