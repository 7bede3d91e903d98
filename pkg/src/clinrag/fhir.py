"""SMART-on-FHIR client: token acquisition, patient context retrieval, and
bundle assembly.

Supports three auth modes (authorization code with PKCE, client credentials,
static bearer) against any R4 server that publishes the standard discovery
document. Access tokens are kept out of logs, reprs and error messages.
"""

from __future__ import annotations

import datetime as dt
import time
from dataclasses import dataclass, field
from typing import Sequence

import httpx

from . import fhir_dates

EXPIRY_SLACK_SECONDS = 30

CONDITION_ACTIVE_STATUSES = ("active", "recurrence", "relapse")
MEDICATION_ACTIVE_STATUSES = ("active", "intended")
MEDICATION_RESOURCE_TYPES = ("MedicationRequest", "MedicationStatement")


class FhirError(Exception):
    """Base class for FHIR gateway failures."""


class DiscoveryError(FhirError):
    """The server's SMART discovery document could not be fetched."""


class OAuthError(FhirError):
    """Token endpoint rejected the request; ``code`` is the OAuth error code."""

    def __init__(self, code: str, description: str = ""):
        super().__init__(f"{code}: {description}" if description else code)
        self.code = code


class AuthorizationError(FhirError):
    """The FHIR server returned 401/403 for a resource request."""


class PatientNotFoundError(FhirError):
    """The requested patient does not exist on the server."""


@dataclass
class SmartConfig:
    fhir_base_url: str
    auth_mode: str = "static_bearer"  # authorization_code_pkce | client_credentials | static_bearer
    client_id: str = ""
    client_secret: str | None = None
    scopes: tuple[str, ...] = ("patient/*.read",)
    token_url: str | None = None
    authorize_url: str | None = None
    static_token: str | None = None
    timeout: float = 30.0

    def __post_init__(self):
        modes = ("authorization_code_pkce", "client_credentials", "static_bearer")
        if self.auth_mode not in modes:
            raise ValueError(f"auth_mode must be one of {modes}")
        if self.auth_mode == "static_bearer" and not self.static_token:
            raise ValueError("static_bearer mode requires a token string")


@dataclass(frozen=True, repr=False)
class SmartToken:
    access_token: str
    token_type: str = "Bearer"
    expires_at: float | None = None  # epoch seconds; None means never expires
    refresh_token: str | None = None
    scopes: tuple[str, ...] = ()

    def __repr__(self) -> str:  # never leak the token value
        return (
            f"SmartToken(token_type={self.token_type!r}, "
            f"expires_at={self.expires_at}, scopes={self.scopes})"
        )

    def is_expired(self, now: float | None = None) -> bool:
        if self.expires_at is None:
            return False
        now = time.time() if now is None else now
        return now >= self.expires_at - EXPIRY_SLACK_SECONDS


@dataclass(frozen=True)
class AuthCodeInteraction:
    """Artifacts the UI collects during the authorization-code redirect."""

    code: str
    code_verifier: str
    redirect_uri: str


@dataclass
class RetrievalPolicy:
    max_observations: int = 50
    condition_statuses: tuple[str, ...] = CONDITION_ACTIVE_STATUSES
    medication_statuses: tuple[str, ...] = MEDICATION_ACTIVE_STATUSES
    lookback_days: int = 365

    def __post_init__(self):
        if self.max_observations < 1:
            raise ValueError("max_observations must be >= 1")


@dataclass
class PatientBundle:
    resources: list[dict]
    fetched_at: str
    warnings: list[str] = field(default_factory=list)
    bundle_type: str = "collection"

    @property
    def patient(self) -> dict:
        return next(r for r in self.resources if r.get("resourceType") == "Patient")

    def by_type(self, resource_type: str) -> list[dict]:
        return [r for r in self.resources if r.get("resourceType") == resource_type]

    def as_fhir_json(self) -> dict:
        return {
            "resourceType": "Bundle",
            "type": self.bundle_type,
            "entry": [{"resource": resource} for resource in self.resources],
        }

    @classmethod
    def from_fhir_json(cls, bundle_json: dict, fetched_at: str | None = None) -> "PatientBundle":
        resources = [
            entry["resource"]
            for entry in bundle_json.get("entry", [])
            if isinstance(entry, dict) and isinstance(entry.get("resource"), dict)
        ]
        return assemble_bundle(resources, fetched_at=fetched_at)


def discover_smart_endpoints(fhir_base_url: str, http: httpx.Client | None = None) -> dict:
    """Fetch ``/.well-known/smart-configuration`` from the FHIR base URL."""
    url = fhir_base_url.rstrip("/") + "/.well-known/smart-configuration"
    client = http or httpx.Client(timeout=30.0)
    try:
        response = client.get(url)
    except httpx.HTTPError as exc:
        raise DiscoveryError(f"SMART discovery failed for {url}: {exc}") from exc
    if response.status_code != 200:
        raise DiscoveryError(f"SMART discovery failed for {url}: HTTP {response.status_code}")
    try:
        return response.json()
    except ValueError as exc:
        raise DiscoveryError(f"SMART discovery document is not JSON: {exc}") from exc


def _token_request(
    token_url: str,
    form: dict,
    timeout: float,
    http: httpx.Client | None,
    now: float,
) -> SmartToken:
    client = http or httpx.Client(timeout=timeout)
    try:
        response = client.post(token_url, data=form)
    except httpx.HTTPError as exc:
        raise OAuthError("request_failed", str(exc)) from exc
    if response.status_code != 200:
        try:
            payload = response.json()
        except ValueError:
            payload = {}
        raise OAuthError(payload.get("error", f"http_{response.status_code}"),
                         payload.get("error_description", ""))
    payload = response.json()
    if "access_token" not in payload:
        raise OAuthError("invalid_token_response", "response carried no access_token")
    expires_in = payload.get("expires_in")
    scopes = tuple(str(payload.get("scope", "")).split()) if payload.get("scope") else ()
    return SmartToken(
        access_token=payload["access_token"],
        token_type=payload.get("token_type", "Bearer"),
        expires_at=(now + float(expires_in)) if expires_in is not None else None,
        refresh_token=payload.get("refresh_token"),
        scopes=scopes,
    )


def _resolve_token_url(cfg: SmartConfig, http: httpx.Client | None) -> str:
    if cfg.token_url:
        return cfg.token_url
    discovery = discover_smart_endpoints(cfg.fhir_base_url, http)
    token_url = discovery.get("token_endpoint")
    if not token_url:
        raise DiscoveryError("discovery document lacks token_endpoint")
    return token_url


def acquire_token(
    cfg: SmartConfig,
    interaction: AuthCodeInteraction | None = None,
    http: httpx.Client | None = None,
    now: float | None = None,
) -> SmartToken:
    """Obtain an access token for the configured auth mode."""
    now = time.time() if now is None else now
    if cfg.auth_mode == "static_bearer":
        return SmartToken(access_token=cfg.static_token or "", expires_at=None,
                          scopes=tuple(cfg.scopes))
    token_url = _resolve_token_url(cfg, http)
    if cfg.auth_mode == "client_credentials":
        form = {
            "grant_type": "client_credentials",
            "scope": " ".join(cfg.scopes),
            "client_id": cfg.client_id,
        }
        if cfg.client_secret:
            form["client_secret"] = cfg.client_secret
        return _token_request(token_url, form, cfg.timeout, http, now)
    if interaction is None:
        raise ValueError("authorization_code_pkce requires the redirect artifacts")
    form = {
        "grant_type": "authorization_code",
        "code": interaction.code,
        "code_verifier": interaction.code_verifier,
        "redirect_uri": interaction.redirect_uri,
        "client_id": cfg.client_id,
    }
    return _token_request(token_url, form, cfg.timeout, http, now)


def refresh_token(
    cfg: SmartConfig,
    token: SmartToken,
    http: httpx.Client | None = None,
    now: float | None = None,
) -> SmartToken:
    if not token.refresh_token:
        raise OAuthError("invalid_grant", "no refresh token available")
    now = time.time() if now is None else now
    form = {
        "grant_type": "refresh_token",
        "refresh_token": token.refresh_token,
        "client_id": cfg.client_id,
    }
    if cfg.client_secret:
        form["client_secret"] = cfg.client_secret
    return _token_request(_resolve_token_url(cfg, http), form, cfg.timeout, http, now)


def resource_date(resource: dict) -> str:
    """Best-effort clinical timestamp for sorting, newest first."""
    rtype = resource.get("resourceType", "")
    if rtype == "Condition":
        keys = ("recordedDate", "onsetDateTime")
    elif rtype == "MedicationRequest":
        keys = ("authoredOn",)
    elif rtype == "MedicationStatement":
        keys = ("effectiveDateTime", "dateAsserted")
    elif rtype == "Observation":
        keys = ("effectiveDateTime", "issued")
    else:
        keys = ()
    for key in keys:
        value = resource.get(key)
        if value:
            return str(value)
    period = resource.get("effectivePeriod")
    if isinstance(period, dict) and period.get("start"):
        return str(period["start"])
    return ""


def _references_patient(resource: dict, patient_id: str) -> bool:
    subject = resource.get("subject") or resource.get("patient") or {}
    reference = subject.get("reference", "") if isinstance(subject, dict) else ""
    return reference.endswith(f"Patient/{patient_id}")


def assemble_bundle(resources: Sequence[dict], fetched_at: str | None = None) -> PatientBundle:
    """Order resources into a collection bundle: Patient first, then
    Conditions, Medications and Observations, each group newest first."""
    patients = [r for r in resources if r.get("resourceType") == "Patient"]
    if len(patients) != 1:
        raise ValueError(f"bundle assembly requires exactly one Patient, got {len(patients)}")
    ordered = list(patients)
    for group in (("Condition",), MEDICATION_RESOURCE_TYPES, ("Observation",)):
        members = [r for r in resources if r.get("resourceType") in group]
        members.sort(key=resource_date, reverse=True)
        ordered.extend(members)
    known = {id(r) for r in ordered}
    ordered.extend(r for r in resources if id(r) not in known)
    return PatientBundle(
        resources=ordered,
        fetched_at=fetched_at or dt.datetime.now(dt.timezone.utc).isoformat(),
    )


class FhirClient:
    """Authenticated FHIR R4 reader with transparent token refresh."""

    def __init__(
        self,
        cfg: SmartConfig,
        http: httpx.Client | None = None,
        interaction: AuthCodeInteraction | None = None,
    ):
        self.cfg = cfg
        self._http = http or httpx.Client(timeout=cfg.timeout)
        self._interaction = interaction
        self._token: SmartToken | None = None

    def token(self, now: float | None = None) -> SmartToken:
        now = time.time() if now is None else now
        if self._token is not None and not self._token.is_expired(now):
            return self._token
        if self._token is not None and self._token.refresh_token:
            try:
                self._token = refresh_token(self.cfg, self._token, self._http, now)
                return self._token
            except OAuthError:
                pass  # fall through to a fresh grant
        self._token = acquire_token(self.cfg, self._interaction, self._http, now)
        return self._token

    def _get(self, url: str, params: dict | None = None) -> httpx.Response:
        headers = {
            "Authorization": f"Bearer {self.token().access_token}",
            "Accept": "application/fhir+json",
        }
        try:
            return self._http.get(url, params=params, headers=headers)
        except httpx.HTTPError as exc:
            raise FhirError(f"request to {url} failed: {exc}") from exc

    def read_patient(self, patient_id: str) -> dict:
        url = f"{self.cfg.fhir_base_url.rstrip('/')}/Patient/{patient_id}"
        response = self._get(url)
        if response.status_code == 404:
            raise PatientNotFoundError(f"patient {patient_id} not found")
        if response.status_code in (401, 403):
            raise AuthorizationError(f"HTTP {response.status_code} reading Patient/{patient_id}")
        if response.status_code != 200:
            raise FhirError(f"HTTP {response.status_code} reading Patient/{patient_id}")
        try:
            return response.json()
        except ValueError as exc:
            raise FhirError(f"Patient/{patient_id} response is not JSON: {exc}") from exc

    def _search_all(
        self,
        resource_type: str,
        params: dict,
        warnings: list[str],
        max_pages: int = 50,
    ) -> list[dict]:
        url = f"{self.cfg.fhir_base_url.rstrip('/')}/{resource_type}"
        resources: list[dict] = []
        for _ in range(max_pages):
            response = self._get(url, params=params)
            params = None  # next-links already carry their query
            if response.status_code in (401, 403):
                raise AuthorizationError(f"HTTP {response.status_code} searching {resource_type}")
            if response.status_code != 200:
                raise FhirError(f"HTTP {response.status_code} searching {resource_type}")
            try:
                bundle = response.json()
            except ValueError as exc:
                raise FhirError(f"{resource_type} search response is not JSON: {exc}") from exc
            for entry in bundle.get("entry", []) or []:
                resource = entry.get("resource") if isinstance(entry, dict) else None
                if isinstance(resource, dict) and resource.get("resourceType"):
                    resources.append(resource)
                else:
                    warnings.append(f"{resource_type} search returned a malformed entry; skipped")
            url = next(
                (
                    link.get("url")
                    for link in bundle.get("link", []) or []
                    if isinstance(link, dict) and link.get("relation") == "next"
                ),
                None,
            )
            if not url:
                break
        return resources

    def fetch_patient_context(
        self,
        patient_id: str,
        policy: RetrievalPolicy | None = None,
        now: dt.datetime | None = None,
    ) -> PatientBundle:
        """Read the patient plus recent conditions, medications and
        observations, filtered by the retrieval policy."""
        policy = policy or RetrievalPolicy()
        now = now or dt.datetime.now(dt.timezone.utc)
        warnings: list[str] = []

        patient = self.read_patient(patient_id)
        conditions = self._search_all("Condition", {"patient": patient_id}, warnings)
        medications = []
        for rtype in MEDICATION_RESOURCE_TYPES:
            medications.extend(self._search_all(rtype, {"patient": patient_id}, warnings))
        observations = self._search_all(
            "Observation",
            {"patient": patient_id, "_sort": "-date", "_count": policy.max_observations},
            warnings,
        )

        keep: list[dict] = []
        for resource in conditions + medications + observations:
            if not _references_patient(resource, patient_id):
                warnings.append(
                    f"{resource.get('resourceType')}/{resource.get('id')} does not reference "
                    f"Patient/{patient_id}; skipped"
                )
                continue
            keep.append(resource)

        filtered = apply_policy(patient, keep, policy, now)
        bundle = assemble_bundle([patient] + filtered, fetched_at=now.isoformat())
        bundle.warnings.extend(warnings)
        return bundle


def _condition_passes(resource: dict, statuses: tuple[str, ...]) -> bool:
    clinical = resource.get("clinicalStatus") or {}
    codes = [
        coding.get("code", "")
        for coding in clinical.get("coding", [])
        if isinstance(coding, dict)
    ]
    return any(code in statuses for code in codes)


def _medication_passes(
    resource: dict,
    statuses: tuple[str, ...],
    window_start: dt.datetime,
) -> bool:
    status = resource.get("status", "")
    if status in statuses:
        return True
    if status == "completed":
        when = fhir_dates.parse(resource_date(resource))
        return when is not None and when >= window_start
    return False


def apply_policy(
    patient: dict,
    resources: list[dict],
    policy: RetrievalPolicy,
    now: dt.datetime,
) -> list[dict]:
    """Filter non-Patient resources per the retrieval policy."""
    window_start = now - dt.timedelta(days=policy.lookback_days)
    kept: list[dict] = []
    observations: list[dict] = []
    for resource in resources:
        rtype = resource.get("resourceType")
        if rtype == "Condition":
            if _condition_passes(resource, policy.condition_statuses):
                kept.append(resource)
        elif rtype in MEDICATION_RESOURCE_TYPES:
            if _medication_passes(resource, policy.medication_statuses, window_start):
                kept.append(resource)
        elif rtype == "Observation":
            when = fhir_dates.parse(resource_date(resource))
            if when is not None and when >= window_start:
                observations.append(resource)
        else:
            kept.append(resource)
    observations.sort(key=resource_date, reverse=True)
    kept.extend(observations[: policy.max_observations])
    return kept
