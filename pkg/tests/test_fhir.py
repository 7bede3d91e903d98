import datetime as dt

import pytest

from clinrag.fhir import (
    AuthCodeInteraction,
    AuthorizationError,
    FhirClient,
    OAuthError,
    PatientNotFoundError,
    RetrievalPolicy,
    SmartConfig,
    SmartToken,
    acquire_token,
    assemble_bundle,
    discover_smart_endpoints,
)
from clinrag.mockfhir import (
    MockFhirServer,
    make_condition,
    make_medication_request,
    make_observation,
    make_patient,
)

NOW = dt.datetime(2024, 6, 1, tzinfo=dt.timezone.utc)


def static_config(base_url, token="secret-token-123"):
    return SmartConfig(fhir_base_url=base_url, auth_mode="static_bearer", static_token=token)


class TestAcquireToken:
    def test_static_bearer_passthrough(self):
        token = acquire_token(static_config("http://example.invalid", token="t0"))
        assert token.access_token == "t0"
        assert not token.is_expired()

    def test_client_credentials_against_mock(self):
        with MockFhirServer() as mock:
            cfg = SmartConfig(
                fhir_base_url=mock.base_url,
                auth_mode="client_credentials",
                client_id="svc",
                client_secret="hunter2",
            )
            token = acquire_token(cfg, now=1000.0)
            assert token.access_token == "mock-access-token"
            assert token.expires_at == 1000.0 + 3600
            assert "patient/*.read" in token.scopes

    def test_invalid_client_carries_oauth_code(self):
        with MockFhirServer(token_error="invalid_client") as mock:
            cfg = SmartConfig(
                fhir_base_url=mock.base_url,
                auth_mode="client_credentials",
                client_id="svc",
            )
            with pytest.raises(OAuthError) as excinfo:
                acquire_token(cfg)
            assert excinfo.value.code == "invalid_client"

    def test_authorization_code_with_pkce(self):
        with MockFhirServer() as mock:
            cfg = SmartConfig(
                fhir_base_url=mock.base_url,
                auth_mode="authorization_code_pkce",
                client_id="ui",
            )
            mock.issued_codes["code-1"] = ""  # challenge check skipped by mock
            token = acquire_token(
                cfg,
                interaction=AuthCodeInteraction(
                    code="code-1", code_verifier="v" * 43, redirect_uri="http://app/cb"
                ),
            )
            assert token.access_token == "mock-access-token"

    def test_missing_interaction_rejected(self):
        cfg = SmartConfig(
            fhir_base_url="http://example.invalid",
            auth_mode="authorization_code_pkce",
            client_id="ui",
            token_url="http://example.invalid/token",
        )
        with pytest.raises(ValueError):
            acquire_token(cfg)

    def test_discovery_document(self):
        with MockFhirServer() as mock:
            endpoints = discover_smart_endpoints(mock.base_url)
            assert endpoints["token_endpoint"] == f"{mock.base_url}/token"
            assert endpoints["authorization_endpoint"] == f"{mock.base_url}/authorize"

    def test_token_expiry_slack(self):
        token = SmartToken(access_token="t", expires_at=1000.0)
        assert not token.is_expired(now=900.0)
        assert token.is_expired(now=971.0)

    def test_token_repr_never_shows_secret(self):
        token = SmartToken(access_token="super-secret-token")
        assert "super-secret-token" not in repr(token)
        assert "super-secret-token" not in str(token)


class TestTokenLifecycle:
    def client_credentials(self, base_url):
        return SmartConfig(
            fhir_base_url=base_url,
            auth_mode="client_credentials",
            client_id="svc",
            client_secret="hunter2",
        )

    def test_token_cached_while_valid(self):
        with MockFhirServer(expires_in=3600) as mock:
            client = FhirClient(self.client_credentials(mock.base_url))
            first = client.token(now=1000.0)
            second = client.token(now=1000.0 + 60)
            assert first is second
            grants = [r["form"]["grant_type"][0] for r in mock.requests if r["path"] == "/token"]
            assert grants == ["client_credentials"]

    def test_expired_token_refreshed_transparently(self):
        with MockFhirServer(expires_in=3600, refresh_token="refresh-1") as mock:
            client = FhirClient(self.client_credentials(mock.base_url))
            client.token(now=1000.0)
            renewed = client.token(now=1000.0 + 3600)
            assert not renewed.is_expired(now=1000.0 + 3600)
            grants = [r["form"]["grant_type"][0] for r in mock.requests if r["path"] == "/token"]
            assert grants == ["client_credentials", "refresh_token"]

    def test_expired_token_reacquired_without_refresh_token(self):
        with MockFhirServer(expires_in=3600) as mock:
            client = FhirClient(self.client_credentials(mock.base_url))
            client.token(now=1000.0)
            client.token(now=1000.0 + 3600)
            grants = [r["form"]["grant_type"][0] for r in mock.requests if r["path"] == "/token"]
            assert grants == ["client_credentials", "client_credentials"]


class TestAssembleBundle:
    def test_patient_only(self):
        bundle = assemble_bundle([make_patient("p", "1950-01-01", "male")])
        assert len(bundle.resources) == 1
        assert bundle.as_fhir_json()["type"] == "collection"

    def test_patient_sorted_first(self):
        condition = make_condition("c", "p", "Hypertension", "2020-01-01")
        patient = make_patient("p", "1950-01-01", "male")
        bundle = assemble_bundle([condition, patient])
        assert bundle.resources[0]["resourceType"] == "Patient"

    def test_no_patient_rejected(self):
        with pytest.raises(ValueError):
            assemble_bundle([])

    def test_two_patients_rejected(self):
        with pytest.raises(ValueError):
            assemble_bundle(
                [make_patient("a", "1950-01-01", "male"), make_patient("b", "1950-01-01", "female")]
            )

    def test_groups_sorted_newest_first(self):
        patient = make_patient("p", "1950-01-01", "male")
        old = make_condition("old", "p", "Old", "2018-01-01")
        new = make_condition("new", "p", "New", "2023-01-01")
        bundle = assemble_bundle([patient, old, new])
        assert [r["id"] for r in bundle.by_type("Condition")] == ["new", "old"]


def build_observations(count):
    return [
        make_observation(
            f"obs-{i:03d}", "pat-1", "Heart rate", 60 + i, "bpm",
            (NOW - dt.timedelta(days=i)).strftime("%Y-%m-%dT%H:%M:%SZ"),
        )
        for i in range(count)
    ]


class TestFetchPatientContext:
    def test_patient_plus_condition(self):
        patients = {"pat-1": make_patient("pat-1", "1939-03-01", "female")}
        resources = {"pat-1": [make_condition("c1", "pat-1", "Hypertension", "2020-05-10")]}
        with MockFhirServer(patients=patients, resources=resources) as mock:
            client = FhirClient(static_config(mock.base_url))
            bundle = client.fetch_patient_context("pat-1", now=NOW)
            assert len(bundle.resources) == 2
            assert bundle.resources[0]["resourceType"] == "Patient"
            assert bundle.resources[1]["code"]["text"] == "Hypertension"

    def test_observation_cap_keeps_newest(self):
        patients = {"pat-1": make_patient("pat-1", "1939-03-01", "female")}
        resources = {"pat-1": build_observations(120)}
        with MockFhirServer(patients=patients, resources=resources, page_size=25) as mock:
            client = FhirClient(static_config(mock.base_url))
            bundle = client.fetch_patient_context(
                "pat-1", RetrievalPolicy(max_observations=50), now=NOW
            )
            observations = bundle.by_type("Observation")
            assert len(observations) == 50
            assert observations[0]["id"] == "obs-000"
            # paging was exercised
            observation_searches = [
                r for r in mock.requests if r["path"] == "/Observation"
            ]
            assert len(observation_searches) > 1

    def test_unknown_patient(self):
        with MockFhirServer(patients={}, resources={}) as mock:
            client = FhirClient(static_config(mock.base_url))
            with pytest.raises(PatientNotFoundError):
                client.fetch_patient_context("ghost", now=NOW)

    def test_bad_bearer_is_authorization_error(self):
        patients = {"pat-1": make_patient("pat-1", "1939-03-01", "female")}
        with MockFhirServer(patients=patients, resources={}, require_bearer="expected") as mock:
            client = FhirClient(static_config(mock.base_url, token="wrong"))
            with pytest.raises(AuthorizationError):
                client.fetch_patient_context("pat-1", now=NOW)

    def test_idempotent_up_to_fetched_at(self):
        with MockFhirServer() as mock:
            client = FhirClient(static_config(mock.base_url))
            first = client.fetch_patient_context("pat-1", now=NOW)
            second = client.fetch_patient_context("pat-1", now=NOW)
            assert first.resources == second.resources

    def test_token_absent_from_error_text(self):
        secret = "super-secret-bearer-value"
        with MockFhirServer(patients={}, resources={}) as mock:
            client = FhirClient(static_config(mock.base_url, token=secret))
            with pytest.raises(PatientNotFoundError) as excinfo:
                client.fetch_patient_context("ghost", now=NOW)
            assert secret not in str(excinfo.value)

    def test_resources_reference_patient(self):
        patients = {"pat-1": make_patient("pat-1", "1939-03-01", "female")}
        stray = make_condition("c-other", "someone-else", "Asthma", "2023-01-01")
        mine = make_condition("c-mine", "pat-1", "Hypertension", "2023-01-01")
        with MockFhirServer(patients=patients, resources={"pat-1": [stray, mine]}) as mock:
            client = FhirClient(static_config(mock.base_url))
            bundle = client.fetch_patient_context("pat-1", now=NOW)
            assert [c["id"] for c in bundle.by_type("Condition")] == ["c-mine"]
            assert any("c-other" in w for w in bundle.warnings)


class TestRetrievalPolicy:
    def test_inactive_conditions_filtered(self):
        patients = {"p": make_patient("p", "1950-01-01", "male")}
        resources = {
            "p": [
                make_condition("keep", "p", "Hypertension", "2020-01-01", status="active"),
                make_condition("drop", "p", "Old fracture", "2010-01-01", status="resolved"),
            ]
        }
        with MockFhirServer(patients=patients, resources=resources) as mock:
            bundle = FhirClient(static_config(mock.base_url)).fetch_patient_context("p", now=NOW)
            assert [c["id"] for c in bundle.by_type("Condition")] == ["keep"]

    def test_completed_medication_kept_only_within_window(self):
        patients = {"p": make_patient("p", "1950-01-01", "male")}
        recent = (NOW - dt.timedelta(days=30)).strftime("%Y-%m-%d")
        ancient = "2015-01-01"
        resources = {
            "p": [
                make_medication_request("m-active", "p", "Lisinopril", ancient, status="active"),
                make_medication_request("m-recent", "p", "Amoxicillin", recent, status="completed"),
                make_medication_request("m-old", "p", "Warfarin", ancient, status="completed"),
                make_medication_request("m-stopped", "p", "Statin", recent, status="stopped"),
            ]
        }
        with MockFhirServer(patients=patients, resources=resources) as mock:
            bundle = FhirClient(static_config(mock.base_url)).fetch_patient_context("p", now=NOW)
            kept = {m["id"] for m in bundle.by_type("MedicationRequest")}
            assert kept == {"m-active", "m-recent"}

    def test_observations_outside_lookback_dropped(self):
        patients = {"p": make_patient("p", "1950-01-01", "male")}
        resources = {
            "p": [
                make_observation("recent", "p", "HR", 70, "bpm", "2024-05-01T00:00:00Z"),
                make_observation("stale", "p", "HR", 80, "bpm", "2022-01-01T00:00:00Z"),
            ]
        }
        with MockFhirServer(patients=patients, resources=resources) as mock:
            bundle = FhirClient(static_config(mock.base_url)).fetch_patient_context("p", now=NOW)
            assert [o["id"] for o in bundle.by_type("Observation")] == ["recent"]

    def test_max_observations_validated(self):
        with pytest.raises(ValueError):
            RetrievalPolicy(max_observations=0)
