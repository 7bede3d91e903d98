"""In-process mock FHIR + OAuth server.

Serves canned R4 JSON with SMART discovery, an authorize/token pair and
paged searches, so the gateway and the browser client can be exercised
without a real EHR. Usable as a pytest fixture or standalone via
``python -m clinrag.mockfhir``.
"""

from __future__ import annotations

import argparse
import base64
import hashlib
import json
import threading
import urllib.parse
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

DEFAULT_PATIENT_ID = "pat-1"
SEARCH_TYPES = ("Condition", "MedicationRequest", "MedicationStatement", "Observation")


def make_patient(patient_id: str, birth_date: str, gender: str, name: str = "Test Patient") -> dict:
    given, _, family = name.partition(" ")
    return {
        "resourceType": "Patient",
        "id": patient_id,
        "gender": gender,
        "birthDate": birth_date,
        "name": [{"given": [given], "family": family or given}],
    }


def make_condition(
    cond_id: str,
    patient_id: str,
    display: str,
    recorded: str,
    status: str = "active",
) -> dict:
    return {
        "resourceType": "Condition",
        "id": cond_id,
        "subject": {"reference": f"Patient/{patient_id}"},
        "clinicalStatus": {
            "coding": [
                {
                    "system": "http://terminology.hl7.org/CodeSystem/condition-clinical",
                    "code": status,
                }
            ]
        },
        "code": {"text": display},
        "recordedDate": recorded,
    }


def make_medication_request(
    med_id: str,
    patient_id: str,
    display: str,
    authored: str,
    status: str = "active",
) -> dict:
    return {
        "resourceType": "MedicationRequest",
        "id": med_id,
        "status": status,
        "intent": "order",
        "subject": {"reference": f"Patient/{patient_id}"},
        "medicationCodeableConcept": {"text": display},
        "authoredOn": authored,
    }


def make_observation(
    obs_id: str,
    patient_id: str,
    display: str,
    value: float,
    unit: str,
    effective: str,
) -> dict:
    return {
        "resourceType": "Observation",
        "id": obs_id,
        "status": "final",
        "subject": {"reference": f"Patient/{patient_id}"},
        "code": {"text": display},
        "valueQuantity": {"value": value, "unit": unit},
        "effectiveDateTime": effective,
    }


def default_fixture() -> tuple[dict, dict]:
    """One 1939-born female patient with hypertension, a medication and a
    blood pressure reading."""
    pid = DEFAULT_PATIENT_ID
    patients = {pid: make_patient(pid, "1939-03-01", "female", "Maria Example")}
    resources = {
        pid: [
            make_condition("cond-htn", pid, "Hypertension", "2020-05-10"),
            make_medication_request("med-1", pid, "Lisinopril 10mg", "2024-01-15"),
            make_observation(
                "obs-bp", pid, "Systolic blood pressure", 142, "mmHg", "2024-05-01T09:00:00Z"
            ),
        ]
    }
    return patients, resources


class MockFhirServer:
    """Threaded HTTP server with a tiny OAuth2 endpoint and R4 search paging.

    ``patients`` maps patient id to a Patient resource; ``resources`` maps
    patient id to the other resources returnable by search. ``token_error``
    forces the token endpoint to fail with that OAuth code.
    """

    def __init__(
        self,
        patients: dict | None = None,
        resources: dict | None = None,
        require_bearer: str | None = None,
        token_error: str | None = None,
        access_token: str = "mock-access-token",
        expires_in: int = 3600,
        refresh_token: str | None = None,
        launch_patient: str | None = None,
        page_size: int | None = None,
    ):
        if patients is None and resources is None:
            patients, resources = default_fixture()
        self.patients = patients or {}
        self.resources = resources or {}
        self.require_bearer = require_bearer
        self.token_error = token_error
        self.access_token = access_token
        self.expires_in = expires_in
        self.refresh_token = refresh_token
        self.launch_patient = launch_patient or next(iter(self.patients), DEFAULT_PATIENT_ID)
        self.page_size = page_size
        self.requests: list[dict] = []
        self.issued_codes: dict[str, str] = {}  # code -> code_challenge
        self._server: ThreadingHTTPServer | None = None
        self._thread: threading.Thread | None = None

    @property
    def base_url(self) -> str:
        assert self._server is not None
        host, port = self._server.server_address[:2]
        return f"http://127.0.0.1:{port}"

    def start(self) -> str:
        handler = _make_handler(self)
        self._server = ThreadingHTTPServer(("127.0.0.1", 0), handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self.base_url

    def stop(self) -> None:
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
            self._server = None

    def __enter__(self) -> "MockFhirServer":
        self.start()
        return self

    def __exit__(self, *exc_info) -> None:
        self.stop()


def _make_handler(mock: MockFhirServer):
    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):  # keep test output quiet
            pass

        def _send_json(self, status: int, payload: dict, headers: dict | None = None):
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/fhir+json")
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            for key, value in (headers or {}).items():
                self.send_header(key, value)
            self.end_headers()
            self.wfile.write(body)

        def _record(self, method: str, parsed):
            mock.requests.append(
                {
                    "method": method,
                    "path": parsed.path,
                    "query": urllib.parse.parse_qs(parsed.query),
                    "authorization": self.headers.get("Authorization", ""),
                }
            )

        def _authorized(self) -> bool:
            if mock.require_bearer is None:
                return True
            return self.headers.get("Authorization") == f"Bearer {mock.require_bearer}"

        def do_GET(self):
            parsed = urllib.parse.urlparse(self.path)
            self._record("GET", parsed)
            if parsed.path == "/.well-known/smart-configuration":
                self._send_json(
                    200,
                    {
                        "authorization_endpoint": f"{mock.base_url}/authorize",
                        "token_endpoint": f"{mock.base_url}/token",
                        "capabilities": ["launch-ehr", "client-public", "client-confidential-symmetric"],
                        "code_challenge_methods_supported": ["S256"],
                    },
                )
                return
            if parsed.path == "/authorize":
                self._handle_authorize(parsed)
                return
            if not self._authorized():
                self._send_json(401, _operation_outcome("login", "invalid bearer token"))
                return
            parts = [p for p in parsed.path.split("/") if p]
            if len(parts) == 2 and parts[0] == "Patient":
                patient = mock.patients.get(parts[1])
                if patient is None:
                    self._send_json(404, _operation_outcome("not-found", "unknown patient"))
                else:
                    self._send_json(200, patient)
                return
            if len(parts) == 1 and parts[0] in SEARCH_TYPES:
                self._handle_search(parts[0], parsed)
                return
            self._send_json(404, _operation_outcome("not-found", "no such route"))

        def _handle_authorize(self, parsed):
            query = urllib.parse.parse_qs(parsed.query)
            redirect_uri = query.get("redirect_uri", [""])[0]
            state = query.get("state", [""])[0]
            challenge = query.get("code_challenge", [""])[0]
            code = f"authcode-{len(mock.issued_codes) + 1}"
            mock.issued_codes[code] = challenge
            location = f"{redirect_uri}?code={code}&state={urllib.parse.quote(state)}"
            self.send_response(302)
            self.send_header("Location", location)
            self.send_header("Content-Length", "0")
            self.end_headers()

        def _handle_search(self, resource_type: str, parsed):
            query = urllib.parse.parse_qs(parsed.query)
            patient_id = query.get("patient", [""])[0]
            matches = [
                r
                for r in mock.resources.get(patient_id, [])
                if r.get("resourceType") == resource_type
            ]
            if query.get("_sort", [""])[0] == "-date":
                matches = sorted(
                    matches, key=lambda r: r.get("effectiveDateTime", ""), reverse=True
                )
            count = query.get("_count")
            page_size = mock.page_size or (int(count[0]) if count else len(matches) or 1)
            offset = int(query.get("_offset", ["0"])[0])
            page = matches[offset : offset + page_size]
            bundle = {
                "resourceType": "Bundle",
                "type": "searchset",
                "total": len(matches),
                "entry": [{"resource": r} for r in page],
            }
            if offset + page_size < len(matches):
                next_query = {
                    "patient": patient_id,
                    "_offset": offset + page_size,
                    "_count": page_size,
                }
                if "_sort" in query:
                    next_query["_sort"] = query["_sort"][0]
                bundle["link"] = [
                    {
                        "relation": "next",
                        "url": f"{mock.base_url}/{resource_type}?"
                        + urllib.parse.urlencode(next_query),
                    }
                ]
            self._send_json(200, bundle)

        def do_POST(self):
            parsed = urllib.parse.urlparse(self.path)
            length = int(self.headers.get("Content-Length", "0"))
            form = urllib.parse.parse_qs(self.rfile.read(length).decode("utf-8"))
            self._record("POST", parsed)
            mock.requests[-1]["form"] = form
            if parsed.path != "/token":
                self._send_json(404, _operation_outcome("not-found", "no such route"))
                return
            if mock.token_error:
                self._send_json(401, {"error": mock.token_error})
                return
            grant_type = form.get("grant_type", [""])[0]
            if grant_type == "authorization_code":
                code = form.get("code", [""])[0]
                challenge = mock.issued_codes.get(code)
                if challenge is None:
                    self._send_json(400, {"error": "invalid_grant"})
                    return
                verifier = form.get("code_verifier", [""])[0]
                if challenge and _s256(verifier) != challenge:
                    self._send_json(400, {"error": "invalid_grant"})
                    return
            elif grant_type not in ("client_credentials", "refresh_token"):
                self._send_json(400, {"error": "unsupported_grant_type"})
                return
            payload = {
                "access_token": mock.access_token,
                "token_type": "Bearer",
                "expires_in": mock.expires_in,
                "scope": "patient/*.read",
                "patient": mock.launch_patient,
            }
            if mock.refresh_token:
                payload["refresh_token"] = mock.refresh_token
            self._send_json(200, payload)

        def do_OPTIONS(self):
            self.send_response(204)
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Headers", "Authorization, Content-Type")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.send_header("Content-Length", "0")
            self.end_headers()

    return Handler


def _operation_outcome(code: str, diagnostics: str) -> dict:
    return {
        "resourceType": "OperationOutcome",
        "issue": [{"severity": "error", "code": code, "diagnostics": diagnostics}],
    }


def _s256(verifier: str) -> str:
    digest = hashlib.sha256(verifier.encode("ascii")).digest()
    return base64.urlsafe_b64encode(digest).decode("ascii").rstrip("=")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="Run the mock FHIR + OAuth server")
    parser.add_argument("--port", type=int, default=8642)
    parser.add_argument("--require-bearer", default=None)
    args = parser.parse_args(argv)

    mock = MockFhirServer(require_bearer=args.require_bearer)
    handler = _make_handler(mock)
    mock._server = ThreadingHTTPServer(("127.0.0.1", args.port), handler)
    print(f"mock FHIR server listening on {mock.base_url}")
    try:
        mock._server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        mock._server.server_close()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
