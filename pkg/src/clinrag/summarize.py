"""Patient bundle interpretation: FHIR JSON in, plain-language summary out.

Two paths produce a MedicalSummary: a deterministic sentence template for
hermetic runs, and a generation backend driven by a fixed prompt.
"""

from __future__ import annotations

import datetime as dt
import json
import logging
from dataclasses import dataclass, field

from .backends import GenerationParams, Generator
from .fhir import PatientBundle, resource_date

logger = logging.getLogger(__name__)

SUMMARY_PROMPT_TEMPLATE = (
    "You are a clinical assistant. Read the following FHIR Bundle JSON and write "
    "a concise plain-language medical summary for a clinician: patient age and "
    "gender, active diagnoses, current medications, and notable recent "
    "observations. Do not include JSON, resource ids, or technical jargon. "
    "Bundle: {bundle_json}"
)

DEFAULT_LLM_SUMMARY_CAP = 2000


@dataclass
class MedicalSummary:
    text: str
    source_resource_ids: list[str] = field(default_factory=list)
    generated_by: str = "template"  # "llm" | "template"
    reference_date: dt.date | None = None


def compute_age(birth_date: dt.date, reference_date: dt.date) -> int:
    """Completed years between the dates; errors if birth_date is later."""
    if birth_date > reference_date:
        raise ValueError(f"birth date {birth_date} is after reference date {reference_date}")
    years = reference_date.year - birth_date.year
    if (reference_date.month, reference_date.day) < (birth_date.month, birth_date.day):
        years -= 1
    return years


def _clean(value) -> str:
    # interpolated values must never reintroduce JSON structure characters
    return str(value).translate(str.maketrans("", "", "{}[]")).strip()


def _display(codeable: dict | None) -> str:
    if not isinstance(codeable, dict):
        return ""
    if codeable.get("text"):
        return _clean(codeable["text"])
    for coding in codeable.get("coding", []):
        if isinstance(coding, dict) and coding.get("display"):
            return _clean(coding["display"])
    return ""


def _observation_value(resource: dict) -> str:
    quantity = resource.get("valueQuantity")
    if isinstance(quantity, dict) and quantity.get("value") is not None:
        unit = quantity.get("unit") or quantity.get("code") or ""
        return _clean(f"{quantity['value']}{unit}")
    for key in ("valueString", "valueInteger", "valueBoolean"):
        if key in resource:
            return _clean(resource[key])
    concept = resource.get("valueCodeableConcept")
    if concept:
        return _display(concept)
    return ""


def summarize_template(bundle: PatientBundle, reference_date: dt.date) -> MedicalSummary:
    """Render the fixed sentence skeleton over the bundle contents."""
    patients = bundle.by_type("Patient")
    if len(patients) != 1:
        raise ValueError(f"bundle must contain exactly one Patient, got {len(patients)}")
    patient = patients[0]
    used_ids: list[str] = [str(patient.get("id", ""))]

    gender = _clean(patient.get("gender") or "unknown")
    birth = patient.get("birthDate")
    if birth:
        age = compute_age(dt.date.fromisoformat(birth), reference_date)
        opening = f"Patient is a {age}-year-old {gender} patient."
    else:
        opening = f"Patient is a {gender} patient of unrecorded age."

    sentences = [opening]

    conditions = sorted(bundle.by_type("Condition"), key=resource_date, reverse=True)
    names = [name for name in (_display(c.get("code")) for c in conditions) if name]
    if names:
        sentences.append("Diagnosed conditions: " + ", ".join(names) + ".")
        used_ids.extend(str(c.get("id", "")) for c in conditions)
    else:
        sentences.append("No recorded conditions.")

    medications = sorted(
        bundle.by_type("MedicationRequest") + bundle.by_type("MedicationStatement"),
        key=resource_date,
        reverse=True,
    )
    names = [name for name in (_display(m.get("medicationCodeableConcept")) for m in medications) if name]
    if names:
        sentences.append("Current medications: " + ", ".join(names) + ".")
        used_ids.extend(str(m.get("id", "")) for m in medications)
    else:
        sentences.append("No recorded medications.")

    observations = sorted(bundle.by_type("Observation"), key=resource_date, reverse=True)
    rendered = []
    for obs in observations:
        name = _display(obs.get("code"))
        if not name:
            continue
        value = _observation_value(obs)
        date = _clean(resource_date(obs)[:10])
        rendered.append(f"{name}: {value} ({date})" if date else f"{name}: {value}")
        used_ids.append(str(obs.get("id", "")))
    if rendered:
        sentences.append("Recent observations: " + "; ".join(rendered) + ".")
    else:
        sentences.append("No recorded observations.")

    return MedicalSummary(
        text=" ".join(sentences),
        source_resource_ids=[i for i in used_ids if i],
        generated_by="template",
        reference_date=reference_date,
    )


def render_summary_prompt(bundle: PatientBundle) -> str:
    return SUMMARY_PROMPT_TEMPLATE.replace(
        "{bundle_json}", json.dumps(bundle.as_fhir_json(), ensure_ascii=False)
    )


def summarize_llm(
    bundle: PatientBundle,
    generator: Generator,
    reference_date: dt.date,
    params: GenerationParams | None = None,
    max_chars: int = DEFAULT_LLM_SUMMARY_CAP,
) -> MedicalSummary:
    """Ask the generation backend for a summary of the bundle JSON."""
    prompt = render_summary_prompt(bundle)
    text = generator.generate(prompt, params).strip()
    if len(text) > max_chars:
        cut = text.rfind(".", 0, max_chars)
        text = text[: cut + 1] if cut > 0 else text[:max_chars]
        logger.warning("summary exceeded %d chars; truncated at a sentence boundary", max_chars)
    return MedicalSummary(
        text=text,
        source_resource_ids=[str(r.get("id", "")) for r in bundle.resources if r.get("id")],
        generated_by="llm",
        reference_date=reference_date,
    )
