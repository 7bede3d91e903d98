"""Retrieval-augmented clinical decision support over guideline text.

The package splits into a pipeline (ingest -> store -> engine), patient
context plumbing (fhir, summarize), model backends, an evaluation toolkit,
and a deployable HTTP service plus CLI.
"""

__version__ = "0.1.0"
