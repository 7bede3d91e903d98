"""Command line surface: ingest, ask, eval, serve."""

from __future__ import annotations

import datetime as dt
import json
import sys
from pathlib import Path

import click

from .config import ConfigError, build_embedder, build_generator, load_config
from .engine import RagConfig, RagQuery, answer_query
from .evaluation.harness import load_dataset, run_eval, write_scored_jsonl
from .evaluation.report import aggregate_report, write_report
from .fhir import FhirClient, PatientBundle
from .ingest import CorpusError, IndexBuildError, IngestConfig, build_index, load_corpus
from .store import StoreFormatError, VectorStore
from .summarize import summarize_template


@click.group()
def main():
    """Guideline-grounded clinical question answering over a local index."""


def _load_cli_config(config_path):
    try:
        return load_config(config_path)
    except ConfigError as exc:
        raise click.ClickException(str(exc))


@main.command()
@click.option("--corpus", "corpus_dir", required=True, type=click.Path(file_okay=False))
@click.option("--index", "index_path", required=True, type=click.Path(file_okay=False))
@click.option("--chunk-size", type=int, default=None, help="Chunk size in characters.")
@click.option("--overlap", type=int, default=None, help="Chunk overlap in characters.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
def ingest(corpus_dir, index_path, chunk_size, overlap, config_path):
    """Chunk and embed a guideline corpus into a fresh index."""
    config = _load_cli_config(config_path)
    cfg = config.ingest
    if chunk_size is not None or overlap is not None:
        cfg = IngestConfig(
            chunk_size=chunk_size if chunk_size is not None else cfg.chunk_size,
            chunk_overlap=overlap if overlap is not None else cfg.chunk_overlap,
            separators=cfg.separators,
        )
    try:
        docs, errors = load_corpus(corpus_dir)
    except CorpusError as exc:
        raise click.ClickException(str(exc))
    for message in errors:
        click.echo(f"warning: {message}", err=True)

    store = VectorStore()
    try:
        manifest = build_index(docs, cfg, build_embedder(config), store)
    except IndexBuildError as exc:
        raise click.ClickException(str(exc))
    store.persist(index_path)
    click.echo(
        f"indexed {manifest.chunk_count} chunks from {len(docs)} documents "
        f"(model={manifest.model_id or 'n/a'}, dim={manifest.dim}, "
        f"corpus_hash={manifest.corpus_hash[:12]}) -> {index_path}"
    )


def _load_store(index_path: str) -> VectorStore:
    try:
        return VectorStore.load(index_path)
    except StoreFormatError as exc:
        raise click.ClickException(str(exc))


@main.command()
@click.option("--index", "index_path", required=True, type=click.Path(file_okay=False))
@click.option("--question", required=True)
@click.option("--patient", "patient_id", default=None, help="Fetch context from the FHIR server.")
@click.option("--bundle", "bundle_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--k", type=int, default=None)
@click.option("--tag", "guideline_tag", default=None, help="Restrict retrieval to one guideline.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
def ask(index_path, question, patient_id, bundle_path, k, guideline_tag, config_path):
    """Answer one clinician question, printing the answer and its sources."""
    config = _load_cli_config(config_path)
    store = _load_store(index_path)
    embedder = build_embedder(config)
    generator = build_generator(config.generator_spec, config.backend)

    summary = None
    reference_date = dt.date.today()
    try:
        if bundle_path:
            bundle = PatientBundle.from_fhir_json(
                json.loads(Path(bundle_path).read_text(encoding="utf-8"))
            )
            summary = summarize_template(bundle, reference_date)
        elif patient_id:
            if config.fhir is None:
                raise click.ClickException("--patient requires FHIR configuration")
            client = FhirClient(config.fhir)
            bundle = client.fetch_patient_context(patient_id)
            summary = summarize_template(bundle, reference_date)

        rag = config.rag if k is None else RagConfig(
            k=k,
            context_delimiters=config.rag.context_delimiters,
            max_context_chars=config.rag.max_context_chars,
        )
        answer = answer_query(
            RagQuery(question=question, summary=summary, guideline_filter=guideline_tag),
            rag,
            embedder,
            store,
            generator,
        )
    except click.ClickException:
        raise
    except Exception as exc:
        raise click.ClickException(str(exc))

    click.echo(answer.answer_text)
    click.echo("")
    click.echo("Sources:")
    if not answer.sources:
        click.echo("  (none)")
    for i, hit in enumerate(answer.sources, start=1):
        click.echo(f"  [{i}] {hit.chunk_id} (score={hit.score:.4f})")


@main.command(name="eval")
@click.option("--index", "index_path", required=True, type=click.Path(file_okay=False))
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--report", "report_dir", required=True, type=click.Path(file_okay=False))
@click.option("--with-judge", is_flag=True, default=False)
@click.option("--with-ragas", is_flag=True, default=False)
@click.option("--system-name", default="rag-pipeline")
@click.option("--reference-date", default=None, help="ISO date used for age computation.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
def eval_command(
    index_path, dataset_path, report_dir, with_judge, with_ragas, system_name,
    reference_date, config_path,
):
    """Run the dataset through the pipeline and write scored output + report."""
    config = _load_cli_config(config_path)
    store = _load_store(index_path)
    embedder = build_embedder(config)
    generator = build_generator(config.generator_spec, config.backend)
    judge_generator = (
        build_generator(config.judge_spec, config.backend) if config.judge_spec else None
    )
    ragas_generator = (
        build_generator(config.ragas_judge_spec, config.backend)
        if config.ragas_judge_spec
        else None
    )

    cases, warnings = load_dataset(dataset_path)
    for message in warnings:
        click.echo(f"warning: {message}", err=True)
    if not cases:
        raise click.ClickException("dataset contains no usable cases")

    scored, run_warnings = run_eval(
        cases,
        embedder=embedder,
        store=store,
        generator=generator,
        rag_config=config.rag,
        with_judge=with_judge,
        with_ragas=with_ragas,
        judge_generator=judge_generator,
        ragas_generator=ragas_generator,
        reference_date=dt.date.fromisoformat(reference_date) if reference_date else None,
    )
    for message in run_warnings:
        click.echo(f"warning: {message}", err=True)
    if not scored:
        raise click.ClickException("no case could be scored")

    out = Path(report_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_scored_jsonl(scored, out / "scored.jsonl")
    report = aggregate_report(scored, system_name=system_name)
    paths = write_report(report, out)
    click.echo(f"scored {len(scored)}/{len(cases)} cases -> {out / 'scored.jsonl'}")
    click.echo(f"report: {paths['json']} / {paths['text']}")
    click.echo(Path(paths["text"]).read_text(encoding="utf-8"))


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
def serve(config_path, host, port):
    """Run the HTTP service."""
    from .service import serve as run_service

    config = _load_cli_config(config_path)
    if host:
        config.host = host
    if port:
        config.port = port
    run_service(config)


if __name__ == "__main__":
    sys.exit(main())
