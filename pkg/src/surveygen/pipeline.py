"""Stage implementations: read persisted artifacts, compute, write results.

Every stage writes its outputs at the end (store first, manifest state flips
last, in the session manager) so an interrupted run leaves either the old or
the new generation of each file, never a torn one.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

from . import artifacts
from .arxiv import ArxivClient, ReferenceStub
from .citations import CitationConfig, CitationSet, assign_citations, match_assets
from .clustering import cluster_descriptions, name_clusters
from .compose import assemble_document, cluster_section_indices, compose_survey
from .config import Settings
from .errors import (EmptyDocument, EmptyInput, EmptyScope, LatexToolchainFailed,
                     TooFewReferences)
from .exporter import ExportBundle, render_latex, render_markdown, render_pdf
from .hyde import (generate_description, generate_hyde_queries,
                   retrieve_categorization_context)
from .ingest import build_reference, index_reference, parse_document
from .outline import Outline, build_outline_template, fill_outline
from .search import SearchConfig, TopicSpec, search_references
from .store import VectorStore

EXPORT_FORMATS = ("markdown", "latex", "pdf")


@dataclass
class StageContext:
    session_dir: str
    settings: Settings
    manifest: dict
    chat: object
    embedder: object
    progress: Callable[[float, str], None]
    options: dict = field(default_factory=dict)

    @property
    def topic_title(self) -> str:
        return self.manifest["topic_title"]

    @property
    def criterion(self) -> str:
        return self.manifest["criterion"]


def ensure_store(session_dir: str, embedder, settings: Settings) -> VectorStore:
    store = artifacts.load_store(session_dir)
    if store is not None:
        return store
    dim = getattr(embedder, "dim", 0) or 0
    if not dim:
        dim = len(embedder.embed(["dimension probe"])[0])
    return VectorStore(dim)


def _prune_orphans(store: VectorStore, refs: list[dict]) -> None:
    known = {r["ref_id"] for r in refs}
    for ref_id in store.ref_ids():
        if ref_id not in known:
            store.drop(ref_id)


def _arxiv_client(settings: Settings) -> ArxivClient:
    return ArxivClient(base_url=settings.arxiv_base_url, delay=settings.arxiv_delay)


# -- stages --------------------------------------------------------------------

def stage_search(ctx: StageContext) -> dict:
    settings = ctx.settings
    topic = TopicSpec(title=ctx.topic_title)
    ctx.progress(0.05, "deriving search query")
    outcome = search_references(
        ctx.chat, _arxiv_client(settings), topic,
        SearchConfig(settings.min_ref, settings.max_ref, settings.max_try))

    refs = artifacts.load_references(ctx.session_dir)
    known_arxiv = {r["arxiv_id"] for r in refs if r.get("arxiv_id")}
    store = ensure_store(ctx.session_dir, ctx.embedder, settings)
    added = 0
    for i, stub in enumerate(outcome.stubs):
        if stub.arxiv_id in known_arxiv:
            continue
        ref_id = artifacts.next_ref_id(refs)
        markdown = f"# {stub.title}\n\n## Abstract\n\n{stub.abstract}\n"
        paper = build_reference(ref_id, "arxiv", markdown, [], chat=None, stub=stub)
        index_reference(paper, store, ctx.embedder,
                        settings.chunk_size, settings.chunk_overlap)
        refs.append(artifacts.ref_to_dict(paper, fulltext=False,
                                          pdf_url=stub.pdf_url))
        added += 1
        ctx.progress(0.1 + 0.85 * (i + 1) / max(1, len(outcome.stubs)),
                     f"indexed {ref_id}")
    _prune_orphans(store, refs)
    artifacts.save_store(ctx.session_dir, store)
    artifacts.save_references(ctx.session_dir, refs)
    warnings = []
    if outcome.insufficient:
        warnings.append(f"search stopped below the minimum of "
                        f"{settings.min_ref} references")
    return {"found": len(outcome.stubs), "added": added, "calls": outcome.calls,
            "relax_level": outcome.relax_level, "queries": outcome.queries,
            "insufficient": outcome.insufficient, "warnings": warnings}


def stage_ingest(ctx: StageContext) -> dict:
    settings = ctx.settings
    refs = artifacts.load_references(ctx.session_dir)
    if not refs:
        raise EmptyInput("session has no references; search or upload first")
    store = ensure_store(ctx.session_dir, ctx.embedder, settings)
    assets_dir = os.path.join(ctx.session_dir, artifacts.ASSETS_DIR)
    pending = [r for r in refs if r["source"] == "arxiv" and not r.get("fulltext")]
    client = _arxiv_client(settings) if pending else None
    warnings: list[str] = []
    fetched = 0
    for i, ref in enumerate(pending):
        stub = ReferenceStub(arxiv_id=ref["arxiv_id"], title=ref["title"],
                             abstract=ref["abstract"],
                             authors=tuple(ref.get("authors", "").split(", ")),
                             pdf_url=ref.get("pdf_url", ""), year=ref.get("year", 0))
        try:
            raw = client.download_pdf(stub)
            markdown, found_assets = parse_document(
                raw, f"{ref['ref_id']}.pdf", settings.parser_cmd,
                settings.upload_limit_mb, assets_dir, asset_prefix=ref["ref_id"])
            paper = build_reference(ref["ref_id"], "arxiv", markdown,
                                    found_assets, chat=ctx.chat, stub=stub)
            index_reference(paper, store, ctx.embedder,
                            settings.chunk_size, settings.chunk_overlap)
            ref.update(fulltext=True, asset_count=len(paper.assets),
                       flagged_fields=list(paper.flagged_fields))
            fetched += 1
        except Exception as exc:
            warnings.append(f"{ref['ref_id']}: full text unavailable "
                            f"({type(exc).__name__}: {exc})")
        ctx.progress((i + 1) / len(pending), f"ingested {ref['ref_id']}")
    _prune_orphans(store, refs)
    artifacts.save_store(ctx.session_dir, store)
    artifacts.save_references(ctx.session_dir, refs)
    return {"references": len(refs), "pending": len(pending),
            "fetched": fetched, "warnings": warnings}


def stage_categorize(ctx: StageContext) -> dict:
    settings = ctx.settings
    refs = artifacts.load_references(ctx.session_dir)
    if len(refs) < 2:
        raise TooFewReferences("categorization needs at least 2 references")
    store = artifacts.load_store(ctx.session_dir)
    if store is None:
        raise EmptyInput("no indexed references to categorize")
    ctx.progress(0.02, "generating retrieval passages")
    queries = generate_hyde_queries(ctx.chat, ctx.criterion, settings.n_hyde)
    papers = [artifacts.ref_from_dict(r) for r in refs]

    def describe(paper):
        try:
            context = retrieve_categorization_context(
                paper.ref_id, queries, store, ctx.embedder, settings.top_k_hyde)
        except EmptyScope:
            context = []
        return generate_description(ctx.chat, ctx.embedder, paper, context,
                                    ctx.criterion, settings.description_max_chars)

    descriptions = []
    with ThreadPoolExecutor(max_workers=settings.concurrency_cap) as pool:
        for i, desc in enumerate(pool.map(describe, papers)):
            descriptions.append(desc)
            ctx.progress(0.05 + 0.75 * (i + 1) / len(papers),
                         f"described {desc.ref_id}")
    ctx.progress(0.85, "clustering descriptions")
    model = cluster_descriptions(
        descriptions, settings.candidate_count_list(), reducer=settings.reducer,
        reduced_dim=settings.reduced_dim, coords_backend=settings.coords_backend,
        criterion=ctx.criterion)
    ctx.progress(0.92, "naming clusters")
    model = name_clusters(ctx.chat, model, descriptions)
    artifacts.save_descriptions(ctx.session_dir, ctx.criterion,
                                list(queries.queries), descriptions)
    artifacts.save_clusters(ctx.session_dir, model)
    return {"references": len(refs), "clusters": model.cluster_count,
            "names": list(model.names), "warnings": []}


def stage_outline(ctx: StageContext) -> dict:
    settings = ctx.settings
    model = artifacts.load_clusters(ctx.session_dir)
    if model is None:
        raise EmptyInput("no cluster model; run categorize first")
    descriptions = artifacts.load_descriptions(ctx.session_dir)
    by_ref = {d.ref_id: d.text for d in descriptions}
    by_cluster = {c: [by_ref[r] for r in model.members(c) if r in by_ref]
                  for c in range(model.cluster_count)}
    names = model.names or tuple(f"Cluster {c + 1}"
                                 for c in range(model.cluster_count))
    template = build_outline_template(names, settings.subsection_slots)
    ctx.progress(0.2, "filling outline slots")
    outline = fill_outline(ctx.chat, template, by_cluster)
    artifacts.save_outline(ctx.session_dir, outline)
    return {"entries": len(outline.entries), "warnings": []}


def section_scopes(outline: Outline, model) -> dict[int, list[str]]:
    """Cluster sections claim their member refs: by name first, then position."""
    indices = cluster_section_indices(outline)
    name_to_cluster = {n: c for c, n in enumerate(model.names)}
    assigned: dict[int, int] = {}
    used: set[int] = set()
    for idx in indices:
        c = name_to_cluster.get(outline.entries[idx][1])
        if c is not None and c not in used:
            assigned[idx] = c
            used.add(c)
    remaining = [c for c in range(model.cluster_count) if c not in used]
    for idx in indices:
        if idx not in assigned and remaining:
            assigned[idx] = remaining.pop(0)
    return {idx: sorted(model.members(c)) for idx, c in assigned.items()}


def stage_compose(ctx: StageContext) -> dict:
    settings = ctx.settings
    outline = artifacts.load_outline(ctx.session_dir)
    model = artifacts.load_clusters(ctx.session_dir)
    store = artifacts.load_store(ctx.session_dir)
    if outline is None or model is None or store is None:
        raise EmptyInput("compose needs a finished outline and cluster model")
    prior, prior_versions = artifacts.load_drafts(ctx.session_dir)
    force = bool(ctx.options.get("force"))
    ctx.progress(0.05, "drafting sections")
    drafts = compose_survey(
        ctx.chat, store, ctx.embedder, outline, section_scopes(outline, model),
        topic=ctx.topic_title, top_k=settings.top_k_compose,
        existing=prior, force=force, max_workers=settings.concurrency_cap)
    versions = {idx: prior_versions.get(idx, 1)
                if prior.get(idx) is drafts[idx] else 1 for idx in drafts}
    artifacts.save_drafts(ctx.session_dir, drafts, versions)
    warnings = [f"{drafts[i].title}: {w}"
                for i in sorted(drafts) for w in drafts[i].warnings]
    return {"sections": len(drafts),
            "preserved": sum(1 for i in drafts if prior.get(i) is drafts[i]),
            "warnings": warnings}


def build_export(session_dir: str, settings: Settings, embedder, title: str,
                 fmt: str, disabled_assets=()) -> ExportBundle:
    if fmt not in EXPORT_FORMATS:
        raise ValueError(f"unknown export format {fmt!r}")
    if fmt == "pdf" and not settings.latex_cmd:
        raise LatexToolchainFailed("no LaTeX toolchain command configured")
    outline = artifacts.load_outline(session_dir)
    drafts, _versions = artifacts.load_drafts(session_dir)
    refs = artifacts.load_references(session_dir)
    store = artifacts.load_store(session_dir)
    if outline is None or not drafts or store is None:
        raise EmptyInput("compose must finish before export")
    body = assemble_document(outline, drafts)
    config = CitationConfig(tau_static=settings.tau_static,
                            k_sigma=settings.k_sigma,
                            max_cites_per_sentence=settings.max_cites_per_sentence)
    scope = sorted(r["ref_id"] for r in refs)
    extra_warnings: list[str] = []
    try:
        citation_set = assign_citations(body, store, embedder, config, scope=scope)
    except EmptyDocument:
        citation_set = CitationSet(tau=config.tau_static, assignments=())
        extra_warnings.append("document has no sentences; citations skipped")
    blocked = set(disabled_assets)
    placements = [p for p in match_assets(body, store, embedder,
                                          settings.asset_threshold)
                  if f"{p.ref_id}:{p.asset_index}" not in blocked]
    references = {r["ref_id"]: artifacts.ref_from_dict(r) for r in refs}
    assets_dir = os.path.join(session_dir, artifacts.ASSETS_DIR)
    render_args = (title, outline, body, citation_set, placements, references,
                   store)
    if fmt == "markdown":
        bundle = render_markdown(*render_args, assets_dir=assets_dir,
                                 layout_cmd=settings.layout_cmd)
    elif fmt == "latex":
        bundle = render_latex(*render_args, assets_dir=assets_dir,
                              layout_cmd=settings.layout_cmd)
    else:
        latex = render_latex(*render_args, assets_dir=assets_dir,
                             layout_cmd=settings.layout_cmd)
        bundle = render_pdf(latex, settings.latex_cmd)
    if extra_warnings:
        bundle = replace(bundle, warnings=tuple(extra_warnings) + tuple(bundle.warnings))
    return bundle


def stage_export(ctx: StageContext) -> dict:
    settings = ctx.settings
    formats = ["markdown", "latex"] + (["pdf"] if settings.latex_cmd else [])
    export_dir = os.path.join(ctx.session_dir, artifacts.EXPORT_DIR)
    os.makedirs(export_dir, exist_ok=True)
    disabled = ctx.manifest.get("disabled_assets", [])
    built: list[str] = []
    warnings: list[str] = []
    for i, fmt in enumerate(formats):
        ctx.progress(0.1 + 0.85 * i / len(formats), f"rendering {fmt}")
        try:
            bundle = build_export(ctx.session_dir, settings, ctx.embedder,
                                  ctx.topic_title, fmt, disabled)
        except LatexToolchainFailed as exc:
            warnings.append(f"{fmt} export failed: {exc}")
            continue
        artifacts.write_bytes(os.path.join(export_dir, f"{fmt}.zip"),
                              bundle.to_zip())
        built.append(fmt)
        warnings.extend(f"{fmt}: {w}" for w in bundle.warnings)
    if not built:
        raise LatexToolchainFailed("no export format could be produced: "
                                   + "; ".join(warnings))
    artifacts.write_json(os.path.join(export_dir, "info.json"),
                         {"formats": built, "warnings": warnings})
    return {"formats": built, "warnings": warnings}


STAGE_FUNCTIONS = {
    "search": stage_search,
    "ingest": stage_ingest,
    "categorize": stage_categorize,
    "outline": stage_outline,
    "compose": stage_compose,
    "export": stage_export,
}
