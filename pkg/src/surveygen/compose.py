"""Bottom-up survey composition.

Subsections are drafted first by retrieval-augmented calls scoped to their
cluster's references, then each cluster section gets a summary and a merged
opening paragraph, and finally the predefined sections are written from the
accumulated section summaries. User-edited sections are never regenerated
unless forced.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

from . import providers
from .errors import EmptyScope
from .outline import Outline
from .providers import chat_request
from .store import VectorStore, retrieve
from .textutil import cut_at_sentence_words

SUBSECTION_PROMPT = """You are drafting one subsection of an academic survey on "{topic}".
Section: {section}
Subsection: {title}

Source material quoted from the indexed references:
{blocks}

Write 300-600 words of flowing prose for this subsection, grounded in the
source material above. Do not emit headings or bullet lists; body text only."""

SUM_PROMPT = """Summarize the following survey section material in at most 150 words.
Keep it factual and specific.
---
{body}"""

MERGE_PROMPT = """Combine the following subsection summaries into one coherent opening
paragraph for the survey section "{title}". Do not use headings.
---
{parts}"""

PREDEFINED_INSTRUCTIONS = (
    ("abstract", "Write the abstract of the survey in at most 250 words. "
                 "State the scope, how the literature is organized, and the main findings."),
    ("introduction", "Write the introduction of the survey. Motivate the topic, "
                     "describe how the survey is organized, and preview each section."),
    ("future_directions", "Write the future directions section of the survey. "
                          "Identify open problems and promising lines of work."),
    ("conclusion", "Write the conclusion of the survey. Recapitulate the main "
                   "findings and their significance."),
)

SECTION_PROMPT = """{instruction}

The survey covers the topic "{topic}".

{context}"""

SUMMARY_WORD_LIMIT = 150
ABSTRACT_WORD_LIMIT = 250


@dataclass(frozen=True)
class SectionDraft:
    position: int
    title: str
    body: str = ""
    summary: str = ""
    status: str = "pending"
    warnings: tuple[str, ...] = ()


def strip_heading_lines(text: str) -> str:
    lines = [ln for ln in text.splitlines() if not ln.lstrip().startswith("#")]
    out = "\n".join(lines).strip()
    while "\n\n\n" in out:
        out = out.replace("\n\n\n", "\n\n")
    return out


def cluster_section_indices(outline: Outline) -> list[int]:
    return [i for i, (lvl, title) in enumerate(outline.entries)
            if lvl == 1 and title not in outline.predefined]


def predefined_section_indices(outline: Outline) -> dict[str, int]:
    """Map role -> entry index, via the outline's current predefined titles."""
    roles = {}
    for (role, _), title in zip(PREDEFINED_INSTRUCTIONS, outline.predefined):
        for i, (lvl, t) in enumerate(outline.entries):
            if lvl == 1 and t == title:
                roles[role] = i
                break
    return roles


def section_children(outline: Outline, section_index: int) -> list[tuple[int, int, str]]:
    out = []
    for j in range(section_index + 1, len(outline.entries)):
        lvl, title = outline.entries[j]
        if lvl == 1:
            break
        out.append((j, lvl, title))
    return out


def _context_blocks(hits) -> str:
    return "\n".join(f"<<<chunk {rec.ref_id}:{rec.chunk_index}>>>\n{rec.text}<<<end>>>"
                     for rec, _score in hits)


def generate_subsection(chat, store: VectorStore, embedder, title: str,
                        scope, top_k: int = 8, section: str = "",
                        topic: str = "") -> str:
    hits = retrieve(store, embedder, title, top_k, scope=list(scope))
    reply = chat.complete(chat_request(
        SUBSECTION_PROMPT.format(topic=topic or "the survey topic",
                                 section=section or title, title=title,
                                 blocks=_context_blocks(hits)),
        providers.PURPOSE_SUBSECTION))
    return strip_heading_lines(reply)


def compose_cluster_section(chat, store, embedder, outline: Outline,
                            section_index: int, scope, *, topic: str = "",
                            top_k: int = 8, subsection_texts=None) -> SectionDraft:
    title = outline.entries[section_index][1]
    children = section_children(outline, section_index)
    warnings: list[str] = []
    parts: list[tuple[int, int, str, str]] = []
    for j, lvl, sub_title in children:
        if subsection_texts is not None and j in subsection_texts:
            text = subsection_texts[j]
        else:
            text = _subsection_or_warning(chat, store, embedder, sub_title,
                                          scope, top_k, title, topic, warnings)
        parts.append((j, lvl, sub_title, text))
    if not children:
        body_text = _subsection_or_warning(chat, store, embedder, title, scope,
                                           top_k, title, topic, warnings)
        parts = [(section_index, 0, "", body_text)]
    joined = "\n\n".join(text for *_ignored, text in parts if text)
    summary = ""
    lead = ""
    if joined:
        summary = cut_at_sentence_words(
            chat.complete(chat_request(SUM_PROMPT.format(body=joined),
                                       providers.PURPOSE_SUMMARY)).strip(),
            SUMMARY_WORD_LIMIT)
        lead = strip_heading_lines(chat.complete(chat_request(
            MERGE_PROMPT.format(title=title, parts=joined),
            providers.PURPOSE_MERGE)))
    pieces = [lead] if lead else []
    for j, lvl, sub_title, text in parts:
        if lvl:
            heading = "#" * lvl + " " + sub_title
            pieces.append(f"{heading}\n\n{text}" if text else heading)
        elif text:
            pieces.append(text)
    return SectionDraft(position=section_index, title=title,
                        body="\n\n".join(pieces), summary=summary,
                        status="generated", warnings=tuple(warnings))


def _subsection_or_warning(chat, store, embedder, title, scope, top_k,
                           section, topic, warnings) -> str:
    try:
        return generate_subsection(chat, store, embedder, title, scope,
                                   top_k=top_k, section=section, topic=topic)
    except EmptyScope:
        warnings.append(f"no indexed references in scope for {title!r}; skipped")
        return ""


def compose_predefined_section(chat, role: str, instruction: str, topic: str,
                               summaries) -> str:
    if summaries:
        context = "Section summaries:\n---\n" + "\n\n".join(
            f"{name}: {text}" for name, text in summaries)
    else:
        context = "No section summaries are available; write from the topic alone."
    body = strip_heading_lines(chat.complete(chat_request(
        SECTION_PROMPT.format(instruction=instruction, topic=topic, context=context),
        providers.PURPOSE_SECTION)))
    if role == "abstract":
        body = cut_at_sentence_words(body, ABSTRACT_WORD_LIMIT)
    return body


def compose_survey(chat, store, embedder, outline: Outline, scopes, *,
                   topic: str = "", top_k: int = 8, existing=None,
                   force: bool = False, max_workers: int = 4) -> dict[int, SectionDraft]:
    """Compose all sections; scopes maps cluster-section entry index -> ref ids.

    Subsections fan out in parallel; each section's summary/merge runs after
    its own subsections finish; the predefined sections run last, over the
    collected summaries.
    """
    existing = dict(existing or {})
    drafts: dict[int, SectionDraft] = {}

    def keep_edited(idx):
        prior = existing.get(idx)
        return prior if (prior is not None and prior.status == "edited"
                         and not force) else None

    cluster_idx = cluster_section_indices(outline)
    jobs = []
    for si in cluster_idx:
        if keep_edited(si) is not None:
            continue
        scope = list(scopes.get(si, []))
        for j, _lvl, sub_title in section_children(outline, si):
            jobs.append((si, j, sub_title, scope))
    texts: dict[int, str] = {}
    job_warnings: dict[int, list[str]] = {j: [] for _si, j, *_rest in jobs}
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        futures = {
            pool.submit(_subsection_or_warning, chat, store, embedder, sub_title,
                        scope, top_k, outline.entries[si][1], topic,
                        job_warnings[j]): j
            for si, j, sub_title, scope in jobs}
        for fut, j in futures.items():
            texts[j] = fut.result()
    # merge per-job warnings in outline order so output is deterministic
    warnings_by_section: dict[int, list[str]] = {si: [] for si in cluster_idx}
    for si, j, _sub_title, _scope in jobs:
        warnings_by_section[si].extend(job_warnings[j])
    for si in cluster_idx:
        prior = keep_edited(si)
        if prior is not None:
            drafts[si] = prior
            continue
        draft = compose_cluster_section(
            chat, store, embedder, outline, si, list(scopes.get(si, [])),
            topic=topic, top_k=top_k, subsection_texts=texts)
        drafts[si] = replace(
            draft, warnings=draft.warnings + tuple(warnings_by_section[si]))
    summaries = [(drafts[si].title, drafts[si].summary)
                 for si in cluster_idx if drafts[si].summary]
    roles = predefined_section_indices(outline)
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        futures = {}
        for role, instruction in PREDEFINED_INSTRUCTIONS:
            idx = roles.get(role)
            if idx is None:
                continue
            prior = keep_edited(idx)
            if prior is not None:
                drafts[idx] = prior
                continue
            futures[pool.submit(compose_predefined_section, chat, role,
                                instruction, topic, summaries)] = (role, idx)
        for fut, (role, idx) in futures.items():
            drafts[idx] = SectionDraft(position=idx,
                                       title=outline.entries[idx][1],
                                       body=fut.result(), status="generated")
    return drafts


def assemble_document(outline: Outline, drafts: dict[int, SectionDraft]) -> str:
    """Full survey body text: level-1 headings plus each section's body.

    Cluster-section bodies carry their own level-2/3 headings, so the heading
    tree of the assembled text reproduces the outline exactly.
    """
    pieces = []
    for i, (lvl, title) in enumerate(outline.entries):
        if lvl != 1:
            continue
        pieces.append(f"# {title}")
        draft = drafts.get(i)
        if draft is not None and draft.body:
            pieces.append(draft.body)
    return "\n\n".join(pieces) + "\n"
