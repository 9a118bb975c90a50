"""HyDE-based per-reference descriptions under a categorization criterion.

For a criterion k we generate n pseudo-passages describing how a paper might
discuss k, retrieve the top chunks per passage from each reference's own
collection, merge/dedup into a context, and ask the LLM for one description
per reference. Descriptions are what the clustering stage embeds.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import providers
from .errors import EmptyScope, ProviderUnavailable
from .providers import ChatProvider, chat_request
from .store import ChunkRecord, VectorStore
from .textutil import cut_at_sentence_chars, numbered_lines

DEFAULT_CRITERION = "main research theme"

HYDE_PROMPT = """A survey's references are being grouped by this categorization criterion: "{criterion}".

Write {n} distinct hypothetical passages (2-4 sentences each). Each passage should
read like an excerpt from a different research paper discussing its approach to
the criterion, covering a different plausible angle.

Return them as a numbered list, one passage per line."""

HYDE_TOP_UP_PROMPT = """Paraphrase the passage below so it keeps the meaning but shares no phrasing.

{passage}

Return only the paraphrased passage."""

DESCRIPTION_PROMPT = """Summarize how the excerpts below characterize this paper with respect to
the categorization criterion "{criterion}". Write one focused paragraph of at
most 150 words describing the paper's position under that criterion. Do not
mention that these are excerpts.

---
{context}"""


@dataclass(frozen=True)
class HyDEQuerySet:
    criterion: str
    queries: tuple[str, ...]


@dataclass(frozen=True)
class ReferenceDescription:
    ref_id: str
    criterion: str
    text: str
    embedding: tuple[float, ...]


def _distinct(lines, limit):
    out, seen = [], set()
    for line in lines:
        key = line.strip().lower()
        if key and key not in seen:
            seen.add(key)
            out.append(line.strip())
        if len(out) == limit:
            break
    return out


def generate_hyde_queries(chat: ChatProvider, criterion: str,
                          n_hyde: int = 10) -> HyDEQuerySet:
    prompt = HYDE_PROMPT.format(criterion=criterion, n=n_hyde)
    queries = _distinct(numbered_lines(chat.complete(
        chat_request(prompt, providers.PURPOSE_HYDE))), n_hyde)
    if len(queries) < n_hyde:
        more = numbered_lines(chat.complete(
            chat_request(prompt, providers.PURPOSE_HYDE)))
        queries = _distinct(queries + more, n_hyde)
    i = 0
    while len(queries) < n_hyde and i < len(queries):
        # pad by paraphrasing what we have
        para = chat.complete(chat_request(
            HYDE_TOP_UP_PROMPT.format(passage=queries[i]),
            providers.PURPOSE_HYDE)).strip()
        if para and para.lower() not in {q.lower() for q in queries}:
            queries.append(para)
        else:
            queries.append(f"{queries[i]} Considered from another angle {len(queries)}.")
        i += 1
    if len(queries) < n_hyde:
        raise ProviderUnavailable("could not assemble enough distinct pseudo-passages")
    return HyDEQuerySet(criterion=criterion, queries=tuple(queries[:n_hyde]))


def retrieve_categorization_context(ref_id: str, queries: HyDEQuerySet,
                                    store: VectorStore, embedder,
                                    top_k_hyde: int = 3) -> list[ChunkRecord]:
    """Union of per-query top-k from this reference's collection, document order."""
    if not store.collection(ref_id):
        raise EmptyScope(f"reference {ref_id} has no indexed chunks")
    query_vecs = embedder.embed(list(queries.queries))
    picked: dict[int, ChunkRecord] = {}
    for vec in query_vecs:
        for rec, _score in store.search(vec, top_k=top_k_hyde, scope=[ref_id]):
            picked.setdefault(rec.chunk_index, rec)
    return [picked[i] for i in sorted(picked)]


def generate_description(chat: ChatProvider, embedder, ref, context: list[ChunkRecord],
                         criterion: str, max_chars: int = 1200) -> ReferenceDescription:
    if context:
        blob = "\n\n".join(rec.text for rec in context)
    else:
        blob = ref.abstract or ref.title or ref.markdown_body[:1000]
    reply = chat.complete(chat_request(
        DESCRIPTION_PROMPT.format(criterion=criterion, context=blob),
        providers.PURPOSE_SUMMARY))
    text = cut_at_sentence_chars(reply.strip(), max_chars)
    vec = embedder.embed([text])[0]
    return ReferenceDescription(ref_id=ref.ref_id, criterion=criterion,
                                text=text, embedding=tuple(vec))
