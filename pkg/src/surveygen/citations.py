"""Sentence-level citation assignment with an adaptive similarity threshold.

Every sentence of the composed survey is embedded and compared against every
indexed chunk. The cut-off adapts to the global score distribution:
tau = max(tau_static, mean + k_sigma * population stddev). Assets are placed
by matching their captions against sentences the same way.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from .errors import EmptyDocument, EmptyScores
from .store import VectorStore

# tokens that end with a period mid-sentence; checked before splitting
ABBREVIATIONS = (
    "et al.", "e.g.", "i.e.", "cf.", "vs.", "resp.",
    "Fig.", "fig.", "Eq.", "eq.", "Tab.", "tab.", "Sec.", "sec.", "No.", "no.",
)

_BOUNDARY_RE = re.compile(r"[.?!]+(?=\s)")
_WORD_RE = re.compile(r"\w")


def _content_runs(text: str) -> list[tuple[int, int]]:
    """Contiguous spans of non-heading lines."""
    runs: list[list[int]] = []
    pos = 0
    for line in text.splitlines(keepends=True):
        end = pos + len(line)
        if not line.lstrip().startswith("#"):
            if runs and runs[-1][1] == pos:
                runs[-1][1] = end
            else:
                runs.append([pos, end])
        pos = end
    return [(a, b) for a, b in runs]


def _trimmed(text: str, start: int, end: int):
    while start < end and text[start].isspace():
        start += 1
    while end > start and text[end - 1].isspace():
        end -= 1
    if end > start and _WORD_RE.search(text, start, end):
        return (start, end)
    return None


def split_sentences(text: str) -> list[tuple[int, int]]:
    """Char spans of sentences; heading lines are never part of a sentence.

    Boundary rule: sentence punctuation, whitespace, then an uppercase letter,
    unless the text before the punctuation ends in a known abbreviation.
    """
    spans = []
    for a, b in _content_runs(text):
        start = a
        for m in _BOUNDARY_RE.finditer(text, a, b):
            end_p = m.end()
            if end_p <= start:
                continue
            j = end_p
            while j < b and text[j].isspace():
                j += 1
            if j >= b or not text[j].isupper():
                continue
            head = text[start:end_p]
            if any(head.endswith(abbrev) for abbrev in ABBREVIATIONS):
                continue
            span = _trimmed(text, start, end_p)
            if span:
                spans.append(span)
            start = j
        span = _trimmed(text, start, b)
        if span:
            spans.append(span)
    return spans


@dataclass(frozen=True)
class CitationConfig:
    tau_static: float = 0.70
    k_sigma: float = 1.0
    max_cites_per_sentence: int = 3

    def __post_init__(self):
        if not 0 < self.tau_static < 1:
            raise ValueError("tau_static must lie in (0, 1)")
        if self.k_sigma < 0:
            raise ValueError("k_sigma must be >= 0")
        if self.max_cites_per_sentence < 1:
            raise ValueError("max_cites_per_sentence must be >= 1")


def compute_adaptive_threshold(scores, tau_static: float, k_sigma: float) -> float:
    if not scores:
        raise EmptyScores("no similarity scores to compute a threshold from")
    n = len(scores)
    mu = math.fsum(scores) / n
    var = math.fsum((s - mu) ** 2 for s in scores) / n
    return max(tau_static, mu + k_sigma * math.sqrt(var))


@dataclass(frozen=True)
class CitationAssignment:
    sentence_index: int
    sentence_span: tuple[int, int]
    ref_id: str
    similarity: float


@dataclass(frozen=True)
class CitationSet:
    tau: float
    assignments: tuple[CitationAssignment, ...]


def assign_citations(text: str, store: VectorStore, embedder,
                     config: CitationConfig, scope=None) -> CitationSet:
    spans = split_sentences(text)
    if not spans:
        raise EmptyDocument("no sentences found in the document")
    ids = sorted(store.collections) if scope is None else [
        r for r in sorted(store.collections) if r in set(scope)]
    chunks = [rec for rid in ids for rec in store.collections[rid]]
    if not chunks:
        return CitationSet(tau=config.tau_static, assignments=())
    vecs = embedder.embed([text[a:b] for a, b in spans])
    sims: list[list[float]] = []
    all_scores: list[float] = []
    for sv in vecs:
        row = [math.fsum(a * b for a, b in zip(sv, rec.embedding)) for rec in chunks]
        sims.append(row)
        all_scores.extend(row)
    tau = compute_adaptive_threshold(all_scores, config.tau_static, config.k_sigma)
    assignments = []
    for si, span in enumerate(spans):
        best_per_ref: dict[str, float] = {}
        for rec, score in zip(chunks, sims[si]):
            if score >= tau:
                prev = best_per_ref.get(rec.ref_id)
                if prev is None or score > prev:
                    best_per_ref[rec.ref_id] = score
        ranked = sorted(best_per_ref.items(), key=lambda kv: (-kv[1], kv[0]))
        for ref_id, score in ranked[:config.max_cites_per_sentence]:
            assignments.append(CitationAssignment(si, span, ref_id, score))
    return CitationSet(tau=tau, assignments=tuple(assignments))


@dataclass(frozen=True)
class AssetPlacement:
    ref_id: str
    asset_index: int
    sentence_index: int
    sentence_span: tuple[int, int]
    score: float


def match_assets(text: str, store: VectorStore, embedder,
                 asset_threshold: float = 0.60) -> list[AssetPlacement]:
    """Best-sentence anchor per asset caption; ties keep the earliest sentence."""
    spans = split_sentences(text)
    if not spans:
        return []
    vecs = embedder.embed([text[a:b] for a, b in spans])
    placements = []
    for rid in sorted(store.assets):
        for ai, asset in enumerate(store.assets[rid]):
            if not asset.caption_embedding:
                continue
            best_si, best_score = -1, -2.0
            for si, sv in enumerate(vecs):
                score = math.fsum(a * b for a, b in zip(sv, asset.caption_embedding))
                if score > best_score:
                    best_si, best_score = si, score
            if best_score >= asset_threshold:
                placements.append(AssetPlacement(
                    rid, ai, best_si, spans[best_si], best_score))
    return placements
