"""Reference search: topic -> term extraction -> arXiv query -> relax loop.

The query groups three term lists: themes are conjunctive, entities and
concepts are disjunctive within their group, and the groups are ANDed. When a
search round returns too few papers the query is loosened one rung at a time:
first widen the entity/concept disjunctions with LLM-suggested related terms,
then drop the concepts group, then the entities group. Themes never relax.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from . import providers
from .arxiv import ArxivClient, ReferenceStub
from .errors import ExtractionFormatError
from .providers import ChatProvider, chat_request
from .textutil import json_object

DESCRIBE_PROMPT = (
    'Write a 3-5 sentence description of the research area "{title}" '
    "for planning a literature survey. Return only the description."
)

EXTRACT_PROMPT = """Build an arXiv search for a literature survey.

Topic: "{title}"
Description: {description}

Return a JSON object with three keys:
- "themes": 1 to 3 short phrases so central that every relevant paper mentions them
- "entities": up to 4 concrete systems, artifacts, or objects of study
- "concepts": up to 4 methods or ideas commonly paired with the topic

Terms must not contain double quotes. Return only the JSON object."""

EXTRACT_REMINDER = (
    "Your previous reply could not be used. Return only a JSON object with keys "
    '"themes", "entities", "concepts", each a list of strings; "themes" must '
    "contain at least one term without double quotes."
)

RELAX_PROMPT = """An arXiv search for the survey topic "{title}" returned too few results.

Current entities: {entities}
Current concepts: {concepts}

Suggest 4 additional related entities and 4 additional related concepts to widen the search.
Return only a JSON object: {{"entities": [...], "concepts": [...]}}."""


@dataclass(frozen=True)
class TopicSpec:
    title: str
    description: str = ""

    def __post_init__(self):
        if not self.title.strip():
            raise ValueError("topic title must be non-empty")


@dataclass(frozen=True)
class SearchConfig:
    min_ref: int = 10
    max_ref: int = 50
    max_try: int = 3

    def __post_init__(self):
        if self.min_ref < 1 or self.max_ref < self.min_ref or self.max_try < 1:
            raise ValueError("need 1 <= min_ref <= max_ref and max_try >= 1")


def clean_terms(terms) -> tuple[str, ...]:
    """Trim, drop empties and unquotable terms, dedup case-insensitively."""
    out, seen = [], set()
    for term in terms or []:
        if not isinstance(term, str):
            continue
        term = term.strip()
        if not term or '"' in term:
            continue
        key = term.lower()
        if key in seen:
            continue
        seen.add(key)
        out.append(term)
    return tuple(out)


@dataclass(frozen=True)
class QueryComponents:
    themes: tuple[str, ...]
    entities: tuple[str, ...] = ()
    concepts: tuple[str, ...] = ()
    relax_level: int = 0

    def __post_init__(self):
        if not self.themes:
            raise ValueError("themes must be non-empty")

    def canonical(self) -> "QueryComponents":
        # entities-empty + concepts-nonempty renders identically to the shifted
        # form, so pick one representative to keep render->parse a round trip
        if not self.entities and self.concepts:
            return replace(self, entities=self.concepts, concepts=())
        return self


def components(themes, entities=(), concepts=(), relax_level=0) -> QueryComponents:
    return QueryComponents(clean_terms(themes), clean_terms(entities),
                           clean_terms(concepts), relax_level)


def render_arxiv_query(comps: QueryComponents) -> str:
    def group(terms, op):
        return "(" + f" {op} ".join(f'abs:"{t}"' for t in terms) + ")"

    parts = [group(comps.themes, "AND")]
    if comps.entities:
        parts.append(group(comps.entities, "OR"))
    if comps.concepts:
        parts.append(group(comps.concepts, "OR"))
    return " AND ".join(parts)


_QUERY_TOKEN = None  # compiled lazily below


def _tokenize_query(text: str) -> list[tuple[str, str]]:
    import re

    global _QUERY_TOKEN
    if _QUERY_TOKEN is None:
        # quoted terms are atomic so parens/AND/OR inside a phrase stay literal
        _QUERY_TOKEN = re.compile(r'\s*(abs:"[^"]*"|\(|\)|AND|OR)')
    tokens, pos = [], 0
    while pos < len(text):
        m = _QUERY_TOKEN.match(text, pos)
        if not m:
            if text[pos:].strip():
                raise ExtractionFormatError(f"bad query syntax near {text[pos:pos+30]!r}")
            break
        tok = m.group(1)
        if tok.startswith("abs:"):
            tokens.append(("term", tok[5:-1]))
        else:
            tokens.append((tok, tok))
        pos = m.end()
    return tokens


def parse_arxiv_query(text: str) -> QueryComponents:
    """Inverse of render_arxiv_query on its output language."""
    tokens = _tokenize_query(text)
    groups: list[tuple[str, ...]] = []
    i = 0
    while i < len(tokens):
        if groups:
            if tokens[i][0] != "AND":
                raise ExtractionFormatError("expected AND between groups")
            i += 1
        if i >= len(tokens) or tokens[i][0] != "(":
            raise ExtractionFormatError("expected '(' to open a group")
        i += 1
        terms: list[str] = []
        op = "AND" if not groups else "OR"
        while True:
            if i >= len(tokens) or tokens[i][0] != "term":
                raise ExtractionFormatError("expected a quoted abs term")
            if not tokens[i][1]:
                raise ExtractionFormatError("empty term")
            terms.append(tokens[i][1])
            i += 1
            if i < len(tokens) and tokens[i][0] == ")":
                i += 1
                break
            if i >= len(tokens) or tokens[i][0] != op:
                raise ExtractionFormatError(f"expected {op} inside group")
            i += 1
        groups.append(tuple(terms))
    if not groups or len(groups) > 3:
        raise ExtractionFormatError(f"expected 1-3 groups, got {len(groups)}")
    themes = groups[0]
    entities = groups[1] if len(groups) > 1 else ()
    concepts = groups[2] if len(groups) > 2 else ()
    return QueryComponents(themes, entities, concepts)


def describe_topic(chat: ChatProvider, title: str) -> str:
    return chat.complete(chat_request(
        DESCRIBE_PROMPT.format(title=title), providers.PURPOSE_DESCRIBE)).strip()


def derive_query_components(chat: ChatProvider, topic: TopicSpec) -> QueryComponents:
    prompt = EXTRACT_PROMPT.format(title=topic.title,
                                   description=topic.description or topic.title)
    last_error = ""
    for attempt in range(2):
        if attempt:
            prompt = prompt + "\n\n" + EXTRACT_REMINDER
        reply = chat.complete(chat_request(prompt, providers.PURPOSE_EXTRACT))
        try:
            data = json_object(reply)
        except ValueError as exc:
            last_error = str(exc)
            continue
        themes = clean_terms(data.get("themes"))
        if not themes:
            last_error = "no usable theme terms"
            continue
        return QueryComponents(themes, clean_terms(data.get("entities")),
                               clean_terms(data.get("concepts")), relax_level=0)
    raise ExtractionFormatError(f"term extraction failed twice: {last_error}")


def _merged(old: tuple[str, ...], extra) -> tuple[str, ...]:
    return clean_terms(list(old) + list(extra or []))


def loosen(chat: ChatProvider, topic: TopicSpec, comps: QueryComponents) -> QueryComponents:
    """One relaxation rung. Failure to widen leaves terms unchanged but still
    advances the level, so the next rung drops a group instead of stalling."""
    level = comps.relax_level + 1
    if level == 1:
        prompt = RELAX_PROMPT.format(title=topic.title,
                                     entities=list(comps.entities),
                                     concepts=list(comps.concepts))
        for attempt in range(2):
            if attempt:
                prompt = prompt + "\n\n" + EXTRACT_REMINDER
            reply = chat.complete(chat_request(prompt, providers.PURPOSE_EXTRACT))
            try:
                data = json_object(reply)
            except ValueError:
                continue
            return replace(comps,
                           entities=_merged(comps.entities, data.get("entities")),
                           concepts=_merged(comps.concepts, data.get("concepts")),
                           relax_level=1)
        return replace(comps, relax_level=1)
    if level == 2:
        return replace(comps, concepts=(), relax_level=2)
    if level == 3:
        return replace(comps, entities=(), relax_level=3)
    return replace(comps, relax_level=level)


@dataclass
class SearchOutcome:
    stubs: list[ReferenceStub]
    calls: int
    relax_level: int
    insufficient: bool
    queries: list[str] = field(default_factory=list)


def search_references(chat: ChatProvider, client: ArxivClient, topic: TopicSpec,
                      config: SearchConfig,
                      comps: QueryComponents | None = None) -> SearchOutcome:
    if comps is None:
        comps = derive_query_components(chat, topic)
    found: dict[str, ReferenceStub] = {}
    queries: list[str] = []
    calls = 0
    while True:
        query = render_arxiv_query(comps)
        queries.append(query)
        results = client.search(query, max_results=config.max_ref)
        calls += 1
        for stub in results:
            found.setdefault(stub.arxiv_id, stub)
        if len(found) >= config.min_ref or calls >= config.max_try:
            break
        comps = loosen(chat, topic, comps)
    stubs = list(found.values())[:config.max_ref]
    return SearchOutcome(stubs=stubs, calls=calls, relax_level=comps.relax_level,
                         insufficient=len(stubs) < config.min_ref, queries=queries)
