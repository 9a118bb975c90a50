"""Deterministic offline stand-ins for the chat and embedding providers.

HashingEmbedder gives bitwise-reproducible unit vectors from token hashes, so
retrieval and clustering tests run without a model. ScriptedChat replays
canned responses keyed by regex. OfflineChat synthesizes plausible output for
each request purpose, which lets the whole pipeline run end to end offline.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

from . import providers
from .errors import EmptyInput
from .providers import ChatRequest, check_texts, normalize

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


@dataclass
class HashingEmbedder:
    """Signed bag-of-tokens hashed into a fixed-dimension unit vector."""

    dim: int = 256

    def _embed_one(self, text: str) -> list[float]:
        acc = [0.0] * self.dim
        for tok in tokenize(text):
            digest = hashlib.md5(tok.encode("utf-8")).digest()
            idx = int.from_bytes(digest[:8], "big") % self.dim
            sign = 1.0 if digest[8] % 2 == 0 else -1.0
            acc[idx] += sign
        return normalize(acc)

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        check_texts(texts)
        return [self._embed_one(t) for t in texts]


@dataclass
class ScriptedChat:
    """Replays canned responses; rules are (regex, response) over the last user message.

    A response may be a string or a callable taking the ChatRequest. With
    sequence set, responses pop in order regardless of content. Every request
    is recorded for assertions.
    """

    rules: list[tuple[str, object]] = field(default_factory=list)
    sequence: list[object] = field(default_factory=list)
    calls: list[ChatRequest] = field(default_factory=list)

    def add(self, pattern: str, response) -> "ScriptedChat":
        self.rules.append((pattern, response))
        return self

    def complete(self, request: ChatRequest) -> str:
        self.calls.append(request)
        if self.sequence:
            response = self.sequence.pop(0)
            return response(request) if callable(response) else str(response)
        prompt = request.messages[-1].content
        for pattern, response in self.rules:
            if re.search(pattern, prompt, re.DOTALL):
                return response(request) if callable(response) else str(response)
        raise AssertionError(f"no scripted response for prompt: {prompt[:200]!r}")


_CHUNK_BLOCK_RE = re.compile(r"<<<chunk ([^:>]+):(\d+)>>>\n(.*?)<<<end>>>", re.DOTALL)
_SENT_RE = re.compile(r"[^.?!]*[.?!]")


def _stable_int(text: str) -> int:
    return int.from_bytes(hashlib.md5(text.encode("utf-8")).digest()[:4], "big")


@dataclass
class OfflineChat:
    """Purpose-dispatched deterministic chat fake.

    Subsection drafts are stitched from sentences copied out of the context
    blocks in the prompt, so sentence-to-chunk similarity is high enough for
    citation selection to fire under the hashing embedder.
    """

    delay: float = 0.0
    calls: list[ChatRequest] = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def complete(self, request: ChatRequest) -> str:
        with self._lock:
            self.calls.append(request)
        if self.delay > 0:
            time.sleep(self.delay)
        prompt = request.messages[-1].content
        purpose = request.purpose
        if purpose == providers.PURPOSE_EXTRACT:
            return self._extract(prompt)
        if purpose == providers.PURPOSE_DESCRIBE:
            topic = self._topic(prompt)
            return (f"This area studies {topic}. Work spans models, systems, "
                    f"and evaluation methods for {topic}.")
        if purpose == providers.PURPOSE_HYDE:
            return self._hyde(prompt)
        if purpose == providers.PURPOSE_NAME:
            return self._names(prompt)
        if purpose == providers.PURPOSE_FILL:
            return self._fill(prompt)
        if purpose == providers.PURPOSE_SUBSECTION:
            return self._subsection(prompt)
        if purpose == providers.PURPOSE_SUMMARY:
            return self._summary(prompt)
        if purpose == providers.PURPOSE_MERGE:
            return self._merge(prompt)
        if purpose == providers.PURPOSE_SECTION:
            return self._section(prompt)
        if purpose == providers.PURPOSE_JUDGE:
            return "3"
        raise EmptyInput(f"offline chat has no handler for purpose {purpose!r}")

    def _topic(self, prompt: str) -> str:
        m = re.search(r'"([^"]+)"', prompt)
        return m.group(1) if m else "the topic"

    def _extract(self, prompt: str) -> str:
        topic = self._topic(prompt)
        toks = tokenize(topic) or ["survey"]
        if "additional" in prompt:
            ents = [f"{toks[i % len(toks)]} system {i}" for i in range(4)]
            cons = [f"{toks[i % len(toks)]} method {i}" for i in range(4)]
            return json.dumps({"entities": ents, "concepts": cons})
        themes = toks[:2] or toks
        ents = [f"{t} model" for t in toks[:4]] or [f"{toks[0]} model"]
        cons = [f"{t} analysis" for t in toks[:4]] or [f"{toks[0]} analysis"]
        return json.dumps({"themes": themes, "entities": ents, "concepts": cons})

    def _hyde(self, prompt: str) -> str:
        topic = self._topic(prompt)
        m = re.search(r"(\d+) (?:distinct|different)", prompt)
        n = int(m.group(1)) if m else 10
        aspects = ["methods", "datasets", "evaluation", "applications", "theory",
                   "architectures", "training", "benchmarks", "limitations", "history"]
        lines = []
        for i in range(n):
            aspect = aspects[i % len(aspects)]
            lines.append(f"{i + 1}. This work studies {aspect} for {topic}, "
                         f"variant {i + 1} of the idea.")
        return "\n".join(lines)

    def _names(self, prompt: str) -> str:
        blocks = re.findall(r"Cluster (\d+)", prompt)
        n = len(set(blocks)) or 1
        # pick a distinguishing keyword per cluster block when one is available
        names = []
        for i in range(n):
            m = re.search(rf"Cluster {i + 1}[^\n]*\n(.*?)(?=\nCluster |\Z)", prompt, re.DOTALL)
            words = [w for w in tokenize(m.group(1))[:40] if len(w) > 4] if m else []
            key = words[i % len(words)].capitalize() if words else f"Area {i + 1}"
            names.append(f"{key} Studies {i + 1}")
        return "\n".join(f"{i + 1}. {name}" for i, name in enumerate(names))

    def _fill(self, prompt: str) -> str:
        name = self._topic(prompt)
        m = re.search(r"Propose (\d+) subsection titles", prompt)
        k = int(m.group(1)) if m else 3
        stems = ["Foundations", "Techniques", "Evaluation", "Applications", "Open Problems"]
        return "\n".join(f"{i + 1}. {stems[i % len(stems)]} of {name}"
                         for i in range(k))

    def _subsection(self, prompt: str) -> str:
        sentences: list[str] = []
        for _ref, _idx, body in _CHUNK_BLOCK_RE.findall(prompt):
            for m in _SENT_RE.finditer(body.replace("\n", " ")):
                s = m.group(0).strip()
                if len(s.split()) >= 5:
                    sentences.append(s)
                if len(sentences) >= 40:
                    break
            if len(sentences) >= 40:
                break
        if not sentences:
            return ("No indexed material matched this part of the outline. "
                    "Further collection is required.")
        out, words = [], 0
        i = 0
        while words < 320 and i < len(sentences):
            out.append(sentences[i])
            words += len(sentences[i].split())
            i += 1
        return " ".join(out)

    def _summary(self, prompt: str) -> str:
        m = re.search(r"---\n(.*)", prompt, re.DOTALL)
        body = m.group(1) if m else prompt
        words = body.split()
        return " ".join(words[:120])

    def _merge(self, prompt: str) -> str:
        m = re.search(r"---\n(.*)", prompt, re.DOTALL)
        body = m.group(1) if m else prompt
        paras = [p.strip() for p in body.split("\n\n") if p.strip()]
        return " ".join(paras)

    def _section(self, prompt: str) -> str:
        topic = self._topic(prompt)
        seed = _stable_int(prompt) % 7
        base = (f"This survey reviews research on {topic}. "
                f"It organizes the literature into themed sections and traces "
                f"shared methods across them. ")
        filler = [f"Direction {i + 1} remains open for study of {topic}." for i in range(seed + 3)]
        return base + " ".join(filler)
