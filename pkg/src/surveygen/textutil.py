"""Small text helpers shared across modules."""

from __future__ import annotations

import json
import re

_WS_RE = re.compile(r"\s+")
_FENCE_RE = re.compile(r"^```[a-zA-Z]*\n(.*?)\n```$", re.DOTALL)


def collapse_ws(text: str) -> str:
    return _WS_RE.sub(" ", text).strip()


def strip_code_fence(text: str) -> str:
    m = _FENCE_RE.match(text.strip())
    return m.group(1) if m else text


def json_object(text: str) -> dict:
    """Pull the first JSON object out of an LLM reply; raises ValueError."""
    text = strip_code_fence(text)
    start = text.find("{")
    end = text.rfind("}")
    if start < 0 or end <= start:
        raise ValueError("no JSON object found")
    obj = json.loads(text[start:end + 1])
    if not isinstance(obj, dict):
        raise ValueError("top-level JSON value is not an object")
    return obj


_SENT_END_RE = re.compile(r"[.?!](?=\s|$)")


def cut_at_sentence_chars(text: str, limit: int) -> str:
    """Trim to <= limit characters, preferring the last sentence end inside."""
    if len(text) <= limit:
        return text
    head = text[:limit]
    last = None
    for m in _SENT_END_RE.finditer(head):
        last = m
    if last is not None:
        return head[:last.end()].rstrip()
    return head.rstrip()


def cut_at_sentence_words(text: str, word_limit: int) -> str:
    """Trim to <= word_limit words, cutting at the last full sentence inside."""
    words = text.split()
    if len(words) <= word_limit:
        return text
    head = " ".join(words[:word_limit])
    last = None
    for m in _SENT_END_RE.finditer(head):
        last = m
    if last is not None:
        return head[:last.end()].rstrip()
    return head.rstrip()


def numbered_lines(text: str) -> list[str]:
    """Parse '1. foo' / '2) bar' / '- baz' style list replies, in order."""
    out = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        m = re.match(r"^(?:\d+[.)]\s*|[-*]\s+)(.*)$", line)
        if m and m.group(1).strip():
            out.append(m.group(1).strip())
    return out
