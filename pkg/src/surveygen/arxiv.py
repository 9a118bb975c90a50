"""arXiv Atom API client with a politeness delay and injectable transport."""

from __future__ import annotations

import re
import time
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from typing import Callable

import httpx

from .errors import ArxivUnavailable
from .textutil import collapse_ws

ATOM = "{http://www.w3.org/2005/Atom}"

_VERSION_RE = re.compile(r"v\d+$")


def strip_version(arxiv_id: str) -> str:
    return _VERSION_RE.sub("", arxiv_id)


@dataclass(frozen=True)
class ReferenceStub:
    arxiv_id: str
    title: str
    abstract: str
    authors: tuple[str, ...]
    pdf_url: str
    year: int = 0


def parse_atom_feed(xml_text: str) -> list[ReferenceStub]:
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        raise ArxivUnavailable(f"bad Atom feed: {exc}")
    stubs = []
    for entry in root.findall(f"{ATOM}entry"):
        raw_id = (entry.findtext(f"{ATOM}id") or "").strip()
        arxiv_id = strip_version(raw_id.rsplit("/abs/", 1)[-1]) if raw_id else ""
        if not arxiv_id:
            continue
        title = collapse_ws(entry.findtext(f"{ATOM}title") or "")
        abstract = collapse_ws(entry.findtext(f"{ATOM}summary") or "")
        authors = tuple(
            collapse_ws(a.findtext(f"{ATOM}name") or "")
            for a in entry.findall(f"{ATOM}author")
        )
        pdf_url = ""
        for link in entry.findall(f"{ATOM}link"):
            if link.get("title") == "pdf" or link.get("type") == "application/pdf":
                pdf_url = link.get("href") or ""
                break
        if not pdf_url:
            pdf_url = f"https://arxiv.org/pdf/{arxiv_id}"
        published = entry.findtext(f"{ATOM}published") or ""
        year = int(published[:4]) if published[:4].isdigit() else 0
        stubs.append(ReferenceStub(arxiv_id, title, abstract, authors, pdf_url, year))
    return stubs


@dataclass
class ArxivClient:
    base_url: str = "https://export.arxiv.org/api/query"
    delay: float = 3.0
    timeout: float = 60.0
    transport: httpx.BaseTransport | None = None
    sleeper: Callable[[float], None] = time.sleep
    _primed: bool = field(default=False, repr=False)

    def __post_init__(self):
        self._client = httpx.Client(timeout=self.timeout, transport=self.transport,
                                    follow_redirects=True)

    def search(self, query: str, max_results: int) -> list[ReferenceStub]:
        if self._primed and self.delay > 0:
            self.sleeper(self.delay)
        self._primed = True
        params = {
            "search_query": query,
            "start": 0,
            "max_results": max_results,
            "sortBy": "relevance",
        }
        try:
            resp = self._client.get(self.base_url, params=params)
        except httpx.HTTPError as exc:
            raise ArxivUnavailable(f"arXiv request failed: {exc}")
        if resp.status_code != 200:
            raise ArxivUnavailable(f"arXiv HTTP {resp.status_code}")
        return parse_atom_feed(resp.text)

    def download_pdf(self, stub: ReferenceStub) -> bytes:
        if self._primed and self.delay > 0:
            self.sleeper(self.delay)
        self._primed = True
        try:
            resp = self._client.get(stub.pdf_url)
        except httpx.HTTPError as exc:
            raise ArxivUnavailable(f"PDF download failed: {exc}")
        if resp.status_code != 200:
            raise ArxivUnavailable(f"PDF download HTTP {resp.status_code}")
        return resp.content
