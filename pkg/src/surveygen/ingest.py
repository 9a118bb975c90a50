"""Reference ingestion: file -> Markdown -> metadata + assets -> indexed chunks.

PDF conversion is delegated to an external command with the contract
`PARSER_CMD <input.pdf> <output_dir>` producing `<output_dir>/<stem>.md` and
an images subdirectory. Markdown uploads pass through untouched.
"""

from __future__ import annotations

import os
import re
import shlex
import shutil
import subprocess
import tempfile
from dataclasses import dataclass, field

from . import providers
from .arxiv import ReferenceStub
from .chunking import chunk_document
from .errors import (ParserCommandFailed, UnsupportedFormat, UploadTooLarge)
from .providers import chat_request
from .store import AssetRecord, ChunkRecord, VectorStore
from .textutil import json_object

CAPTION_RE = re.compile(r"^(Figure|Fig\.|Table)\s*\d+")
IMAGE_RE = re.compile(r"!\[[^\]]*\]\(([^)\s]+)\)")

METADATA_PROMPT = """The text below is the start of a research paper in Markdown.
Identify the missing bibliographic fields.

Return a JSON object with keys "title", "authors", "abstract", "introduction"
(plain strings; use "" when a field cannot be found). Return only the JSON object.

---
{head}"""


@dataclass
class ReferencePaper:
    ref_id: str
    source: str  # "arxiv" | "upload"
    title: str = ""
    authors: str = ""
    abstract: str = ""
    introduction: str = ""
    markdown_body: str = ""
    assets: list[AssetRecord] = field(default_factory=list)
    arxiv_id: str = ""
    year: int = 0
    flagged_fields: tuple[str, ...] = ()


def parse_document(raw: bytes, filename: str, parser_cmd: str = "",
                   upload_limit_mb: int = 50, assets_dir: str | None = None,
                   asset_prefix: str = "") -> tuple[str, list[AssetRecord]]:
    """Returns (markdown_body, assets with empty caption embeddings)."""
    if len(raw) > upload_limit_mb * 1024 * 1024:
        raise UploadTooLarge(f"{len(raw)} bytes exceeds {upload_limit_mb} MB limit")
    ext = os.path.splitext(filename)[1].lower()
    if ext in (".md", ".markdown"):
        markdown = raw.decode("utf-8", errors="replace")
    elif ext == ".pdf":
        markdown = _run_parser(raw, filename, parser_cmd, assets_dir, asset_prefix)
    else:
        raise UnsupportedFormat(f"cannot ingest {ext or 'extensionless'} files")
    return markdown, detect_assets(markdown, asset_prefix)


def _run_parser(raw: bytes, filename: str, parser_cmd: str,
                assets_dir: str | None, asset_prefix: str) -> str:
    if not parser_cmd:
        raise ParserCommandFailed("no PDF parser command configured")
    stem = os.path.splitext(os.path.basename(filename))[0] or "paper"
    with tempfile.TemporaryDirectory() as tmp:
        pdf_path = os.path.join(tmp, stem + ".pdf")
        out_dir = os.path.join(tmp, "out")
        os.makedirs(out_dir)
        with open(pdf_path, "wb") as fh:
            fh.write(raw)
        cmd = shlex.split(parser_cmd) + [pdf_path, out_dir]
        proc = subprocess.run(cmd, capture_output=True, text=True)
        if proc.returncode != 0:
            raise ParserCommandFailed(
                f"parser exited {proc.returncode}", stderr=proc.stderr)
        md_path = os.path.join(out_dir, stem + ".md")
        if not os.path.exists(md_path):
            found = [f for f in os.listdir(out_dir) if f.endswith(".md")]
            if not found:
                raise ParserCommandFailed("parser produced no Markdown file",
                                          stderr=proc.stderr)
            md_path = os.path.join(out_dir, found[0])
        with open(md_path, encoding="utf-8") as fh:
            markdown = fh.read()
        if assets_dir:
            markdown = _collect_images(out_dir, assets_dir, asset_prefix, markdown)
    return markdown


def _collect_images(out_dir: str, assets_dir: str, prefix: str, markdown: str) -> str:
    os.makedirs(assets_dir, exist_ok=True)
    for root, _dirs, files in os.walk(out_dir):
        for name in sorted(files):
            if os.path.splitext(name)[1].lower() in (".png", ".jpg", ".jpeg", ".gif"):
                target = f"{prefix}{name}" if prefix else name
                shutil.copyfile(os.path.join(root, name),
                                os.path.join(assets_dir, target))
                if prefix:
                    markdown = markdown.replace(name, target)
    return markdown


def detect_assets(markdown: str, _prefix: str = "") -> list[AssetRecord]:
    """Figures = image links, tables = pipe tables; caption must sit on an
    adjacent line and match the Figure/Table pattern, else the asset drops."""
    lines = markdown.splitlines()
    assets: list[AssetRecord] = []
    i = 0
    while i < len(lines):
        line = lines[i].strip()
        img = IMAGE_RE.search(line)
        if img:
            caption = _adjacent_caption(lines, i, i)
            if caption:
                assets.append(AssetRecord("", "figure", caption, img.group(1)))
            i += 1
            continue
        if line.startswith("|") and line.count("|") >= 2:
            start = i
            while i < len(lines) and lines[i].strip().startswith("|"):
                i += 1
            caption = _adjacent_caption(lines, start, i - 1)
            if caption:
                table_text = "\n".join(lines[start:i])
                assets.append(AssetRecord("", "table", caption, table_text))
            continue
        i += 1
    return assets


def _adjacent_caption(lines: list[str], start: int, end: int) -> str:
    for j in (start - 1, end + 1):
        if 0 <= j < len(lines):
            cand = lines[j].strip()
            if CAPTION_RE.match(cand):
                return cand
    return ""


_HEADING_RE = re.compile(r"^(#{1,4})\s+(.*)$")


def _section_body(lines: list[str], name: str) -> str:
    """Body of the first heading whose title is `name` (optionally numbered)."""
    want = re.compile(rf"^(\d+\.?\s*)?{name}\b", re.IGNORECASE)
    body: list[str] = []
    collecting = False
    for line in lines:
        m = _HEADING_RE.match(line)
        if m:
            if collecting:
                break
            if want.match(m.group(2).strip()):
                collecting = True
            continue
        if collecting:
            body.append(line)
    return "\n".join(body).strip()


def extract_metadata_heuristic(markdown: str) -> dict:
    lines = markdown.splitlines()
    title = ""
    title_idx = -1
    for i, line in enumerate(lines):
        m = _HEADING_RE.match(line)
        if m and len(m.group(1)) == 1:
            title = m.group(2).strip()
            title_idx = i
            break
    authors = ""
    if title_idx >= 0:
        for line in lines[title_idx + 1:]:
            stripped = line.strip()
            if not stripped:
                continue
            if _HEADING_RE.match(line):
                break
            authors = stripped
            break
    return {
        "title": title,
        "authors": authors,
        "abstract": _section_body(lines, "Abstract"),
        "introduction": _section_body(lines, "Introduction"),
    }


def extract_metadata(markdown: str, chat=None) -> tuple[dict, tuple[str, ...]]:
    """Heuristic pass, then one LLM call to fill whatever stayed empty.

    Returns (fields, names of fields that are still empty afterward).
    """
    fields = extract_metadata_heuristic(markdown)
    missing = [k for k, v in fields.items() if not v]
    if missing and chat is not None:
        try:
            reply = chat.complete(chat_request(
                METADATA_PROMPT.format(head=markdown[:4000]),
                providers.PURPOSE_EXTRACT))
            data = json_object(reply)
            for k in missing:
                v = data.get(k)
                if isinstance(v, str) and v.strip():
                    fields[k] = v.strip()
        except Exception:
            pass  # metadata degrades to empty; the UI flags it for review
    flagged = tuple(k for k, v in fields.items() if not v)
    return fields, flagged


def build_reference(ref_id: str, source: str, markdown: str,
                    assets: list[AssetRecord], chat=None,
                    stub: ReferenceStub | None = None) -> ReferencePaper:
    fields, flagged = extract_metadata(markdown, chat)
    paper = ReferencePaper(
        ref_id=ref_id, source=source,
        title=fields["title"], authors=fields["authors"],
        abstract=fields["abstract"], introduction=fields["introduction"],
        markdown_body=markdown,
        assets=[AssetRecord(ref_id, a.kind, a.caption, a.payload) for a in assets],
        flagged_fields=flagged)
    if stub is not None:
        # API metadata outranks anything scraped from the Markdown
        paper.title = stub.title or paper.title
        paper.abstract = stub.abstract or paper.abstract
        paper.authors = ", ".join(stub.authors) or paper.authors
        paper.arxiv_id = stub.arxiv_id
        paper.year = stub.year
        paper.flagged_fields = tuple(
            f for f in paper.flagged_fields if f == "introduction")
    return paper


def index_reference(paper: ReferencePaper, store: VectorStore, embedder,
                    chunk_size: int, overlap: int) -> int:
    """Embed and store all chunks plus asset captions, all-or-nothing."""
    chunks = chunk_document(paper.markdown_body, chunk_size, overlap)
    vectors = embedder.embed([text for text, _span in chunks])
    captioned = [a for a in paper.assets if a.caption]
    caption_vecs = embedder.embed([a.caption for a in captioned]) if captioned else []
    records = [ChunkRecord(paper.ref_id, i, text, span, tuple(vec))
               for i, ((text, span), vec) in enumerate(zip(chunks, vectors))]
    store.replace_collection(paper.ref_id, records)
    store.replace_assets(paper.ref_id, [
        AssetRecord(paper.ref_id, a.kind, a.caption, a.payload, tuple(v))
        for a, v in zip(captioned, caption_vecs)])
    return len(records)
